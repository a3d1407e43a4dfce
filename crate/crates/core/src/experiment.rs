//! Repeated-trial attack experiments: per trial a fresh split and victim
//! model, one shared perturbation, and every selection strategy evaluated
//! against the same model. Also parameter sweeps and report output.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::centrality::{
    betweenness_scores, degree_scores, pagerank_scores, random_scores, rwcs_score_vector, Method,
    PageRankParams, ScoreVector,
};
use crate::error::{Error, Result};
use crate::gcn::{
    evaluate_attack_with, feature_gradient, train, AttackMetrics, GcnConfig, GcnModel, LossKind,
    Propagator, SplitSpec,
};
use crate::graph::{Graph, NodeSet};
use crate::io;
use crate::perturb::{build_epsilon, build_epsilon_top, Epsilon, FeatureMatrix};
use crate::selector::{
    degree_threshold, gc_rwcs_with_fallback, select_top_r, SelectionConstraints,
};
use crate::synth::{generate, SynthSpec};
use crate::walk::{binarize_walk, BinaryWalkMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    None,
    Random,
    Degree,
    Pagerank,
    Betweenness,
    Rwcs,
    GcRwcs,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::None,
        Strategy::Random,
        Strategy::Degree,
        Strategy::Pagerank,
        Strategy::Betweenness,
        Strategy::Rwcs,
        Strategy::GcRwcs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Random => "random",
            Strategy::Degree => "degree",
            Strategy::Pagerank => "pagerank",
            Strategy::Betweenness => "betweenness",
            Strategy::Rwcs => "rwcs",
            Strategy::GcRwcs => "gc-rwcs",
        }
    }

    pub fn method(self) -> Option<Method> {
        match self {
            Strategy::None => None,
            Strategy::Random => Some(Method::Random),
            Strategy::Degree => Some(Method::Degree),
            Strategy::Pagerank => Some(Method::Pagerank),
            Strategy::Betweenness => Some(Method::Betweenness),
            Strategy::Rwcs => Some(Method::Rwcs),
            Strategy::GcRwcs => Some(Method::GcRwcs),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSource {
    Files {
        graph: PathBuf,
        features: PathBuf,
        labels: PathBuf,
    },
    /// `fresh_per_trial` draws a new dataset for every trial from the
    /// trial's own seed; otherwise `spec.seed` fixes one dataset.
    Synth {
        spec: SynthSpec,
        fresh_per_trial: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EpsilonSource {
    /// Sign of the summed cross-entropy gradient of the trial's model.
    Gradient,
    /// The synthetic dataset's disclosed large-weight coordinates, pushed
    /// against the majority class. Uses every disclosed coordinate.
    Disclosed,
    /// Importance vector read from a file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub model: GcnConfig,
    pub strategies: Vec<Strategy>,
    pub r_frac: f64,
    pub threshold_percent: f64,
    pub steps: usize,
    pub hops: usize,
    pub topl: usize,
    pub lambda: f64,
    pub j_frac: f64,
    pub trials: usize,
    pub seed: u64,
    pub epsilon: EpsilonSource,
    /// Evaluate on every node instead of the test split.
    pub eval_all_nodes: bool,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource) -> Self {
        ExperimentConfig {
            dataset,
            model: GcnConfig::default(),
            strategies: Strategy::ALL.to_vec(),
            r_frac: 0.01,
            threshold_percent: 10.0,
            steps: 4,
            hops: 1,
            topl: 30,
            lambda: 1.0,
            j_frac: 0.02,
            trials: 40,
            seed: 0,
            epsilon: EpsilonSource::Gradient,
            eval_all_nodes: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("need at least one trial".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidInput("no strategies requested".into()));
        }
        if !(self.r_frac > 0.0 && self.r_frac <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "budget fraction must lie in (0, 1], got {}",
                self.r_frac
            )));
        }
        if !(self.threshold_percent > 0.0 && self.threshold_percent <= 100.0) {
            return Err(Error::InvalidInput(format!(
                "threshold must lie in (0, 100], got {}",
                self.threshold_percent
            )));
        }
        if self.steps == 0 || self.topl == 0 {
            return Err(Error::InvalidInput(
                "walk length and top-l must be positive".into(),
            ));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "bad perturbation strength {}",
                self.lambda
            )));
        }
        if !(self.j_frac > 0.0 && self.j_frac <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "bad feature fraction {}",
                self.j_frac
            )));
        }
        if self.epsilon == EpsilonSource::Disclosed
            && !matches!(self.dataset, DatasetSource::Synth { .. })
        {
            return Err(Error::InvalidInput(
                "disclosed features exist only for synthetic datasets".into(),
            ));
        }
        if let DatasetSource::Synth { spec, .. } = &self.dataset {
            spec.validate()?;
        }
        self.model.validate()
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// A labelled graph, with the generator's W when synthetic.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub x: FeatureMatrix,
    pub y: Vec<usize>,
    pub disclosed: Option<Disclosed>,
}

#[derive(Debug, Clone)]
pub struct Disclosed {
    pub w: Vec<f64>,
    pub important: Vec<usize>,
}

impl Dataset {
    pub fn new(graph: Graph, x: FeatureMatrix, y: Vec<usize>) -> Result<Self> {
        if x.n() != graph.n() || y.len() != graph.n() {
            return Err(Error::Shape(format!(
                "graph has {} nodes, features {} rows, labels {}",
                graph.n(),
                x.n(),
                y.len()
            )));
        }
        Ok(Dataset {
            graph,
            x,
            y,
            disclosed: None,
        })
    }

    pub fn load(graph: &Path, features: &Path, labels: &Path) -> Result<Self> {
        Dataset::new(
            Graph::load_edge_list(graph)?,
            io::read_features(features)?,
            io::read_labels(labels)?,
        )
    }

    pub fn synthetic(spec: &SynthSpec) -> Result<Self> {
        let d = generate(spec)?;
        Ok(Dataset {
            graph: d.graph,
            x: d.x,
            y: d.y,
            disclosed: Some(Disclosed {
                w: d.w,
                important: d.important,
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }
}

/// Structural scores of one graph, computed on first use.
pub struct GraphScores {
    graph: Arc<Graph>,
    degree: OnceLock<ScoreVector>,
    pagerank: OnceLock<ScoreVector>,
    betweenness: OnceLock<ScoreVector>,
    walks: Mutex<BTreeMap<(usize, usize), Arc<WalkScores>>>,
}

pub struct WalkScores {
    pub rwcs: ScoreVector,
    pub binary: BinaryWalkMatrix,
}

impl GraphScores {
    pub fn new(graph: Arc<Graph>) -> Self {
        GraphScores {
            graph,
            degree: OnceLock::new(),
            pagerank: OnceLock::new(),
            betweenness: OnceLock::new(),
            walks: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn degree(&self) -> &ScoreVector {
        self.degree.get_or_init(|| degree_scores(&self.graph))
    }

    pub fn pagerank(&self) -> Result<&ScoreVector> {
        if let Some(v) = self.pagerank.get() {
            return Ok(v);
        }
        let v = pagerank_scores(&self.graph, PageRankParams::default())?;
        Ok(self.pagerank.get_or_init(|| v))
    }

    pub fn betweenness(&self) -> &ScoreVector {
        self.betweenness
            .get_or_init(|| betweenness_scores(&self.graph))
    }

    /// RWCS scores and the binarized walk matrix for `(steps, topl)`.
    pub fn walks(&self, steps: usize, topl: usize) -> Result<Arc<WalkScores>> {
        if let Some(w) = self.walks.lock().expect("walk cache").get(&(steps, topl)) {
            return Ok(Arc::clone(w));
        }
        let w = Arc::new(WalkScores {
            rwcs: rwcs_score_vector(&self.graph, steps)?,
            binary: binarize_walk(&self.graph, steps, topl)?,
        });
        let mut cache = self.walks.lock().expect("walk cache");
        Ok(Arc::clone(cache.entry((steps, topl)).or_insert(w)))
    }
}

/// Selection parameters that sweeps may vary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointParams {
    pub lambda: f64,
    pub j_frac: f64,
    pub steps: usize,
}

/// Attack budget `r = ⌈r_frac · n⌉`, at least one.
pub fn budget_for(r_frac: f64, n: usize) -> usize {
    ((r_frac * n as f64).ceil() as usize).max(1)
}

/// Runs one strategy. `None` selects nothing.
#[allow(clippy::too_many_arguments)]
pub fn select_nodes(
    strategy: Strategy,
    scores: &GraphScores,
    c: &SelectionConstraints,
    steps: usize,
    topl: usize,
    random_seed: u64,
) -> Result<(NodeSet, Vec<String>)> {
    let g = &scores.graph;
    let sel = match strategy {
        Strategy::None => return Ok((NodeSet::empty(), Vec::new())),
        Strategy::Random => select_top_r(&random_scores(g.n(), random_seed), g, c)?,
        Strategy::Degree => select_top_r(scores.degree(), g, c)?,
        Strategy::Pagerank => select_top_r(scores.pagerank()?, g, c)?,
        Strategy::Betweenness => select_top_r(scores.betweenness(), g, c)?,
        Strategy::Rwcs => select_top_r(&scores.walks(steps, topl)?.rwcs, g, c)?,
        Strategy::GcRwcs => {
            let w = scores.walks(steps, topl)?;
            gc_rwcs_with_fallback(g, &w.binary, c, &w.rwcs.values)?
        }
    };
    Ok((sel.nodes, sel.warnings))
}

/// Seeds a trial draws from the master seed, in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub trial: usize,
    pub dataset: u64,
    pub split: u64,
    pub model: u64,
    pub random: u64,
}

impl TrialSeeds {
    pub fn derive(master: u64, trial: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        rng.set_stream(trial as u64);
        TrialSeeds {
            trial,
            dataset: rng.random(),
            split: rng.random(),
            model: rng.random(),
            random: rng.random(),
        }
    }
}

/// Everything about a trial that does not depend on the swept parameters.
pub struct PreparedTrial {
    pub seeds: TrialSeeds,
    pub data: Arc<Dataset>,
    pub scores: Arc<GraphScores>,
    pub split: SplitSpec,
    pub model: GcnModel,
    prop: Propagator,
    clean_logits: Array2<f64>,
    pub importance: Vec<f64>,
    pub mask: Vec<usize>,
    pub max_degree: usize,
    pub budget: usize,
}

/// Importance vector whose top coordinates and signs define `ε`.
pub fn importance_vector(
    source: &EpsilonSource,
    model: &GcnModel,
    data: &Dataset,
) -> Result<Vec<f64>> {
    let imp = match source {
        EpsilonSource::Gradient => {
            let grad = feature_gradient(model, &data.graph, &data.x, &data.y, LossKind::Ce)?;
            grad.sum_axis(ndarray::Axis(0)).to_vec()
        }
        EpsilonSource::Disclosed => {
            let d = data
                .disclosed
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("dataset has no disclosed features".into()))?;
            let ones = data.y.iter().filter(|&&v| v == 1).count();
            // push the majority class toward the other one
            let sign = if 2 * ones >= data.y.len() { -1.0 } else { 1.0 };
            let mut imp = vec![0.0; d.w.len()];
            for &j in &d.important {
                imp[j] = sign * d.w[j];
            }
            imp
        }
        EpsilonSource::File { path } => io::read_vector(path)?,
    };
    if imp.len() != data.x.dim() {
        return Err(Error::Shape(format!(
            "importance has {} entries for {} features",
            imp.len(),
            data.x.dim()
        )));
    }
    Ok(imp)
}

/// `ε` for one sweep point.
pub fn epsilon_for(
    source: &EpsilonSource,
    importance: &[f64],
    j_frac: f64,
    lambda: f64,
) -> Result<Epsilon> {
    match source {
        EpsilonSource::Disclosed => {
            let j = importance.iter().filter(|&&v| v != 0.0).count();
            build_epsilon_top(importance, j, lambda)
        }
        _ => build_epsilon(importance, j_frac, lambda),
    }
}

/// Shared data for trials that reuse one dataset.
struct Shared {
    data: Arc<Dataset>,
    scores: Arc<GraphScores>,
}

fn shared_dataset(cfg: &ExperimentConfig) -> Result<Option<Shared>> {
    let data = match &cfg.dataset {
        DatasetSource::Files {
            graph,
            features,
            labels,
        } => Dataset::load(graph, features, labels)?,
        DatasetSource::Synth {
            fresh_per_trial: true,
            ..
        } => return Ok(None),
        DatasetSource::Synth { spec, .. } => Dataset::synthetic(spec)?,
    };
    let data = Arc::new(data);
    let scores = Arc::new(GraphScores::new(Arc::new(data.graph.clone())));
    Ok(Some(Shared { data, scores }))
}

fn prepare_trial(
    cfg: &ExperimentConfig,
    shared: Option<&Shared>,
    trial: usize,
) -> Result<PreparedTrial> {
    let seeds = TrialSeeds::derive(cfg.seed, trial);
    let (data, scores) = match (shared, &cfg.dataset) {
        (Some(s), _) => (Arc::clone(&s.data), Arc::clone(&s.scores)),
        (None, DatasetSource::Synth { spec, .. }) => {
            let spec = SynthSpec {
                seed: seeds.dataset,
                ..spec.clone()
            };
            let data = Arc::new(Dataset::synthetic(&spec)?);
            let scores = Arc::new(GraphScores::new(Arc::new(data.graph.clone())));
            (data, scores)
        }
        (None, DatasetSource::Files { .. }) => unreachable!("file datasets are always shared"),
    };
    let split = SplitSpec::standard(data.n(), seeds.split)?;
    let model_cfg = GcnConfig {
        seed: seeds.model,
        ..cfg.model.clone()
    };
    let model = train(&data.graph, &data.x, &data.y, &split, &model_cfg)?;
    let prop = model.propagator(&data.graph);
    let clean_logits = model.forward_with(&prop, data.x.view())?;
    let importance = importance_vector(&cfg.epsilon, &model, &data)?;
    let mask = if cfg.eval_all_nodes {
        (0..data.n()).collect()
    } else {
        split.test.clone()
    };
    let max_degree = degree_threshold(&data.graph, cfg.threshold_percent)?;
    let budget = budget_for(cfg.r_frac, data.n());
    Ok(PreparedTrial {
        seeds,
        data,
        scores,
        split,
        model,
        prop,
        clean_logits,
        importance,
        mask,
        max_degree,
        budget,
    })
}

/// One strategy's outcome in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub strategy: Strategy,
    pub metrics: AttackMetrics,
    pub selected: usize,
    pub warnings: Vec<String>,
}

impl PreparedTrial {
    pub fn evaluate(
        &self,
        cfg: &ExperimentConfig,
        strategy: Strategy,
        p: PointParams,
    ) -> Result<TrialOutcome> {
        let c = SelectionConstraints {
            budget: self.budget,
            max_degree: self.max_degree,
            hops: cfg.hops,
        };
        let (nodes, warnings) = select_nodes(
            strategy,
            &self.scores,
            &c,
            p.steps,
            cfg.topl,
            self.seeds.random,
        )?;
        let eps = epsilon_for(&cfg.epsilon, &self.importance, p.j_frac, p.lambda)?;
        let metrics = evaluate_attack_with(
            &self.model,
            &self.prop,
            &self.clean_logits,
            &self.data.x,
            &self.data.y,
            &nodes,
            &eps,
            &self.mask,
        )?;
        Ok(TrialOutcome {
            strategy,
            metrics,
            selected: nodes.len(),
            warnings,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: Strategy,
    /// Mean attacked accuracy in percent.
    pub mean_acc: f64,
    pub sem_acc: f64,
    pub mean_ce_loss: f64,
    pub mean_cw_loss: f64,
    pub mean_selected: f64,
    pub per_trial_acc: Vec<f64>,
    pub per_trial_ce_loss: Vec<f64>,
    pub per_trial_cw_loss: Vec<f64>,
    pub per_trial_selected: Vec<usize>,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: SweepParam,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub sweep: Option<SweepPoint>,
    pub trial_seeds: Vec<TrialSeeds>,
    pub mean_clean_acc: f64,
    pub sem_clean_acc: f64,
    pub results: Vec<StrategyResult>,
}

impl Report {
    pub fn result(&self, strategy: Strategy) -> Option<&StrategyResult> {
        self.results.iter().find(|r| r.strategy == strategy)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard error of the mean with the sample standard deviation; 0 for a
/// single value.
pub fn sem(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

fn aggregate(
    cfg: &ExperimentConfig,
    sweep: Option<SweepPoint>,
    trials: &[PreparedTrial],
    outcomes: &[Vec<TrialOutcome>],
) -> Report {
    let clean: Vec<f64> = outcomes
        .iter()
        .map(|o| 100.0 * o[0].metrics.acc_clean)
        .collect();
    let results = cfg
        .strategies
        .iter()
        .enumerate()
        .map(|(s, &strategy)| {
            let col: Vec<&TrialOutcome> = outcomes.iter().map(|o| &o[s]).collect();
            let acc: Vec<f64> = col.iter().map(|o| 100.0 * o.metrics.acc_attacked).collect();
            let ce: Vec<f64> = col.iter().map(|o| o.metrics.loss_attacked).collect();
            let cw: Vec<f64> = col.iter().map(|o| o.metrics.cw_attacked).collect();
            let sel: Vec<usize> = col.iter().map(|o| o.selected).collect();
            StrategyResult {
                strategy,
                mean_acc: mean(&acc),
                sem_acc: sem(&acc),
                mean_ce_loss: mean(&ce),
                mean_cw_loss: mean(&cw),
                mean_selected: sel.iter().sum::<usize>() as f64 / sel.len() as f64,
                per_trial_acc: acc,
                per_trial_ce_loss: ce,
                per_trial_cw_loss: cw,
                per_trial_selected: sel,
                warnings: col.iter().map(|o| o.warnings.len()).sum(),
            }
        })
        .collect();
    Report {
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        sweep,
        trial_seeds: trials.iter().map(|t| t.seeds).collect(),
        mean_clean_acc: mean(&clean),
        sem_clean_acc: sem(&clean),
        results,
    }
}

/// Prepares every trial of `cfg` (in parallel).
pub fn prepare_trials(cfg: &ExperimentConfig) -> Result<Vec<PreparedTrial>> {
    cfg.validate()?;
    let shared = shared_dataset(cfg)?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            prepare_trial(cfg, shared.as_ref(), t).map_err(|e| Error::Trial {
                trial: t,
                source: Box::new(e),
            })
        })
        .collect()
}

fn evaluate_point(
    cfg: &ExperimentConfig,
    trials: &[PreparedTrial],
    p: PointParams,
) -> Result<Vec<Vec<TrialOutcome>>> {
    trials
        .par_iter()
        .map(|t| {
            cfg.strategies
                .iter()
                .map(|&s| t.evaluate(cfg, s, p))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Full protocol: every trial, every strategy, aggregated.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let trials = prepare_trials(cfg)?;
    let p = PointParams {
        lambda: cfg.lambda,
        j_frac: cfg.j_frac,
        steps: cfg.steps,
    };
    let outcomes = evaluate_point(cfg, &trials, p)?;
    Ok(aggregate(cfg, None, &trials, &outcomes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Lambda,
    JFrac,
    Steps,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::JFrac => "j-frac",
            SweepParam::Steps => "L",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepParam::Lambda),
            "j-frac" | "j_frac" => Ok(SweepParam::JFrac),
            "L" | "steps" => Ok(SweepParam::Steps),
            _ => Err(Error::InvalidInput(format!(
                "unknown sweep parameter {s:?}; expected lambda, j-frac or L"
            ))),
        }
    }
}

/// One report per value; trials (split, model, `ε` importance) are shared
/// across values.
pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<Report>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one value".into()));
    }
    let mut points = Vec::with_capacity(values.len());
    for &v in values {
        let mut point_cfg = cfg.clone();
        match param {
            SweepParam::Lambda => point_cfg.lambda = v,
            SweepParam::JFrac => point_cfg.j_frac = v,
            SweepParam::Steps => {
                if !(v >= 1.0 && v.fract() == 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "walk length {v} is not a positive integer"
                    )));
                }
                point_cfg.steps = v as usize;
            }
        }
        point_cfg.validate()?;
        points.push(point_cfg);
    }
    let trials = prepare_trials(cfg)?;
    points
        .into_iter()
        .zip(values)
        .map(|(pc, &v)| {
            let p = PointParams {
                lambda: pc.lambda,
                j_frac: pc.j_frac,
                steps: pc.steps,
            };
            let outcomes = evaluate_point(&pc, &trials, p)?;
            Ok(aggregate(
                &pc,
                Some(SweepPoint {
                    parameter: param,
                    value: v,
                }),
                &trials,
                &outcomes,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::InvalidInput(format!("unknown format {s:?}"))),
        }
    }
}

const CSV_HEADER: [&str; 5] = [
    "strategy",
    "mean_acc",
    "sem_acc",
    "mean_ce_loss",
    "mean_cw_loss",
];

pub fn report_csv(r: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for s in &r.results {
        w.write_record([
            s.strategy.to_string(),
            s.mean_acc.to_string(),
            s.sem_acc.to_string(),
            s.mean_ce_loss.to_string(),
            s.mean_cw_loss.to_string(),
        ])?;
    }
    finish_csv(w)
}

/// Long-format CSV with one row per sweep value and strategy.
pub fn sweep_csv(reports: &[Report]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["parameter", "value"];
    header.extend(CSV_HEADER);
    w.write_record(&header)?;
    for r in reports {
        let (param, value) = r
            .sweep
            .as_ref()
            .map(|p| (p.parameter.as_str().to_string(), p.value.to_string()))
            .unwrap_or_default();
        for s in &r.results {
            w.write_record([
                param.clone(),
                value.clone(),
                s.strategy.to_string(),
                s.mean_acc.to_string(),
                s.sem_acc.to_string(),
                s.mean_ce_loss.to_string(),
                s.mean_cw_loss.to_string(),
            ])?;
        }
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_report(r: &Report, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    match format {
        ReportFormat::Json => io::write_json(path, r),
        ReportFormat::Csv => io::write_string(path, &report_csv(r)?),
    }
}

pub fn emit_sweep(reports: &[Report], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    match format {
        ReportFormat::Json => io::write_json(path, &reports),
        ReportFormat::Csv => io::write_string(path, &sweep_csv(reports)?),
    }
}

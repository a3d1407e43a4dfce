use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rwcs_core::experiment::{
    budget_for, emit_report, emit_sweep, epsilon_for, importance_vector, report_csv,
    run_experiment, select_nodes, sweep, sweep_csv, Dataset, DatasetSource, EpsilonSource,
    ExperimentConfig, GraphScores, ReportFormat, Strategy, SweepParam,
};
use rwcs_core::gcn::{accuracy, evaluate_attack, train, SplitSpec};
use rwcs_core::io;
use rwcs_core::selector::degree_threshold;
use rwcs_core::synth::{generate, SynthSpec};
use rwcs_core::theory::{run_oracle, VulnEvaluator, MAX_POOL};
use rwcs_core::{Error, GcnConfig, GcnModel, NodeSet, Normalization, SelectionConstraints};

#[derive(Parser)]
#[command(
    name = "rwcs",
    version,
    about = "Black-box node selection for feature-perturbation attacks on GCNs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a preferential-attachment dataset.
    Synth(SynthArgs),
    /// Train a GCN on a 60/20/20 split and save it as JSON.
    Train(TrainArgs),
    /// Select attack nodes with one strategy.
    Select(SelectArgs),
    /// Select, perturb and evaluate once against a saved model.
    Attack(AttackArgs),
    /// Run the full multi-trial protocol.
    Experiment(ExperimentArgs),
    /// Run the protocol over a list of values for one parameter.
    Sweep(SweepArgs),
    /// Enumerate vulnerable sets over a small candidate pool.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Symmetric,
    Mean,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Symmetric => Normalization::Symmetric,
            NormArg::Mean => Normalization::Mean,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Edge list, one `u v` pair per line.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Feature matrix as CSV, one row per node.
    #[arg(long)]
    features: Option<PathBuf>,
    /// One integer label per line.
    #[arg(long)]
    labels: Option<PathBuf>,
}

impl DataArgs {
    fn any(&self) -> bool {
        self.graph.is_some() || self.features.is_some() || self.labels.is_some()
    }

    fn source(&self) -> Result<DatasetSource> {
        match (&self.graph, &self.features, &self.labels) {
            (Some(g), Some(f), Some(l)) => Ok(DatasetSource::Files {
                graph: g.clone(),
                features: f.clone(),
                labels: l.clone(),
            }),
            _ => Err(invalid(
                "--graph, --features and --labels must be given together",
            )),
        }
    }

    fn load(&self) -> Result<Dataset> {
        match self.source()? {
            DatasetSource::Files {
                graph,
                features,
                labels,
            } => Ok(Dataset::load(&graph, &features, &labels)?),
            DatasetSource::Synth { .. } => unreachable!(),
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, value_enum)]
    normalization: Option<NormArg>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
}

impl ModelArgs {
    fn apply(&self, cfg: &mut GcnConfig) {
        if let Some(v) = self.layers {
            cfg.layers = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden = v;
        }
        if let Some(v) = self.normalization {
            cfg.normalization = v.into();
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.weight_decay {
            cfg.weight_decay = v;
        }
        if let Some(v) = self.patience {
            cfg.patience = v;
        }
    }
}

#[derive(Args)]
struct WalkArgs {
    /// Random-walk length.
    #[arg(long = "L", value_name = "L")]
    steps: Option<usize>,
    /// Hop radius excluded around each greedy pick.
    #[arg(long = "k", value_name = "K")]
    hops: Option<usize>,
    /// Entries kept per row when binarizing the walk matrix.
    #[arg(long)]
    topl: Option<usize>,
    /// Budget as a fraction of the node count (rounded up).
    #[arg(long)]
    r_frac: Option<f64>,
    /// Percent of highest-degree nodes that fix the degree cap.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct OutArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory receiving graph.txt, features.csv, labels.txt and synth.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3000)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    attach: usize,
    #[arg(long = "dim", default_value_t = 10)]
    d_features: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    w_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    feature_scale: f64,
    #[arg(long, default_value_t = 2)]
    disclosed: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Seeds both the split and the initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_parser = parse_strategy)]
    method: Strategy,
    #[command(flatten)]
    walk: WalkArgs,
    /// Seed for the random strategy.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_parser = parse_strategy)]
    method: Strategy,
    #[command(flatten)]
    walk: WalkArgs,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.02)]
    j_frac: f64,
    /// `gradient`, or a file holding one importance value per feature.
    #[arg(long, default_value = "gradient")]
    epsilon: String,
    /// Split seed (use the one given to `train`) and random-strategy seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate on every node instead of the test split.
    #[arg(long)]
    all_nodes: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProtocolArgs {
    /// Full configuration as JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Use a synthetic dataset of this many nodes, fresh per trial.
    #[arg(long)]
    synth_n: Option<usize>,
    #[arg(long)]
    feature_scale: Option<f64>,
    /// Comma-separated strategies.
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
    method: Vec<Strategy>,
    #[command(flatten)]
    walk: WalkArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    j_frac: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `gradient`, `disclosed`, or an importance-vector file.
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    all_nodes: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// `lambda`, `j-frac` or `L`.
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[command(flatten)]
    protocol: ProtocolArgs,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated candidate nodes (at most 15).
    #[arg(long, value_delimiter = ',', required = true)]
    pool: Vec<usize>,
    /// Comma-separated target nodes; every node when absent.
    #[arg(long, value_delimiter = ',')]
    targets: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.02)]
    j_frac: f64,
    #[arg(long, default_value = "gradient")]
    epsilon: String,
    /// Attack-set size for the homophily and perturbation statistics.
    #[arg(long, default_value_t = 2)]
    r: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    Strategy::from_str(s).map_err(|e| e.to_string())
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidInput(msg.into()).into()
}

fn parse_epsilon(s: &str) -> EpsilonSource {
    match s {
        "gradient" => EpsilonSource::Gradient,
        "disclosed" => EpsilonSource::Disclosed,
        path => EpsilonSource::File { path: path.into() },
    }
}

/// Writes to stdout, treating a closed pipe as success.
fn print_text(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{}", text.trim_end()).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => io::write_string(p, text)?,
        None => print_text(text)?,
    }
    Ok(())
}

fn constraints(
    walk: &WalkArgs,
    g: &rwcs_core::Graph,
) -> Result<(SelectionConstraints, usize, usize)> {
    let r_frac = walk.r_frac.unwrap_or(0.01);
    if !(r_frac > 0.0 && r_frac <= 1.0) {
        return Err(invalid(format!(
            "budget fraction must lie in (0, 1], got {r_frac}"
        )));
    }
    let c = SelectionConstraints {
        budget: budget_for(r_frac, g.n()),
        max_degree: degree_threshold(g, walk.threshold.unwrap_or(10.0))?,
        hops: walk.hops.unwrap_or(1),
    };
    Ok((c, walk.steps.unwrap_or(4), walk.topl.unwrap_or(30)))
}

fn load_model(path: &Path) -> Result<GcnModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(GcnModel::from_json(&text)?)
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n: a.n,
        attach: a.attach,
        d_features: a.d_features,
        seed: a.seed,
        w_scale: a.w_scale,
        feature_scale: a.feature_scale,
        disclosed: a.disclosed,
        ..SynthSpec::default()
    };
    spec.validate()?;
    let data = generate(&spec)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    data.save(&spec, &a.out)?;
    log::info!("wrote {} nodes to {}", spec.n, a.out.display());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let data = a.data.load()?;
    let mut cfg = GcnConfig {
        seed: a.seed,
        ..GcnConfig::default()
    };
    a.model.apply(&mut cfg);
    cfg.validate()?;
    let split = SplitSpec::standard(data.n(), a.seed)?;
    let model = train(&data.graph, &data.x, &data.y, &split, &cfg)?;
    io::write_string(&a.out, &model.to_json()?)?;
    let h = model.forward(&data.graph, &data.x)?;
    let summary = json!({
        "train_accuracy": accuracy(h.view(), &data.y, &split.train)?,
        "val_accuracy": accuracy(h.view(), &data.y, &split.val)?,
        "test_accuracy": accuracy(h.view(), &data.y, &split.test)?,
        "record": model.trained_on,
    });
    print_text(&serde_json::to_string_pretty(&summary)?)
}

fn cmd_select(a: SelectArgs) -> Result<()> {
    let g = rwcs_core::Graph::load_edge_list(&a.graph)?;
    let (c, steps, topl) = constraints(&a.walk, &g)?;
    let scores = GraphScores::new(Arc::new(g));
    let (nodes, warnings) = select_nodes(a.method, &scores, &c, steps, topl, a.seed)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let text = match a.out.format {
        Format::Json => serde_json::to_string_pretty(&json!({
            "method": a.method,
            "budget": c.budget,
            "max_degree": c.max_degree,
            "nodes": nodes.as_slice(),
            "warnings": warnings,
        }))?,
        Format::Csv => {
            let mut s = String::from("node\n");
            for v in nodes.iter() {
                s.push_str(&format!("{v}\n"));
            }
            s
        }
    };
    write_out(a.out.out.as_deref(), &text)
}

fn cmd_attack(a: AttackArgs) -> Result<()> {
    let data = a.data.load()?;
    let model = load_model(&a.model)?;
    let (c, steps, topl) = constraints(&a.walk, &data.graph)?;
    let source = parse_epsilon(&a.epsilon);
    if source == EpsilonSource::Disclosed {
        return Err(invalid(
            "single attacks take `gradient` or an importance file",
        ));
    }
    let importance = importance_vector(&source, &model, &data)?;
    let e = epsilon_for(&source, &importance, a.j_frac, a.lambda)?;
    let scores = GraphScores::new(Arc::new(data.graph.clone()));
    let (s, warnings) = select_nodes(a.method, &scores, &c, steps, topl, a.seed)?;
    let mask: Vec<usize> = if a.all_nodes {
        (0..data.n()).collect()
    } else {
        SplitSpec::standard(data.n(), a.seed)?.test
    };
    let metrics = evaluate_attack(&model, &data.graph, &data.x, &data.y, &s, &e, &mask)?;
    let text = serde_json::to_string_pretty(&json!({
        "method": a.method,
        "selected": s.as_slice(),
        "epsilon": e.values(),
        "metrics": metrics,
        "warnings": warnings,
    }))?;
    write_out(a.out.as_deref(), &text)
}

fn protocol_config(p: &ProtocolArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &p.config {
        Some(path) => io::read_json::<ExperimentConfig>(path)?,
        None if p.data.any() => ExperimentConfig::new(p.data.source()?),
        None => match p.synth_n {
            Some(n) => ExperimentConfig::new(DatasetSource::Synth {
                spec: SynthSpec {
                    n,
                    ..SynthSpec::default()
                },
                fresh_per_trial: true,
            }),
            None => {
                return Err(invalid(
                    "give --config, --synth-n, or --graph/--features/--labels",
                ))
            }
        },
    };
    if p.config.is_some() && p.data.any() {
        cfg.dataset = p.data.source()?;
    }
    if let DatasetSource::Synth { spec, .. } = &mut cfg.dataset {
        if let Some(n) = p.synth_n {
            spec.n = n;
        }
        if let Some(s) = p.feature_scale {
            spec.feature_scale = s;
        }
    }
    if !p.method.is_empty() {
        cfg.strategies = p.method.clone();
    }
    let w = &p.walk;
    if let Some(v) = w.steps {
        cfg.steps = v;
    }
    if let Some(v) = w.hops {
        cfg.hops = v;
    }
    if let Some(v) = w.topl {
        cfg.topl = v;
    }
    if let Some(v) = w.r_frac {
        cfg.r_frac = v;
    }
    if let Some(v) = w.threshold {
        cfg.threshold_percent = v;
    }
    p.model.apply(&mut cfg.model);
    if let Some(v) = p.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = p.j_frac {
        cfg.j_frac = v;
    }
    if let Some(v) = p.trials {
        cfg.trials = v;
    }
    if let Some(v) = p.seed {
        cfg.seed = v;
    }
    if let Some(e) = &p.epsilon {
        cfg.epsilon = parse_epsilon(e);
    }
    if p.all_nodes {
        cfg.eval_all_nodes = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let cfg = protocol_config(&a.protocol)?;
    let report = run_experiment(&cfg)?;
    let out = &a.protocol.out;
    match &out.out {
        Some(path) => emit_report(&report, out.format.into(), path)?,
        None => match out.format {
            Format::Json => print_text(&serde_json::to_string_pretty(&report)?)?,
            Format::Csv => print_text(&report_csv(&report)?)?,
        },
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let param = SweepParam::from_str(&a.param)?;
    let cfg = protocol_config(&a.protocol)?;
    let reports = sweep(&cfg, param, &a.values)?;
    let out = &a.protocol.out;
    match &out.out {
        Some(path) => emit_sweep(&reports, out.format.into(), path)?,
        None => match out.format {
            Format::Json => print_text(&serde_json::to_string_pretty(&reports)?)?,
            Format::Csv => print_text(&sweep_csv(&reports)?)?,
        },
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    if a.pool.len() > MAX_POOL {
        return Err(invalid(format!(
            "pool has {} nodes; enumeration is limited to {MAX_POOL}",
            a.pool.len()
        )));
    }
    let data = a.data.load()?;
    let model = load_model(&a.model)?;
    let source = parse_epsilon(&a.epsilon);
    if source == EpsilonSource::Disclosed {
        return Err(invalid("the oracle takes `gradient` or an importance file"));
    }
    let importance = importance_vector(&source, &model, &data)?;
    let e = epsilon_for(&source, &importance, a.j_frac, a.lambda)?;
    let n = data.n();
    let pool = NodeSet::new(a.pool.clone(), n)?;
    let targets = if a.targets.is_empty() {
        NodeSet::new((0..n).collect(), n)?
    } else {
        NodeSet::new(a.targets.clone(), n)?
    };
    let ev = VulnEvaluator::new(&model, &data.graph, &data.x, &data.y, &e)?;
    let report = run_oracle(&ev, &targets, &pool, a.r)?;
    write_out(a.out.as_deref(), &serde_json::to_string_pretty(&report)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Select(a) => cmd_select(a),
        Command::Attack(a) => cmd_attack(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let validation = err
        .chain()
        .any(|e| e.downcast_ref::<Error>().is_some_and(Error::is_validation));
    if validation {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

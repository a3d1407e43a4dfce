//! Synthetic benchmark: preferential-attachment graphs with half-normal
//! features and labels `y_i = [((A+I) X W)_i > 0]`.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::io;
use crate::perturb::FeatureMatrix;

/// W redraws allowed after the first draw before giving up.
pub const MAX_REGENERATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub attach: usize,
    pub d_features: usize,
    pub seed: u64,
    pub w_scale: f64,
    /// Standard deviation of the normal behind each feature.
    #[serde(default = "one")]
    pub feature_scale: f64,
    /// Number of largest-|W| coordinates disclosed to the attacker.
    pub disclosed: usize,
    /// Shift each drawn W to zero sum. Features are nonnegative, so an
    /// uncentered W mostly labels by degree and by the sign of `ΣW`.
    #[serde(default = "yes")]
    pub center_w: bool,
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 3000,
            attach: 2,
            d_features: 10,
            seed: 0,
            w_scale: 1.0,
            feature_scale: 1.0,
            disclosed: 2,
            center_w: true,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.attach == 0 || self.n <= self.attach {
            return Err(Error::InvalidInput(format!(
                "need n > attach >= 1, got n = {}, attach = {}",
                self.n, self.attach
            )));
        }
        if self.d_features == 0 {
            return Err(Error::InvalidInput("need at least one feature".into()));
        }
        if !(self.w_scale.is_finite() && self.w_scale > 0.0) {
            return Err(Error::InvalidInput(format!(
                "weight scale must be positive, got {}",
                self.w_scale
            )));
        }
        if !(self.feature_scale.is_finite() && self.feature_scale > 0.0) {
            return Err(Error::InvalidInput(format!(
                "feature scale must be positive, got {}",
                self.feature_scale
            )));
        }
        if self.disclosed == 0 || self.disclosed > self.d_features {
            return Err(Error::InvalidInput(format!(
                "cannot disclose {} of {} features",
                self.disclosed, self.d_features
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub graph: Graph,
    pub x: FeatureMatrix,
    pub y: Vec<usize>,
    pub w: Vec<f64>,
    /// Disclosed coordinates, largest |W| first.
    pub important: Vec<usize>,
    pub attempts: usize,
}

/// What the sidecar JSON records next to the data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSidecar {
    pub spec: SynthSpec,
    pub w: Vec<f64>,
    pub important: Vec<usize>,
    pub attempts: usize,
    pub positive_fraction: f64,
}

/// Preferential attachment seeded with a clique on the first `attach`
/// nodes; node `attach` joins all of them and every later node picks
/// `attach` distinct targets with probability proportional to degree.
/// Produces `C(attach, 2) + attach · (n − attach)` edges.
pub fn barabasi_albert(spec: &SynthSpec) -> Result<Graph> {
    spec.validate()?;
    barabasi_albert_with(
        spec.n,
        spec.attach,
        &mut ChaCha8Rng::seed_from_u64(spec.seed),
    )
}

pub fn barabasi_albert_with<R: Rng>(n: usize, attach: usize, rng: &mut R) -> Result<Graph> {
    if attach == 0 || n <= attach {
        return Err(Error::InvalidInput(format!(
            "need n > attach >= 1, got n = {n}, attach = {attach}"
        )));
    }
    let mut edges = Vec::with_capacity(attach * (attach - 1) / 2 + attach * (n - attach));
    for u in 0..attach {
        for v in u + 1..attach {
            edges.push((u, v));
        }
    }
    for u in 0..attach {
        edges.push((u, attach));
    }
    let mut repeated: Vec<usize> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    let mut targets = Vec::with_capacity(attach);
    for t in attach + 1..n {
        targets.clear();
        while targets.len() < attach {
            let c = repeated[rng.random_range(0..repeated.len())];
            if !targets.contains(&c) {
                targets.push(c);
            }
        }
        for &c in &targets {
            edges.push((c, t));
            repeated.extend([c, t]);
        }
    }
    Graph::from_edges(n, edges)
}

/// `n × d` matrix of `|σz|`, `z ~ N(0, 1)`.
pub fn half_normal_features<R: Rng>(
    n: usize,
    d: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<FeatureMatrix> {
    FeatureMatrix::new(Array2::from_shape_simple_fn((n, d), || {
        let z: f64 = StandardNormal.sample(rng);
        (sigma * z).abs()
    }))
}

/// `y_i = 1` iff `((A+I) X W)_i > 0`, i.e. `sigmoid(·) > 0.5`.
pub fn labels_from(g: &Graph, x: &FeatureMatrix, w: &[f64]) -> Result<Vec<usize>> {
    if x.n() != g.n() || x.dim() != w.len() {
        return Err(Error::Shape(format!(
            "features are {}×{}, graph has {} nodes, W has {} entries",
            x.n(),
            x.dim(),
            g.n(),
            w.len()
        )));
    }
    let xw = x.as_array().dot(&Array1::from(w.to_vec()));
    Ok((0..g.n())
        .map(|i| {
            let s = xw[i] + g.neighbors(i).iter().map(|&j| xw[j]).sum::<f64>();
            usize::from(s > 0.0)
        })
        .collect())
}

/// Indices of the `k` largest |W| entries, ties to the lower index.
pub fn top_abs(w: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Features and labels for `g`, drawing `W ~ N(0, w_scale²)` (centered
/// when `spec.center_w`).
pub fn synth_features_labels(g: &Graph, spec: &SynthSpec) -> Result<SynthData> {
    let normal = Normal::new(0.0, spec.w_scale)
        .map_err(|e| Error::InvalidInput(format!("weight scale: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_f00d);
    synth_features_labels_with(g, spec, &mut rng, |rng, d| {
        let mut w: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
        if spec.center_w {
            let mean = w.iter().sum::<f64>() / d as f64;
            w.iter_mut().for_each(|v| *v -= mean);
        }
        w
    })
}

/// As [`synth_features_labels`] with a caller-supplied W generator. W is
/// redrawn while the labels are all one class, at most
/// [`MAX_REGENERATIONS`] times.
pub fn synth_features_labels_with<R, F>(
    g: &Graph,
    spec: &SynthSpec,
    rng: &mut R,
    mut draw_w: F,
) -> Result<SynthData>
where
    R: Rng,
    F: FnMut(&mut R, usize) -> Vec<f64>,
{
    spec.validate()?;
    let x = half_normal_features(g.n(), spec.d_features, spec.feature_scale, rng)?;
    for attempt in 1..=MAX_REGENERATIONS + 1 {
        let w = draw_w(rng, spec.d_features);
        if w.len() != spec.d_features || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "W must hold {} finite values",
                spec.d_features
            )));
        }
        let y = labels_from(g, &x, &w)?;
        let ones = y.iter().filter(|&&v| v == 1).count();
        if ones > 0 && ones < y.len() {
            let important = top_abs(&w, spec.disclosed);
            return Ok(SynthData {
                graph: g.clone(),
                x,
                y,
                w,
                important,
                attempts: attempt,
            });
        }
        log::debug!("attempt {attempt}: labels are all one class, redrawing W");
    }
    Err(Error::Degenerate(format!(
        "labels stayed single-class after {} draws of W",
        MAX_REGENERATIONS + 1
    )))
}

/// Graph, features and labels from one seed.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    let g = barabasi_albert(spec)?;
    synth_features_labels(&g, spec)
}

impl SynthData {
    pub fn sidecar(&self, spec: &SynthSpec) -> SynthSidecar {
        SynthSidecar {
            spec: spec.clone(),
            w: self.w.clone(),
            important: self.important.clone(),
            attempts: self.attempts,
            positive_fraction: self.y.iter().sum::<usize>() as f64 / self.y.len() as f64,
        }
    }

    /// Writes `graph.txt`, `features.csv`, `labels.txt` and `synth.json`.
    pub fn save(&self, spec: &SynthSpec, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.graph.save_edge_list(dir.join("graph.txt"))?;
        io::write_features(dir.join("features.csv"), &self.x)?;
        io::write_labels(dir.join("labels.txt"), &self.y)?;
        io::write_json(dir.join("synth.json"), &self.sidecar(spec))
    }
}

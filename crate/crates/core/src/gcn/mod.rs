//! Full-batch graph convolutional network used as the victim model.
//!
//! Layer `l` computes `H⁽ˡ⁾ = σ(Â H⁽ˡ⁻¹⁾ W_l + b_l)` where `Â` is the
//! self-inclusive adjacency normalized either by `1/d_i` (mean) or by
//! `1/√(d_i d_j)` (symmetric). Hidden layers use ReLU, the output layer is
//! linear. Gradients are hand-derived reverse mode.

mod eval;
mod loss;
mod train;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::perturb::FeatureMatrix;

pub use eval::{
    evaluate_attack, evaluate_attack_with, feature_gradient, feature_gradient_masked,
    first_order_delta, first_order_deltas, output_pullback, AttackMetrics,
};
pub use loss::{accuracy, cross_entropy_loss, cw_loss, loss_and_grad, predict, LossKind};
pub use train::{train, SplitSpec, TrainRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `α_ij = 1/d_i`
    Mean,
    /// `α_ij = 1/√(d_i d_j)`
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnConfig {
    pub layers: usize,
    pub hidden: usize,
    pub normalization: Normalization,
    pub bias: bool,
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    /// Early-stopping patience on validation cross-entropy; 0 disables it.
    pub patience: usize,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            layers: 2,
            hidden: 32,
            normalization: Normalization::Symmetric,
            bias: true,
            learning_rate: 0.01,
            epochs: 200,
            weight_decay: 5e-4,
            patience: 20,
            seed: 0,
        }
    }
}

impl GcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 {
            return Err(Error::InvalidInput(
                "GCN needs at least one layer and a hidden width of at least one".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::InvalidInput(
                "learning rate must be positive and weight decay non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Sparse normalized propagation matrix `Â` (self loops included).
#[derive(Debug, Clone)]
pub struct Propagator {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    normalization: Normalization,
}

impl Propagator {
    pub fn new(g: &Graph, normalization: Normalization) -> Self {
        let n = g.n();
        let mut offsets = vec![0];
        let mut cols = Vec::with_capacity(n + 2 * g.edge_count());
        let mut vals = Vec::with_capacity(n + 2 * g.edge_count());
        for i in 0..n {
            let di = g.degree(i) as f64;
            let nbrs = g.neighbors(i);
            let split = nbrs.partition_point(|&j| j < i);
            let row = nbrs[..split]
                .iter()
                .copied()
                .chain(std::iter::once(i))
                .chain(nbrs[split..].iter().copied());
            for j in row {
                cols.push(j);
                vals.push(match normalization {
                    Normalization::Mean => 1.0 / di,
                    Normalization::Symmetric => 1.0 / (di * g.degree(j) as f64).sqrt(),
                });
            }
            offsets.push(cols.len());
        }
        Propagator {
            offsets,
            cols,
            vals,
            normalization,
        }
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// `Â h`
    pub fn apply(&self, h: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(h.raw_dim());
        for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            for p in self.offsets[i]..self.offsets[i + 1] {
                row.scaled_add(self.vals[p], &h.row(self.cols[p]));
            }
        }
        out
    }

    /// `Âᵀ h`
    pub fn apply_transpose(&self, h: ArrayView2<f64>) -> Array2<f64> {
        if self.normalization == Normalization::Symmetric {
            return self.apply(h);
        }
        let mut out = Array2::zeros(h.raw_dim());
        for i in 0..self.n() {
            let src = h.row(i);
            for p in self.offsets[i]..self.offsets[i + 1] {
                out.row_mut(self.cols[p]).scaled_add(self.vals[p], &src);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `in × out`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub layers: Vec<Layer>,
    pub config: GcnConfig,
    pub trained_on: Option<TrainRecord>,
}

/// Gradients for every layer's parameters.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

struct LayerCache {
    input: Array2<f64>,
    /// `Â · input` when the layer propagates before transforming.
    propagated: Option<Array2<f64>>,
    pre_activation: Array2<f64>,
}

pub(crate) struct ForwardCache {
    layers: Vec<LayerCache>,
    pub(crate) logits: Array2<f64>,
}

impl GcnModel {
    /// Glorot-uniform weights and zero biases drawn from `config.seed`.
    pub fn init(input_dim: usize, num_classes: usize, config: &GcnConfig) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 || num_classes == 0 {
            return Err(Error::Shape(
                "input and output widths must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat_n(config.hidden, config.layers - 1));
        dims.push(num_classes);
        let layers = dims
            .windows(2)
            .map(|w| {
                let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    weight: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        rng.random_range(-bound..bound)
                    }),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(GcnModel {
            layers,
            config: config.clone(),
            trained_on: None,
        })
    }

    /// Build from explicit layers; shapes must chain.
    pub fn from_layers(layers: Vec<Layer>, config: GcnConfig) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("model has no layers".into()));
        }
        for (idx, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.ncols() {
                return Err(Error::Shape(format!("layer {idx}: bias width mismatch")));
            }
            if let Some(next) = layers.get(idx + 1) {
                if next.weight.nrows() != l.weight.ncols() {
                    return Err(Error::Shape(format!(
                        "layer {idx} outputs {} but layer {} expects {}",
                        l.weight.ncols(),
                        idx + 1,
                        next.weight.nrows()
                    )));
                }
            }
        }
        let config = GcnConfig {
            layers: layers.len(),
            ..config
        };
        Ok(GcnModel {
            layers,
            config,
            trained_on: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.ncols())
    }

    pub fn propagator(&self, g: &Graph) -> Propagator {
        Propagator::new(g, self.config.normalization)
    }

    fn check_shapes(&self, prop: &Propagator, x: ArrayView2<f64>) -> Result<()> {
        if x.nrows() != prop.n() {
            return Err(Error::Shape(format!(
                "{} feature rows for a graph with {} nodes",
                x.nrows(),
                prop.n()
            )));
        }
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "{} feature columns but the model expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Logits `n × K`.
    pub fn forward(&self, g: &Graph, x: &FeatureMatrix) -> Result<Array2<f64>> {
        self.forward_with(&self.propagator(g), x.view())
    }

    pub fn forward_with(&self, prop: &Propagator, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(prop, x)?.logits)
    }

    pub(crate) fn forward_cached(
        &self,
        prop: &Propagator,
        x: ArrayView2<f64>,
    ) -> Result<ForwardCache> {
        self.check_shapes(prop, x)?;
        let last = self.layers.len() - 1;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (idx, layer) in self.layers.iter().enumerate() {
            // Propagate on the narrower side of the transform.
            let (propagated, mut z) = if layer.weight.nrows() <= layer.weight.ncols() {
                let p = prop.apply(h.view());
                let z = p.dot(&layer.weight);
                (Some(p), z)
            } else {
                (None, prop.apply(h.dot(&layer.weight).view()))
            };
            if self.config.bias {
                z += &layer.bias;
            }
            let out = if idx == last {
                z.clone()
            } else {
                z.mapv(|v| v.max(0.0))
            };
            caches.push(LayerCache {
                input: std::mem::replace(&mut h, out),
                propagated,
                pre_activation: z,
            });
        }
        Ok(ForwardCache {
            layers: caches,
            logits: h,
        })
    }

    /// Reverse pass from `∂L/∂logits`; returns parameter gradients and `∂L/∂X`.
    pub(crate) fn backward(
        &self,
        prop: &Propagator,
        cache: &ForwardCache,
        d_logits: Array2<f64>,
    ) -> (ParamGrads, Array2<f64>) {
        let nl = self.layers.len();
        let mut weights = vec![Array2::zeros((0, 0)); nl];
        let mut biases = vec![Array1::zeros(0); nl];
        let mut d_out = d_logits;
        for idx in (0..nl).rev() {
            let layer = &self.layers[idx];
            let lc = &cache.layers[idx];
            let mut dz = d_out;
            if idx != nl - 1 {
                ndarray::Zip::from(&mut dz)
                    .and(&lc.pre_activation)
                    .for_each(|d, &z| {
                        if z <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            biases[idx] = if self.config.bias {
                dz.sum_axis(Axis(0))
            } else {
                Array1::zeros(dz.ncols())
            };
            d_out = match &lc.propagated {
                Some(p) => {
                    weights[idx] = p.t().dot(&dz);
                    prop.apply_transpose(dz.dot(&layer.weight.t()).view())
                }
                None => {
                    let du = prop.apply_transpose(dz.view());
                    weights[idx] = lc.input.t().dot(&du);
                    du.dot(&layer.weight.t())
                }
            };
        }
        (ParamGrads { weights, biases }, d_out)
    }
}

/// On-disk model format.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    config: GcnConfig,
    layers: Vec<LayerFile>,
    trained_on: Option<TrainRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerFile {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

const MODEL_FORMAT: &str = "rwcs-gcn";
const MODEL_VERSION: u32 = 1;

impl GcnModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            config: self.config.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            trained_on: self.trained_on.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model file {} v{}",
                file.format, file.version
            )));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for lf in file.layers {
            let rows = lf.weight.len();
            let cols = lf.weight.first().map_or(0, Vec::len);
            if lf.weight.iter().any(|r| r.len() != cols) {
                return Err(Error::Shape("ragged weight matrix".into()));
            }
            let weight = Array2::from_shape_vec((rows, cols), lf.weight.concat())
                .map_err(|e| Error::Shape(e.to_string()))?;
            layers.push(Layer {
                weight,
                bias: Array1::from(lf.bias),
            });
        }
        let mut model = GcnModel::from_layers(layers, file.config)?;
        model.trained_on = file.trained_on;
        Ok(model)
    }
}

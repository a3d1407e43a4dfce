//! Adam training with early stopping, and seeded train/validation/test splits.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{accuracy, loss_and_grad, LossKind};
use super::{GcnConfig, GcnModel};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::perturb::FeatureMatrix;

/// Disjoint node index lists covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    /// Shuffled split with `floor(train·n)` training and `floor(val·n)`
    /// validation nodes; the rest are test nodes.
    pub fn random(n: usize, train: f64, val: f64, seed: u64) -> Result<Self> {
        if !(train > 0.0 && val >= 0.0 && train + val < 1.0) {
            return Err(Error::InvalidInput(format!(
                "split fractions {train}/{val} must be positive and sum below 1"
            )));
        }
        let n_train = ((train * n as f64).floor() as usize).max(1);
        let n_val = (val * n as f64).floor() as usize;
        if n_train + n_val >= n {
            return Err(Error::InvalidInput(format!(
                "{n} nodes are too few for a {train}/{val} split"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let take = |range: std::ops::Range<usize>| {
            let mut v = order[range].to_vec();
            v.sort_unstable();
            v
        };
        let train_idx = take(0..n_train);
        let val_idx = take(n_train..n_train + n_val);
        let test_idx = take(n_train + n_val..n);
        Ok(SplitSpec {
            seed,
            train: train_idx,
            val: val_idx,
            test: test_idx,
        })
    }

    /// The default 60/20/20 split.
    pub fn standard(n: usize, seed: u64) -> Result<Self> {
        Self::random(n, 0.6, 0.2, seed)
    }

    pub fn n(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n {
                return Err(Error::NodeOutOfRange { node: i, n });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidInput(format!(
                    "node {i} appears twice in the split"
                )));
            }
        }
        if self.train.is_empty() {
            return Err(Error::InvalidInput("split has no training nodes".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

struct Adam {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(model: &GcnModel) -> Self {
        Adam {
            m_w: model
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weight.raw_dim()))
                .collect(),
            v_w: model
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weight.raw_dim()))
                .collect(),
            m_b: model
                .layers
                .iter()
                .map(|l| Array1::zeros(l.bias.len()))
                .collect(),
            v_b: model
                .layers
                .iter()
                .map(|l| Array1::zeros(l.bias.len()))
                .collect(),
            t: 0,
        }
    }

    fn update<D: ndarray::Dimension>(
        p: &mut ndarray::Array<f64, D>,
        g: &ndarray::Array<f64, D>,
        m: &mut ndarray::Array<f64, D>,
        v: &mut ndarray::Array<f64, D>,
        lr_t: f64,
    ) {
        ndarray::Zip::from(p)
            .and(g)
            .and(m)
            .and(v)
            .for_each(|p, &g, m, v| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *p -= lr_t * *m / (v.sqrt() + ADAM_EPS);
            });
    }
}

/// Trains a fresh model on `split.train`, early-stopping on validation
/// cross-entropy and restoring the best weights.
pub fn train(
    g: &Graph,
    x: &FeatureMatrix,
    y: &[usize],
    split: &SplitSpec,
    config: &GcnConfig,
) -> Result<GcnModel> {
    config.validate()?;
    if y.len() != g.n() || x.n() != g.n() {
        return Err(Error::Shape(format!(
            "graph has {} nodes, features {} rows, labels {}",
            g.n(),
            x.n(),
            y.len()
        )));
    }
    split.validate(g.n())?;
    let classes = y.iter().max().map_or(0, |m| m + 1);
    let mut model = GcnModel::init(x.dim(), classes, config)?;
    let prop = model.propagator(g);
    let mut adam = Adam::new(&model);
    let mut best = model.layers.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs_run = 0;

    for epoch in 1..=config.epochs {
        epochs_run = epoch;
        let cache = model.forward_cached(&prop, x.view())?;
        let (loss, d_logits) = loss_and_grad(LossKind::Ce, cache.logits.view(), y, &split.train)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        let (mut grads, _) = model.backward(&prop, &cache, d_logits);
        adam.t += 1;
        let lr_t =
            config.learning_rate * (1.0 - BETA2.powi(adam.t)).sqrt() / (1.0 - BETA1.powi(adam.t));
        for (idx, layer) in model.layers.iter_mut().enumerate() {
            grads.weights[idx].scaled_add(config.weight_decay, &layer.weight);
            Adam::update(
                &mut layer.weight,
                &grads.weights[idx],
                &mut adam.m_w[idx],
                &mut adam.v_w[idx],
                lr_t,
            );
            if config.bias {
                Adam::update(
                    &mut layer.bias,
                    &grads.biases[idx],
                    &mut adam.m_b[idx],
                    &mut adam.v_b[idx],
                    lr_t,
                );
            }
        }

        if split.val.is_empty() || config.patience == 0 {
            best.clone_from(&model.layers);
            best_epoch = epoch;
            continue;
        }
        let logits = model.forward_with(&prop, x.view())?;
        let (val, _) = loss_and_grad(LossKind::Ce, logits.view(), y, &split.val)?;
        if !val.is_finite() {
            return Err(Error::Divergence { epoch, loss: val });
        }
        if val < best_val {
            best_val = val;
            best.clone_from(&model.layers);
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    model.layers = best;
    let logits = model.forward_with(&prop, x.view())?;
    let (train_loss, _) = loss_and_grad(LossKind::Ce, logits.view(), y, &split.train)?;
    let (val_loss, val_accuracy) = if split.val.is_empty() {
        (None, None)
    } else {
        (
            Some(loss_and_grad(LossKind::Ce, logits.view(), y, &split.val)?.0),
            Some(accuracy(logits.view(), y, &split.val)?),
        )
    };
    model.trained_on = Some(TrainRecord {
        epochs_run,
        best_epoch,
        train_loss,
        val_loss,
        train_accuracy: accuracy(logits.view(), y, &split.train)?,
        val_accuracy,
    });
    Ok(model)
}

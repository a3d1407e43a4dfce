//! Inference-time attack metrics and input gradients.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::loss::{accuracy, loss_and_grad, LossKind};
use super::{GcnModel, Propagator};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSet};
use crate::perturb::{apply_tau, Epsilon, FeatureMatrix};

/// Clean and attacked metrics on one evaluation mask. CW values are
/// per-node means so they compare across mask sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackMetrics {
    pub loss_clean: f64,
    pub loss_attacked: f64,
    pub cw_clean: f64,
    pub cw_attacked: f64,
    pub acc_clean: f64,
    pub acc_attacked: f64,
}

/// `∂L/∂X` with the loss taken over every node.
pub fn feature_gradient(
    model: &GcnModel,
    g: &Graph,
    x: &FeatureMatrix,
    y: &[usize],
    kind: LossKind,
) -> Result<Array2<f64>> {
    let all: Vec<usize> = (0..g.n()).collect();
    feature_gradient_masked(model, &model.propagator(g), x, y, kind, &all)
}

/// `∂L/∂X` with the loss taken over `nodes` only.
pub fn feature_gradient_masked(
    model: &GcnModel,
    prop: &Propagator,
    x: &FeatureMatrix,
    y: &[usize],
    kind: LossKind,
    nodes: &[usize],
) -> Result<Array2<f64>> {
    let cache = model.forward_cached(prop, x.view())?;
    let (_, d_logits) = loss_and_grad(kind, cache.logits.view(), y, nodes)?;
    Ok(model.backward(prop, &cache, d_logits).1)
}

/// `∂(Σ_j ⟨a_j, H_j⟩)/∂X` for output weights `a` (one row per node).
pub fn output_pullback(
    model: &GcnModel,
    g: &Graph,
    x: &FeatureMatrix,
    a: &Array2<f64>,
) -> Result<Array2<f64>> {
    if a.dim() != (g.n(), model.num_classes()) {
        return Err(Error::Shape(format!(
            "output weights are {:?}, logits are {}×{}",
            a.dim(),
            g.n(),
            model.num_classes()
        )));
    }
    let prop = model.propagator(g);
    let cache = model.forward_cached(&prop, x.view())?;
    Ok(model.backward(&prop, &cache, a.clone()).1)
}

fn metrics_of(logits: &Array2<f64>, y: &[usize], mask: &[usize]) -> Result<(f64, f64, f64)> {
    let ce = loss_and_grad(LossKind::Ce, logits.view(), y, mask)?.0;
    let cw = loss_and_grad(LossKind::Cw, logits.view(), y, mask)?.0 / mask.len() as f64;
    Ok((ce, cw, accuracy(logits.view(), y, mask)?))
}

/// Metrics before and after `τ(X, S)` on the nodes in `mask`.
pub fn evaluate_attack(
    model: &GcnModel,
    g: &Graph,
    x: &FeatureMatrix,
    y: &[usize],
    s: &NodeSet,
    e: &Epsilon,
    mask: &[usize],
) -> Result<AttackMetrics> {
    let prop = model.propagator(g);
    let clean = model.forward_with(&prop, x.view())?;
    evaluate_attack_with(model, &prop, &clean, x, y, s, e, mask)
}

/// As [`evaluate_attack`] with a prebuilt propagator and clean logits.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_attack_with(
    model: &GcnModel,
    prop: &Propagator,
    clean_logits: &Array2<f64>,
    x: &FeatureMatrix,
    y: &[usize],
    s: &NodeSet,
    e: &Epsilon,
    mask: &[usize],
) -> Result<AttackMetrics> {
    if mask.is_empty() {
        return Err(Error::InvalidInput("evaluation mask is empty".into()));
    }
    let (loss_clean, cw_clean, acc_clean) = metrics_of(clean_logits, y, mask)?;
    let (loss_attacked, cw_attacked, acc_attacked) = if s.is_empty() || e.lambda() == 0.0 {
        s.check_range(x.n())?;
        (loss_clean, cw_clean, acc_clean)
    } else {
        let attacked = model.forward_with(prop, apply_tau(x, s, e)?.view())?;
        metrics_of(&attacked, y, mask)?
    };
    Ok(AttackMetrics {
        loss_clean,
        loss_attacked,
        cw_clean,
        cw_attacked,
        acc_clean,
        acc_attacked,
    })
}

/// `Δ̃_i = (∇_{X_i} L)ᵀ ε` for every node, from one gradient computation.
pub fn first_order_deltas(grad: &Array2<f64>, e: &Epsilon) -> Result<Vec<f64>> {
    if grad.ncols() != e.dim() {
        return Err(Error::Shape(format!(
            "gradient has {} columns, perturbation {}",
            grad.ncols(),
            e.dim()
        )));
    }
    let v = ndarray::Array1::from(e.values());
    Ok(grad.dot(&v).to_vec())
}

/// `Δ̃_i` for a single node, with the loss over all nodes.
pub fn first_order_delta(
    model: &GcnModel,
    g: &Graph,
    x: &FeatureMatrix,
    y: &[usize],
    i: usize,
    e: &Epsilon,
    kind: LossKind,
) -> Result<f64> {
    g.check_node(i)?;
    let grad = feature_gradient(model, g, x, y, kind)?;
    Ok(first_order_deltas(&grad, e)?[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::tests::cfg;
    use crate::gcn::{cross_entropy_loss, cw_loss, Normalization};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64) -> (Graph, FeatureMatrix, Vec<usize>, GcnModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=30);
        let d = rng.random_range(1..=8);
        let k = rng.random_range(2..=4);
        let m = rng.random_range(0..=2 * n);
        let edges: Vec<(usize, usize)> = (0..m)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .collect();
        let g = Graph::from_edges(n, edges).unwrap();
        let x = FeatureMatrix::new(Array2::from_shape_simple_fn((n, d), || {
            rng.random_range(-1.0..1.0)
        }))
        .unwrap();
        let y = (0..n).map(|_| rng.random_range(0..k)).collect();
        let norm = if seed.is_multiple_of(2) {
            Normalization::Mean
        } else {
            Normalization::Symmetric
        };
        let layers = rng.random_range(1..=3);
        let mut model = GcnModel::init(d, k, &cfg(norm, layers, 6, seed)).unwrap();
        for l in model.layers.iter_mut() {
            l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        (g, x, y, model)
    }

    fn loss_at(model: &GcnModel, g: &Graph, x: &Array2<f64>, y: &[usize]) -> f64 {
        let h = model
            .forward(g, &FeatureMatrix::new(x.clone()).unwrap())
            .unwrap();
        let all: Vec<usize> = (0..g.n()).collect();
        cross_entropy_loss(h.view(), y, &all).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let step = 1e-3;
        for seed in 0..20 {
            let (g, x, y, model) = random_instance(seed);
            let grad = feature_gradient(&model, &g, &x, &y, LossKind::Ce).unwrap();
            let mut fd = Array2::zeros(grad.raw_dim());
            for ((i, j), v) in fd.indexed_iter_mut() {
                let mut p = x.as_array().clone();
                p[[i, j]] += step;
                let mut m = x.as_array().clone();
                m[[i, j]] -= step;
                *v = (loss_at(&model, &g, &p, &y) - loss_at(&model, &g, &m, &y)) / (2.0 * step);
            }
            let num = (&grad - &fd).mapv(|v| v * v).sum().sqrt();
            let den = grad
                .mapv(|v| v * v)
                .sum()
                .sqrt()
                .max(fd.mapv(|v| v * v).sum().sqrt());
            let rel = if den == 0.0 { 0.0 } else { num / den };
            assert!(rel < 1e-4, "seed {seed}: relative error {rel}");
        }
    }

    #[test]
    fn zero_weight_model_has_zero_gradient() {
        let (g, x, y, mut model) = random_instance(4);
        for l in model.layers.iter_mut() {
            l.weight.fill(0.0);
        }
        for kind in [LossKind::Ce, LossKind::Cw] {
            let grad = feature_gradient(&model, &g, &x, &y, kind).unwrap();
            assert!(grad.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn empty_set_or_zero_lambda_leaves_metrics() {
        let (g, x, y, model) = random_instance(7);
        let mask: Vec<usize> = (0..g.n()).collect();
        let e = Epsilon::from_direction(vec![1.0; x.dim()], 2.0).unwrap();
        let m = evaluate_attack(&model, &g, &x, &y, &NodeSet::empty(), &e, &mask).unwrap();
        assert_eq!(m.loss_clean, m.loss_attacked);
        assert_eq!(m.acc_clean, m.acc_attacked);
        let s = NodeSet::new(vec![0, 1], g.n()).unwrap();
        let m =
            evaluate_attack(&model, &g, &x, &y, &s, &e.with_lambda(0.0).unwrap(), &mask).unwrap();
        assert_eq!(m.cw_clean, m.cw_attacked);
        let m = evaluate_attack(&model, &g, &x, &y, &s, &e, &mask).unwrap();
        assert_ne!(m.loss_clean, m.loss_attacked);
    }

    #[test]
    fn delta_matches_perturbation() {
        let lambda = 1e-3;
        for seed in 0..10 {
            let (g, x, y, model) = random_instance(seed);
            let dir: Vec<f64> = (0..x.dim())
                .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let e = Epsilon::from_direction(dir, lambda).unwrap();
            let all: Vec<usize> = (0..g.n()).collect();
            let grad = feature_gradient(&model, &g, &x, &y, LossKind::Ce).unwrap();
            let deltas = first_order_deltas(&grad, &e).unwrap();
            for (i, &delta) in deltas.iter().enumerate() {
                let s = NodeSet::new(vec![i], g.n()).unwrap();
                let m = evaluate_attack(&model, &g, &x, &y, &s, &e, &all).unwrap();
                let actual = m.loss_attacked - m.loss_clean;
                if delta.abs() < 1e-9 {
                    continue;
                }
                let rel = (actual - delta).abs() / delta.abs();
                assert!(rel < 0.05, "seed {seed} node {i}: {actual} vs {delta}");
            }
            assert_eq!(
                first_order_delta(
                    &model,
                    &g,
                    &x,
                    &y,
                    0,
                    &Epsilon::zeros(x.dim()),
                    LossKind::Cw
                )
                .unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn cw_gradient_zero_outside_receptive_field_of_misclassified() {
        // two components; the second is classified correctly, so its
        // features get no gradient
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let x = FeatureMatrix::new(ndarray::array![
            [0.5, -1.0],
            [0.2, 0.3],
            [-0.7, 0.9],
            [1.1, 0.4]
        ])
        .unwrap();
        let model = GcnModel::init(2, 2, &cfg(Normalization::Mean, 2, 4, 3)).unwrap();
        let h = model.forward(&g, &x).unwrap();
        let pred = crate::gcn::predict(h.view());
        let y = vec![1 - pred[0], pred[1], pred[2], pred[3]];
        let grad = feature_gradient(&model, &g, &x, &y, LossKind::Cw).unwrap();
        assert!(grad
            .row(2)
            .iter()
            .chain(grad.row(3).iter())
            .all(|&v| v == 0.0));
        assert_eq!(cw_loss(h.view(), &y, &[2, 3]).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn cw_shift_invariant_and_nonnegative(
            logits in prop::collection::vec(-5.0f64..5.0, 6),
            c in -10.0f64..10.0,
        ) {
            let h = Array2::from_shape_vec((2, 3), logits).unwrap();
            let y = [1, 2];
            let base = cw_loss(h.view(), &y, &[0, 1]).unwrap();
            prop_assert!(base >= 0.0);
            let shifted = h.mapv(|v| v + c);
            let moved = cw_loss(shifted.view(), &y, &[0, 1]).unwrap();
            prop_assert!((moved - base).abs() < 1e-9);
        }
    }
}

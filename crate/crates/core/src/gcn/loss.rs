//! Classification losses over a node subset, with their logit gradients.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Mean softmax cross-entropy.
    Ce,
    /// Summed Carlini–Wagner margin `max_k H_jk − H_{j,y_j}`.
    Cw,
}

fn check(h: ArrayView2<f64>, y: &[usize], nodes: &[usize]) -> Result<()> {
    if y.len() != h.nrows() {
        return Err(Error::Shape(format!(
            "{} labels for {} nodes",
            y.len(),
            h.nrows()
        )));
    }
    if let Some(&j) = nodes.iter().find(|&&j| j >= h.nrows()) {
        return Err(Error::NodeOutOfRange {
            node: j,
            n: h.nrows(),
        });
    }
    if let Some(&j) = nodes.iter().find(|&&j| y[j] >= h.ncols()) {
        return Err(Error::InvalidInput(format!(
            "label {} of node {j} exceeds {} classes",
            y[j],
            h.ncols()
        )));
    }
    Ok(())
}

fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Predicted class per node; ties go to the lower class index.
pub fn predict(h: ArrayView2<f64>) -> Vec<usize> {
    h.rows().into_iter().map(argmax).collect()
}

pub fn accuracy(h: ArrayView2<f64>, y: &[usize], nodes: &[usize]) -> Result<f64> {
    check(h, y, nodes)?;
    if nodes.is_empty() {
        return Err(Error::InvalidInput(
            "accuracy over an empty node set".into(),
        ));
    }
    let hits = nodes.iter().filter(|&&j| argmax(h.row(j)) == y[j]).count();
    Ok(hits as f64 / nodes.len() as f64)
}

fn log_softmax_at(row: ArrayView1<f64>, k: usize) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row[k] - lse
}

pub fn cross_entropy_loss(h: ArrayView2<f64>, y: &[usize], nodes: &[usize]) -> Result<f64> {
    Ok(loss_and_grad(LossKind::Ce, h, y, nodes)?.0)
}

pub fn cw_loss(h: ArrayView2<f64>, y: &[usize], nodes: &[usize]) -> Result<f64> {
    Ok(loss_and_grad(LossKind::Cw, h, y, nodes)?.0)
}

/// Loss value and `∂L/∂H`. The CW margin is subgradient-differentiated at the
/// lowest-index maximizer; it is zero wherever the prediction is correct.
pub fn loss_and_grad(
    kind: LossKind,
    h: ArrayView2<f64>,
    y: &[usize],
    nodes: &[usize],
) -> Result<(f64, Array2<f64>)> {
    check(h, y, nodes)?;
    let mut grad = Array2::zeros(h.raw_dim());
    if nodes.is_empty() {
        return Ok((0.0, grad));
    }
    let mut total = 0.0;
    match kind {
        LossKind::Ce => {
            let scale = 1.0 / nodes.len() as f64;
            for &j in nodes {
                let row = h.row(j);
                total -= log_softmax_at(row, y[j]);
                let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                let mut g = grad.row_mut(j);
                for (k, e) in exps.iter().enumerate() {
                    g[k] += scale * e / z;
                }
                g[y[j]] -= scale;
            }
            total *= scale;
        }
        LossKind::Cw => {
            for &j in nodes {
                let row = h.row(j);
                let top = argmax(row);
                total += row[top] - row[y[j]];
                if top != y[j] {
                    grad[[j, top]] += 1.0;
                    grad[[j, y[j]]] -= 1.0;
                }
            }
        }
    }
    Ok((total, grad))
}

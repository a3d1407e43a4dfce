//! The constant feature perturbation: one vector `ε` with `J` entries of
//! magnitude `λ`, added to the feature row of every attacked node.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeSet;

/// Dense `n × D` node features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Array2<f64>);

impl FeatureMatrix {
    pub fn new(x: Array2<f64>) -> Result<Self> {
        if let Some(((i, j), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature ({i}, {j}) is not finite"
            )));
        }
        Ok(FeatureMatrix(x))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Perturbation vector `ε`. Stored as a sign pattern and a magnitude so the
/// same direction can be re-scaled for `λ` sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epsilon {
    /// Entries in {-1, 0, +1}.
    direction: Vec<f64>,
    lambda: f64,
}

impl Epsilon {
    pub fn from_direction(direction: Vec<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if direction.iter().any(|&d| d != 0.0 && d != 1.0 && d != -1.0) {
            return Err(Error::InvalidInput(
                "perturbation direction entries must be -1, 0 or 1".into(),
            ));
        }
        Ok(Epsilon { direction, lambda })
    }

    pub fn zeros(dim: usize) -> Self {
        Epsilon {
            direction: vec![0.0; dim],
            lambda: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of perturbed coordinates `J`.
    pub fn j_count(&self) -> usize {
        self.direction.iter().filter(|&&d| d != 0.0).count()
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn values(&self) -> Vec<f64> {
        self.direction.iter().map(|d| d * self.lambda).collect()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Epsilon {
            direction: self.direction.clone(),
            lambda,
        })
    }

    pub fn negated(&self) -> Self {
        Epsilon {
            direction: self.direction.iter().map(|d| -d).collect(),
            lambda: self.lambda,
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "perturbation strength must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(())
}

/// `J = max(1, floor(j_frac · D))`.
pub fn j_from_fraction(dim: usize, j_frac: f64) -> Result<usize> {
    if !(j_frac > 0.0 && j_frac <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "feature fraction must lie in (0, 1], got {j_frac}"
        )));
    }
    Ok(((j_frac * dim as f64).floor() as usize).max(1))
}

/// `ε` from an importance vector with `J = max(1, floor(j_frac · D))`.
pub fn build_epsilon(importance: &[f64], j_frac: f64, lambda: f64) -> Result<Epsilon> {
    let j = j_from_fraction(importance.len(), j_frac)?;
    build_epsilon_top(importance, j, lambda)
}

/// `ε` from an importance vector: the `j` coordinates of largest absolute
/// importance (ties to the lower index) get `λ · sign(importance)`. Exact
/// zeros are never picked; the ranking moves on to the next coordinate.
pub fn build_epsilon_top(importance: &[f64], j: usize, lambda: f64) -> Result<Epsilon> {
    check_lambda(lambda)?;
    if importance.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "importance contains non-finite values".into(),
        ));
    }
    if importance.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidInput(
            "importance vector is all zero; no perturbation direction".into(),
        ));
    }
    let mut order: Vec<usize> = (0..importance.len())
        .filter(|&i| importance[i] != 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        importance[b]
            .abs()
            .total_cmp(&importance[a].abs())
            .then(a.cmp(&b))
    });
    let mut direction = vec![0.0; importance.len()];
    for &i in order.iter().take(j) {
        direction[i] = importance[i].signum();
    }
    Ok(Epsilon { direction, lambda })
}

/// `τ(X, S)`: adds `ε` to the rows in `S`; other rows are untouched.
pub fn apply_tau(x: &FeatureMatrix, s: &NodeSet, e: &Epsilon) -> Result<FeatureMatrix> {
    if e.dim() != x.dim() {
        return Err(Error::Shape(format!(
            "perturbation has {} entries for {} features",
            e.dim(),
            x.dim()
        )));
    }
    s.check_range(x.n())?;
    let mut out = x.0.clone();
    let values = e.values();
    for i in s.iter() {
        for (v, d) in out.row_mut(i).iter_mut().zip(&values) {
            *v += d;
        }
    }
    Ok(FeatureMatrix(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn epsilon_examples() {
        let e = build_epsilon_top(&[3.0, -1.0, 0.5, -4.0, 0.2], 2, 1.0).unwrap();
        assert_eq!(e.values(), vec![1.0, 0.0, 0.0, -1.0, 0.0]);
        let e = build_epsilon_top(&[-2.0], 1, 0.5).unwrap();
        assert_eq!(e.values(), vec![-0.5]);
        let e = build_epsilon_top(&[1.0; 4], 2, 1.0).unwrap();
        assert_eq!(e.values(), vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(e.j_count(), 2);
    }

    #[test]
    fn zeros_skipped_and_all_zero_rejected() {
        let e = build_epsilon_top(&[0.0, 0.0, 2.0], 2, 1.0).unwrap();
        assert_eq!(e.values(), vec![0.0, 0.0, 1.0]);
        assert_eq!(e.j_count(), 1);
        assert!(build_epsilon_top(&[0.0; 3], 1, 1.0).is_err());
        assert!(build_epsilon_top(&[1.0], 1, -1.0).is_err());
    }

    #[test]
    fn fraction_rule() {
        assert_eq!(j_from_fraction(3703, 0.02).unwrap(), 74);
        assert_eq!(j_from_fraction(500, 0.02).unwrap(), 10);
        assert_eq!(j_from_fraction(10, 0.02).unwrap(), 1);
        assert!(j_from_fraction(10, 0.0).is_err());
        let e = build_epsilon(&[1.0, -5.0, 2.0, 0.1], 0.5, 1.0).unwrap();
        assert_eq!(e.values(), vec![0.0, -1.0, 1.0, 0.0]);
    }

    #[test]
    fn tau_examples() {
        let x = FeatureMatrix::new(array![[2.0, 2.0], [5.0, 6.0]]).unwrap();
        let e = Epsilon::from_direction(vec![1.0, 0.0], 1.0).unwrap();
        assert_eq!(apply_tau(&x, &NodeSet::empty(), &e).unwrap(), x);
        let s = NodeSet::new(vec![0], 2).unwrap();
        let y = apply_tau(&x, &s, &e).unwrap();
        assert_eq!(y.as_array(), &array![[3.0, 2.0], [5.0, 6.0]]);
        assert_eq!(apply_tau(&y, &s, &e.negated()).unwrap(), x);
        let bad = NodeSet::from_iter_unchecked([2]);
        assert!(apply_tau(&x, &bad, &e).is_err());
        let wide = Epsilon::zeros(3);
        assert!(apply_tau(&x, &s, &wide).is_err());
    }

    proptest! {
        #[test]
        fn scale_invariance_and_negation(
            imp in prop::collection::vec(-10.0f64..10.0, 1..20),
            c in 0.01f64..100.0,
            j in 1usize..6,
        ) {
            prop_assume!(imp.iter().any(|&v| v != 0.0));
            let base = build_epsilon_top(&imp, j, 1.0).unwrap();
            let scaled: Vec<f64> = imp.iter().map(|v| v * c).collect();
            prop_assert_eq!(&build_epsilon_top(&scaled, j, 1.0).unwrap(), &base);
            let neg: Vec<f64> = imp.iter().map(|v| -v).collect();
            prop_assert_eq!(build_epsilon_top(&neg, j, 1.0).unwrap(), base.negated());
        }

        #[test]
        fn tau_changes_exactly_selected_rows(
            rows in 1usize..8, cols in 1usize..5, seed in any::<u64>(), mask in any::<u8>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = FeatureMatrix::new(Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>())).unwrap();
            let dir: Vec<f64> = (0..cols).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let e = Epsilon::from_direction(dir, 0.5).unwrap();
            let s = NodeSet::from_iter_unchecked((0..rows).filter(|i| mask >> (i % 8) & 1 == 1));
            let y = apply_tau(&x, &s, &e).unwrap();
            let mut changed = 0;
            for i in 0..rows {
                let diff: Vec<f64> = (0..cols).map(|j| y.as_array()[[i, j]] - x.as_array()[[i, j]]).collect();
                if s.contains(i) {
                    changed += 1;
                    for (d, v) in diff.iter().zip(e.values()) {
                        prop_assert!((d - v).abs() < 1e-12);
                    }
                } else {
                    prop_assert!(diff.iter().all(|&d| d == 0.0));
                }
            }
            prop_assert_eq!(changed, s.len());
        }
    }
}

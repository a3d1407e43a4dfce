//! Random-walk transition matrices, L-step powers, RWCS column sums and the
//! top-l binarization used by the greedy corrected selector.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Largest `n` for which [`walk_power_dense`] will allocate an `n × n` matrix.
pub const DEFAULT_DENSE_CAP: usize = 50_000;

/// Row-stochastic transition matrix `M` with `M_ij = 1/d_i` over the
/// self-inclusive neighbourhood of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkMatrix {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl WalkMatrix {
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Column indices and probabilities of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn nnz(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n();
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[[i, j]] = v;
            }
        }
        out
    }
}

pub fn transition_matrix(g: &Graph) -> WalkMatrix {
    let n = g.n();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(n + 2 * g.edge_count());
    let mut vals = Vec::with_capacity(n + 2 * g.edge_count());
    offsets.push(0);
    for i in 0..n {
        let p = 1.0 / g.degree(i) as f64;
        let nbrs = g.neighbors(i);
        let split = nbrs.partition_point(|&j| j < i);
        cols.extend_from_slice(&nbrs[..split]);
        cols.push(i);
        cols.extend_from_slice(&nbrs[split..]);
        vals.resize(cols.len(), p);
        offsets.push(cols.len());
    }
    WalkMatrix {
        offsets,
        cols,
        vals,
    }
}

fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::InvalidInput(
            "walk length L must be at least 1".into(),
        ));
    }
    Ok(())
}

/// RWCS importance `I_i = Σ_j [M^L]_ji`, computed as `1ᵀ M^L` by `L`
/// sparse vector-matrix products.
pub fn rwcs_scores(g: &Graph, steps: usize) -> Result<Vec<f64>> {
    check_steps(steps)?;
    let m = transition_matrix(g);
    let n = g.n();
    let mut v = vec![1.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..steps {
        // (vM)_j = Σ_i v_i M_ij, and M_ij ≠ 0 iff j ∈ N_i iff i ∈ N_j.
        for (j, slot) in next.iter_mut().enumerate() {
            let (cols, _) = m.row(j);
            *slot = cols.iter().map(|&i| v[i] / g.degree(i) as f64).sum();
        }
        std::mem::swap(&mut v, &mut next);
    }
    Ok(v)
}

/// Reusable workspace for computing single rows of `M^L`.
struct RowWalker<'a> {
    m: &'a WalkMatrix,
    cur: Vec<f64>,
    next: Vec<f64>,
    support: Vec<usize>,
    next_support: Vec<usize>,
}

impl<'a> RowWalker<'a> {
    fn new(m: &'a WalkMatrix) -> Self {
        let n = m.n();
        RowWalker {
            m,
            cur: vec![0.0; n],
            next: vec![0.0; n],
            support: Vec::new(),
            next_support: Vec::new(),
        }
    }

    /// Computes `e_iᵀ M^steps`; returns the sorted support and leaves the
    /// values in `self.cur`. Source columns are scattered in ascending order
    /// so every caller reproduces bitwise-identical rows.
    fn walk(&mut self, i: usize, steps: usize) -> &[usize] {
        for &k in &self.support {
            self.cur[k] = 0.0;
        }
        self.support.clear();
        self.cur[i] = 1.0;
        self.support.push(i);
        for _ in 0..steps {
            for &k in &self.support {
                let mass = self.cur[k];
                let (cols, vals) = self.m.row(k);
                for (&j, &p) in cols.iter().zip(vals) {
                    if self.next[j] == 0.0 {
                        self.next_support.push(j);
                    }
                    self.next[j] += mass * p;
                }
                self.cur[k] = 0.0;
            }
            self.next_support.sort_unstable();
            std::mem::swap(&mut self.cur, &mut self.next);
            std::mem::swap(&mut self.support, &mut self.next_support);
            self.next_support.clear();
        }
        &self.support
    }
}

/// Dense `M^L`; entry `(i, j)` is the L-step transition probability.
pub fn walk_power_dense(g: &Graph, steps: usize, cap: usize) -> Result<Array2<f64>> {
    check_steps(steps)?;
    let n = g.n();
    if n > cap {
        return Err(Error::Capacity(format!(
            "dense walk power needs an {n}x{n} matrix but the cap is {cap}; \
             lower the cap-dependent work or use the row-wise sparse path"
        )));
    }
    let m = transition_matrix(g);
    let mut walker = RowWalker::new(&m);
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        let support = walker.walk(i, steps).to_vec();
        for j in support {
            out[[i, j]] = walker.cur[j];
        }
    }
    Ok(out)
}

/// Binarized walk matrix `M̃`: per row, the columns of the top-l strictly
/// positive entries of `M^L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryWalkMatrix {
    rows: Vec<Vec<usize>>,
}

impl BinaryWalkMatrix {
    /// Build from explicit rows over `n` columns. Rows are sorted and deduplicated.
    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Result<Self> {
        let n = rows.len();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            if let Some(&node) = row.last().filter(|&&j| j >= n) {
                return Err(Error::NodeOutOfRange { node, n });
            }
        }
        Ok(BinaryWalkMatrix { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&j).is_ok()
    }

    /// `Ĩ_i(M̃)`: number of rows with a 1 in column `i`.
    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.n()];
        for row in &self.rows {
            for &j in row {
                sums[j] += 1;
            }
        }
        sums
    }

    /// For every column, the ascending list of rows holding a 1 there.
    pub fn column_index(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.n()];
        for (i, row) in self.rows.iter().enumerate() {
            for &j in row {
                cols[j].push(i);
            }
        }
        cols
    }
}

fn top_l_columns(entries: &mut Vec<(usize, f64)>, l: usize) -> Vec<usize> {
    entries.retain(|&(_, v)| v > 0.0);
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut cols: Vec<usize> = entries.iter().take(l).map(|&(j, _)| j).collect();
    cols.sort_unstable();
    cols
}

/// Top-l binarization of a dense `M^L`. Ties at the cutoff go to the lower
/// column index.
pub fn binarize_topl(p: &Array2<f64>, l: usize) -> Result<BinaryWalkMatrix> {
    if l == 0 {
        return Err(Error::InvalidInput("top-l count must be at least 1".into()));
    }
    if p.nrows() != p.ncols() {
        return Err(Error::Shape(format!(
            "walk power must be square, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let rows = p
        .rows()
        .into_iter()
        .map(|row| {
            let mut entries: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
            top_l_columns(&mut entries, l)
        })
        .collect();
    Ok(BinaryWalkMatrix { rows })
}

/// Row-by-row binarization of `M^L` without materializing the dense power.
/// Produces exactly the same matrix as `binarize_topl(walk_power_dense(..))`.
pub fn binarize_walk(g: &Graph, steps: usize, l: usize) -> Result<BinaryWalkMatrix> {
    check_steps(steps)?;
    if l == 0 {
        return Err(Error::InvalidInput("top-l count must be at least 1".into()));
    }
    let m = transition_matrix(g);
    let rows = (0..g.n())
        .into_par_iter()
        .map_init(
            || RowWalker::new(&m),
            |walker, i| {
                let support = walker.walk(i, steps).to_vec();
                let mut entries: Vec<(usize, f64)> =
                    support.into_iter().map(|j| (j, walker.cur[j])).collect();
                top_l_columns(&mut entries, l)
            },
        )
        .collect();
    Ok(BinaryWalkMatrix { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    /// Naive dense product, independent of the row walker.
    fn naive_power(g: &Graph, steps: usize) -> Array2<f64> {
        let n = g.n();
        let mut m = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            let d = g.degree(i) as f64;
            m[[i, i]] = 1.0 / d;
            for &j in g.neighbors(i) {
                m[[i, j]] = 1.0 / d;
            }
        }
        let mut p = Array2::eye(n);
        for _ in 0..steps {
            let mut q = Array2::zeros((n, n));
            for i in 0..n {
                for k in 0..n {
                    for j in 0..n {
                        q[[i, j]] += p[[i, k]] * m[[k, j]];
                    }
                }
            }
            p = q;
        }
        p
    }

    #[test]
    fn transition_examples() {
        let edge = complete(2);
        assert_eq!(
            transition_matrix(&edge).to_dense(),
            array![[0.5, 0.5], [0.5, 0.5]]
        );
        let iso = Graph::from_edges(1, []).unwrap();
        assert_eq!(transition_matrix(&iso).to_dense(), array![[1.0]]);
        let m = transition_matrix(&star(3)).to_dense();
        assert_eq!(m.row(0).to_vec(), vec![0.25; 4]);
        assert_eq!(m.row(2).to_vec(), vec![0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn row_nnz_is_degree() {
        let g = star(5);
        let m = transition_matrix(&g);
        for i in 0..g.n() {
            assert_eq!(m.nnz(i), g.degree(i));
        }
    }

    #[test]
    fn rwcs_examples() {
        for steps in 1..6 {
            assert_eq!(rwcs_scores(&complete(2), steps).unwrap(), vec![1.0, 1.0]);
            for s in rwcs_scores(&complete(3), steps).unwrap() {
                assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
            }
        }
        let s = rwcs_scores(&star(3), 1).unwrap();
        let expected = naive_power(&star(3), 1).sum_axis(ndarray::Axis(0));
        assert_eq!(s, vec![1.75, 0.75, 0.75, 0.75]);
        for (a, b) in s.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(rwcs_scores(&star(3), 0).is_err());
    }

    #[test]
    fn dense_power_examples() {
        let g = star(4);
        assert_eq!(
            walk_power_dense(&g, 1, DEFAULT_DENSE_CAP).unwrap(),
            transition_matrix(&g).to_dense()
        );
        let p = walk_power_dense(&complete(2), 3, DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(p, array![[0.5, 0.5], [0.5, 0.5]]);
        let p = walk_power_dense(&path(6), 4, DEFAULT_DENSE_CAP).unwrap();
        let cols = p.sum_axis(ndarray::Axis(0));
        for (a, b) in cols.iter().zip(rwcs_scores(&path(6), 4).unwrap()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn dense_cap_enforced() {
        assert!(matches!(
            walk_power_dense(&path(10), 2, 9),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn binarize_examples() {
        let p = array![
            [0.5, 0.3, 0.2, 0.0],
            [0.25, 0.25, 0.25, 0.25],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0]
        ];
        let b2 = binarize_topl(&p, 2).unwrap();
        assert_eq!(b2.row(0), &[0, 1]);
        assert_eq!(b2.row(1), &[0, 1]);
        let b30 = binarize_topl(&p, 30).unwrap();
        assert_eq!(b30.row(2), &[2]);
        assert_eq!(b30.row(0), &[0, 1, 2]);
        assert!(binarize_topl(&p, 0).is_err());
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..25).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n), 0..3 * n)
                .prop_map(move |edges| Graph::from_edges(n, edges).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn power_matches_naive_oracle(g in arb_graph(), steps in 1usize..5) {
            let fast = walk_power_dense(&g, steps, DEFAULT_DENSE_CAP).unwrap();
            let slow = naive_power(&g, steps);
            for (a, b) in fast.iter().zip(slow.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            for row in fast.rows() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-8);
            }
        }

        #[test]
        fn rwcs_sums_to_n(g in arb_graph(), steps in 1usize..8) {
            let s: f64 = rwcs_scores(&g, steps).unwrap().iter().sum();
            prop_assert!((s - g.n() as f64).abs() < 1e-6);
        }

        #[test]
        fn rowwise_binarization_matches_dense(g in arb_graph(), steps in 1usize..5, l in 1usize..8) {
            let p = walk_power_dense(&g, steps, DEFAULT_DENSE_CAP).unwrap();
            let dense = binarize_topl(&p, l).unwrap();
            let rowwise = binarize_walk(&g, steps, l).unwrap();
            prop_assert_eq!(&dense, &rowwise);
            for i in 0..g.n() {
                let positives = p.row(i).iter().filter(|&&v| v > 0.0).count();
                prop_assert_eq!(dense.row(i).len(), positives.min(l));
                for &j in dense.row(i) {
                    prop_assert!(p[[i, j]] > 0.0);
                }
            }
        }
    }
}

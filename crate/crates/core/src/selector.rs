//! Attack-set selection under node-access limits: a budget `r`, a degree
//! cap `m`, and (for the greedy corrected strategy) a hop-exclusion radius `k`.

use serde::{Deserialize, Serialize};

use crate::centrality::{Method, ScoreVector};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSet};
use crate::walk::BinaryWalkMatrix;

/// Node-access limits for one selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConstraints {
    /// Maximum number of attacked nodes (`r`).
    pub budget: usize,
    /// Maximum degree `m` of an attackable node, with the self term counted.
    pub max_degree: usize,
    /// Exclusion radius `k` around each greedy pick.
    pub hops: usize,
}

impl SelectionConstraints {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidInput("budget r must be at least 1".into()));
        }
        if self.max_degree == 0 {
            return Err(Error::InvalidInput(
                "degree cap m must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a selection strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub method: Method,
    pub nodes: NodeSet,
    pub warnings: Vec<String>,
    /// Nodes in the order they were picked; every prefix is itself the
    /// selection for a smaller budget.
    #[serde(skip)]
    pub order: Vec<usize>,
}

impl Selection {
    fn from_order(method: Method, order: Vec<usize>, warnings: Vec<String>) -> Self {
        Selection {
            method,
            nodes: NodeSet::from_iter_unchecked(order.iter().copied()),
            warnings,
            order,
        }
    }
}

/// Lowest degree among the top `percent`% highest-degree nodes. The count
/// of top nodes is `ceil(percent · n / 100)`, at least one.
pub fn degree_threshold(g: &Graph, percent: f64) -> Result<usize> {
    threshold_from_degrees(&g.degrees(), percent)
}

pub fn threshold_from_degrees(degrees: &[usize], percent: f64) -> Result<usize> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::InvalidInput(format!(
            "threshold percent must lie in (0, 100], got {percent}"
        )));
    }
    if degrees.is_empty() {
        return Err(Error::InvalidInput("no degrees to threshold".into()));
    }
    let mut sorted = degrees.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let top = ((percent * sorted.len() as f64) / 100.0).ceil() as usize;
    Ok(sorted[top.clamp(1, sorted.len()) - 1])
}

/// Attackable nodes `{i : d_i <= m}`, ascending.
pub fn candidate_pool(g: &Graph, max_degree: usize) -> Vec<usize> {
    (0..g.n()).filter(|&i| g.degree(i) <= max_degree).collect()
}

fn nonempty_pool(g: &Graph, max_degree: usize) -> Result<Vec<usize>> {
    let pool = candidate_pool(g, max_degree);
    if pool.is_empty() {
        return Err(Error::EmptyPool { max_degree });
    }
    Ok(pool)
}

/// The `r` highest-scoring attackable nodes, ties to the lower id.
pub fn select_top_r(
    scores: &ScoreVector,
    g: &Graph,
    c: &SelectionConstraints,
) -> Result<Selection> {
    c.validate()?;
    if scores.len() != g.n() {
        return Err(Error::Shape(format!(
            "{} scores for a graph with {} nodes",
            scores.len(),
            g.n()
        )));
    }
    let mut pool = nonempty_pool(g, c.max_degree)?;
    let v = &scores.values;
    pool.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut warnings = Vec::new();
    if pool.len() < c.budget {
        warnings.push(format!(
            "candidate pool has only {} nodes for a budget of {}",
            pool.len(),
            c.budget
        ));
    }
    pool.truncate(c.budget);
    Ok(Selection::from_order(scores.method, pool, warnings))
}

fn argmax_by<F: Fn(usize) -> f64>(pool: &[usize], key: F) -> usize {
    // pool is ascending, so a strict comparison keeps the lowest id on ties
    let mut best = pool[0];
    let mut best_key = key(best);
    for &i in &pool[1..] {
        let k = key(i);
        if k > best_key {
            best = i;
            best_key = k;
        }
    }
    best
}

/// Greedy corrected RWCS. Falls back to the static column sums of `M̃`
/// once every adaptive score in the pool is zero.
pub fn gc_rwcs(g: &Graph, mb: &BinaryWalkMatrix, c: &SelectionConstraints) -> Result<Selection> {
    let fallback: Vec<f64> = mb.column_sums().into_iter().map(|s| s as f64).collect();
    gc_rwcs_with_fallback(g, mb, c, &fallback)
}

/// Greedy corrected RWCS with an explicit static score vector (normally the
/// RWCS scores) used once the adaptive scores of the whole pool reach zero.
///
/// Each round picks the pool node with the largest column sum of `Q`
/// (initially `M̃`), removes its `k`-hop ball from the pool, and zeroes every
/// row of `Q` that has a 1 in the picked column.
pub fn gc_rwcs_with_fallback(
    g: &Graph,
    mb: &BinaryWalkMatrix,
    c: &SelectionConstraints,
    fallback: &[f64],
) -> Result<Selection> {
    c.validate()?;
    let n = g.n();
    if mb.n() != n || fallback.len() != n {
        return Err(Error::Shape(format!(
            "graph has {n} nodes but binary matrix has {} and fallback scores {}",
            mb.n(),
            fallback.len()
        )));
    }
    let mut pool = nonempty_pool(g, c.max_degree)?;
    let mut col_sums = mb.column_sums();
    let col_rows = mb.column_index();
    let mut zeroed = vec![false; n];
    let mut order = Vec::with_capacity(c.budget);
    let mut warnings = Vec::new();
    let mut fell_back = false;

    for _ in 0..c.budget {
        if pool.is_empty() {
            warnings.push(format!(
                "candidate pool exhausted after {} of {} picks",
                order.len(),
                c.budget
            ));
            break;
        }
        let mut z = argmax_by(&pool, |i| col_sums[i] as f64);
        if col_sums[z] == 0 {
            if !fell_back {
                warnings.push(format!(
                    "adaptive scores all zero after {} picks; using static ordering",
                    order.len()
                ));
                fell_back = true;
            }
            z = argmax_by(&pool, |i| fallback[i]);
        }
        order.push(z);
        let ball = g.hop_ball(z, c.hops)?;
        pool.retain(|&i| !ball.contains(i));
        for &row in &col_rows[z] {
            if !zeroed[row] {
                zeroed[row] = true;
                for &j in mb.row(row) {
                    col_sums[j] -= 1;
                }
            }
        }
    }
    Ok(Selection::from_order(Method::GcRwcs, order, warnings))
}

//! Baseline node-importance metrics: degree, PageRank, betweenness and a
//! seeded random ranking.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::walk::{rwcs_scores, transition_matrix};

/// Node-scoring method; doubles as the strategy name in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Degree,
    Pagerank,
    Betweenness,
    Random,
    Rwcs,
    GcRwcs,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Random,
        Method::Degree,
        Method::Pagerank,
        Method::Betweenness,
        Method::Rwcs,
        Method::GcRwcs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Degree => "degree",
            Method::Pagerank => "pagerank",
            Method::Betweenness => "betweenness",
            Method::Random => "random",
            Method::Rwcs => "rwcs",
            Method::GcRwcs => "gc-rwcs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}")))
    }
}

/// One finite score per node, tagged with the method that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub method: Method,
    pub values: Vec<f64>,
}

impl ScoreVector {
    pub fn new(method: Method, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{method} score of node {i} is not finite"
            )));
        }
        Ok(ScoreVector { method, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Node ids ordered by descending score, ties to the lower id.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        order
    }

    /// `node_id,score` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node_id,score\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

pub fn degree_scores(g: &Graph) -> ScoreVector {
    let values = g.degrees().into_iter().map(|d| d as f64).collect();
    ScoreVector {
        method: Method::Degree,
        values,
    }
}

pub fn rwcs_score_vector(g: &Graph, steps: usize) -> Result<ScoreVector> {
    ScoreVector::new(Method::Rwcs, rwcs_scores(g, steps)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankParams {
    fn default() -> Self {
        PageRankParams {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

/// PageRank by power iteration on the self-inclusive walk `M` with uniform
/// restart. Converged when the L1 change between iterates drops below `tol`.
pub fn pagerank_scores(g: &Graph, params: PageRankParams) -> Result<ScoreVector> {
    let PageRankParams {
        damping,
        tol,
        max_iter,
    } = params;
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::InvalidInput(format!(
            "damping must lie in (0, 1), got {damping}"
        )));
    }
    let n = g.n();
    let m = transition_matrix(g);
    let teleport = (1.0 - damping) / n as f64;
    let mut pr = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        for (j, slot) in next.iter_mut().enumerate() {
            let (cols, _) = m.row(j);
            let inflow: f64 = cols.iter().map(|&i| pr[i] / g.degree(i) as f64).sum();
            *slot = teleport + damping * inflow;
        }
        residual = pr.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pr, &mut next);
        if residual < tol {
            return ScoreVector::new(Method::Pagerank, pr);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

const BRANDES_CHUNK: usize = 32;

/// Exact unweighted betweenness by Brandes' algorithm; each unordered pair
/// of endpoints is counted once. Sources are processed in fixed chunks and
/// merged in chunk order, so the result does not depend on thread count.
pub fn betweenness_scores(g: &Graph) -> ScoreVector {
    let n = g.n();
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(BRANDES_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            let mut work = BrandesWork::new(n);
            for &s in chunk {
                work.accumulate(g, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut values = vec![0.0; n];
    for part in partials {
        for (v, p) in values.iter_mut().zip(part) {
            *v += p;
        }
    }
    for v in values.iter_mut() {
        *v /= 2.0;
    }
    ScoreVector {
        method: Method::Betweenness,
        values,
    }
}

struct BrandesWork {
    stack: Vec<usize>,
    queue: std::collections::VecDeque<usize>,
    preds: Vec<Vec<usize>>,
    sigma: Vec<f64>,
    dist: Vec<i64>,
    delta: Vec<f64>,
}

impl BrandesWork {
    fn new(n: usize) -> Self {
        BrandesWork {
            stack: Vec::with_capacity(n),
            queue: Default::default(),
            preds: vec![Vec::new(); n],
            sigma: vec![0.0; n],
            dist: vec![-1; n],
            delta: vec![0.0; n],
        }
    }

    fn accumulate(&mut self, g: &Graph, s: usize, acc: &mut [f64]) {
        for &v in &self.stack {
            self.preds[v].clear();
            self.sigma[v] = 0.0;
            self.dist[v] = -1;
            self.delta[v] = 0.0;
        }
        self.stack.clear();
        self.sigma[s] = 1.0;
        self.dist[s] = 0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.stack.push(v);
            for &w in g.neighbors(v) {
                if self.dist[w] < 0 {
                    self.dist[w] = self.dist[v] + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == self.dist[v] + 1 {
                    self.sigma[w] += self.sigma[v];
                    self.preds[w].push(v);
                }
            }
        }
        for idx in (0..self.stack.len()).rev() {
            let w = self.stack[idx];
            let coeff = (1.0 + self.delta[w]) / self.sigma[w];
            for p in 0..self.preds[w].len() {
                let v = self.preds[w][p];
                self.delta[v] += self.sigma[v] * coeff;
            }
            if w != s {
                acc[w] += self.delta[w];
            }
        }
    }
}

pub fn random_scores(n: usize, seed: u64) -> ScoreVector {
    random_scores_from(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

/// Uniform `[0, 1)` scores drawn from a caller-owned stream.
pub fn random_scores_from<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ScoreVector {
    ScoreVector {
        method: Method::Random,
        values: (0..n).map(|_| rng.random::<f64>()).collect(),
    }
}

//! Exhaustive oracles for the set-function view of the attack: vulnerable
//! functions `g_i(S)`, vulnerable families `A_i`, basic families `B_i`, the
//! maximum-coverage identity in the singleton regime, and empirical
//! diminishing-return statistics.

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{predict, GcnModel, Propagator};
use crate::graph::{Graph, NodeSet};
use crate::perturb::{apply_tau, Epsilon, FeatureMatrix};

/// Largest pool that may be enumerated exhaustively.
pub const MAX_POOL: usize = 15;

/// A family of distinct subsets of a finite universe, kept in canonical
/// order (by size, then lexicographically).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetFamily {
    universe: Vec<usize>,
    sets: Vec<Vec<usize>>,
}

fn canonical(sets: &mut [Vec<usize>]) {
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    let mut it = b.iter();
    a.iter().all(|x| it.any(|y| y == x))
}

impl SetFamily {
    pub fn new(universe: Vec<usize>, sets: Vec<Vec<usize>>) -> Result<Self> {
        let uni: BTreeSet<usize> = universe.iter().copied().collect();
        if uni.len() != universe.len() {
            return Err(Error::InvalidInput("universe has repeated elements".into()));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(sets.len());
        for mut s in sets {
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput(format!("set {s:?} repeats an element")));
            }
            if let Some(x) = s.iter().find(|x| !uni.contains(x)) {
                return Err(Error::InvalidInput(format!(
                    "element {x} is outside the universe"
                )));
            }
            if !seen.insert(s.clone()) {
                return Err(Error::InvalidInput(format!("set {s:?} appears twice")));
            }
            out.push(s);
        }
        canonical(&mut out);
        Ok(SetFamily {
            universe: uni.into_iter().collect(),
            sets: out,
        })
    }

    /// Universe `{0, …, ground_size − 1}`.
    pub fn over_ground(ground_size: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        Self::new((0..ground_size).collect(), sets)
    }

    /// Every subset of `universe` that contains at least one generator.
    pub fn upward_closure(universe: Vec<usize>, generators: &[Vec<usize>]) -> Result<Self> {
        if universe.len() > MAX_POOL {
            return Err(Error::Capacity(format!(
                "upward closure over {} elements exceeds the {MAX_POOL}-element limit",
                universe.len()
            )));
        }
        let sets = subsets(&universe)
            .filter(|s| {
                generators.iter().any(|g| {
                    let mut g = g.clone();
                    g.sort_unstable();
                    is_subset(&g, s)
                })
            })
            .collect();
        Self::new(universe, sets)
    }

    pub fn universe(&self) -> &[usize] {
        &self.universe
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn contains(&self, s: &[usize]) -> bool {
        let mut s = s.to_vec();
        s.sort_unstable();
        self.sets
            .binary_search_by(|x| x.len().cmp(&s.len()).then_with(|| x.as_slice().cmp(&s)))
            .is_ok()
    }

    /// Closed under adding any universe element to any member.
    pub fn is_upward_closed(&self) -> bool {
        let members: HashSet<&[usize]> = self.sets.iter().map(Vec::as_slice).collect();
        self.sets.iter().all(|s| {
            self.universe
                .iter()
                .filter(|u| s.binary_search(u).is_err())
                .all(|&u| {
                    let mut t = s.clone();
                    t.insert(t.partition_point(|&x| x < u), u);
                    members.contains(t.as_slice())
                })
        })
    }

    /// Every member is empty or a single element.
    pub fn is_singleton_family(&self) -> bool {
        self.sets.iter().all(|s| s.len() == 1)
    }
}

/// All subsets of `universe` (sorted input gives sorted subsets).
fn subsets(universe: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0u32..1 << universe.len()).map(move |mask| subset_of(universe, mask))
}

fn subset_of(universe: &[usize], mask: u32) -> Vec<usize> {
    universe
        .iter()
        .enumerate()
        .filter(|(b, _)| mask >> b & 1 == 1)
        .map(|(_, &u)| u)
        .collect()
}

/// Inclusion-minimal members of an upward-closed family; empty when the
/// family contains `∅`.
pub fn basic_vulnerable_set(a: &SetFamily) -> Result<SetFamily> {
    if !a.is_upward_closed() {
        return Err(Error::InvalidInput(
            "family is not upward closed; basic sets are undefined".into(),
        ));
    }
    let sets = if a.contains(&[]) {
        Vec::new()
    } else {
        a.sets
            .iter()
            .filter(|s| {
                (0..s.len()).all(|drop| {
                    let mut t = (*s).clone();
                    t.remove(drop);
                    !a.contains(&t)
                })
            })
            .cloned()
            .collect()
    };
    let b = SetFamily {
        universe: a.universe.clone(),
        sets,
    };
    assert!(
        satisfies_basic_conditions(a, &b),
        "minimal-set extraction broke its contract"
    );
    Ok(b)
}

/// Checks `b ⊆ a` and: (1) `∅ ∉ b`, and `b = ∅` when `∅ ∈ a`; (2) if
/// `∅ ∉ a`, every member of `a` contains a member of `b`; (3) no member of
/// `b` contains another.
pub fn satisfies_basic_conditions(a: &SetFamily, b: &SetFamily) -> bool {
    if !b.sets.iter().all(|s| a.contains(s)) {
        return false;
    }
    let empty_in_a = a.contains(&[]);
    let c1 = !b.contains(&[]) && (!empty_in_a || b.is_empty());
    let c2 = empty_in_a
        || a.sets
            .iter()
            .all(|s| b.sets.iter().any(|t| is_subset(t, s)));
    let c3 = b.sets.iter().enumerate().all(|(i, s)| {
        b.sets
            .iter()
            .enumerate()
            .all(|(j, t)| i == j || !is_subset(s, t))
    });
    c1 && c2 && c3
}

/// Evaluates `g_t(S)` for a fixed model, graph, features, labels and `ε`.
pub struct VulnEvaluator<'a> {
    model: &'a GcnModel,
    prop: Propagator,
    x: &'a FeatureMatrix,
    y: &'a [usize],
    eps: &'a Epsilon,
}

impl<'a> VulnEvaluator<'a> {
    pub fn new(
        model: &'a GcnModel,
        g: &Graph,
        x: &'a FeatureMatrix,
        y: &'a [usize],
        eps: &'a Epsilon,
    ) -> Result<Self> {
        if x.n() != g.n() || y.len() != g.n() {
            return Err(Error::Shape(format!(
                "graph has {} nodes, features {} rows, labels {}",
                g.n(),
                x.n(),
                y.len()
            )));
        }
        if eps.dim() != x.dim() {
            return Err(Error::Shape(
                "perturbation width differs from features".into(),
            ));
        }
        Ok(VulnEvaluator {
            model,
            prop: model.propagator(g),
            x,
            y,
            eps,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Per-node misclassification flags under `τ(X, S)`.
    pub fn misclassified(&self, s: &NodeSet) -> Result<Vec<bool>> {
        let xs = apply_tau(self.x, s, self.eps)?;
        let h = self.model.forward_with(&self.prop, xs.view())?;
        Ok(predict(h.view())
            .into_iter()
            .zip(self.y)
            .map(|(p, &y)| p != y)
            .collect())
    }
}

/// `g_t(S)`: whether `target` is misclassified once `S` is perturbed.
pub fn vulnerable_function(ev: &VulnEvaluator, target: usize, s: &NodeSet) -> Result<bool> {
    if target >= ev.n() {
        return Err(Error::NodeOutOfRange {
            node: target,
            n: ev.n(),
        });
    }
    Ok(ev.misclassified(s)?[target])
}

/// `h(S)`: mean of `g_t(S)` over `targets`.
pub fn misclassification_rate(ev: &VulnEvaluator, targets: &NodeSet, s: &NodeSet) -> Result<f64> {
    targets.check_range(ev.n())?;
    if targets.is_empty() {
        return Err(Error::InvalidInput("no target nodes".into()));
    }
    let flags = ev.misclassified(s)?;
    Ok(targets.iter().filter(|&t| flags[t]).count() as f64 / targets.len() as f64)
}

fn check_pool(ev: &VulnEvaluator, pool: &NodeSet) -> Result<()> {
    if pool.len() > MAX_POOL {
        return Err(Error::Capacity(format!(
            "pool of {} nodes exceeds the {MAX_POOL}-node enumeration limit",
            pool.len()
        )));
    }
    pool.check_range(ev.n())
}

/// Misclassification flags of every node for every subset of `pool`,
/// indexed by subset bitmask.
fn enumerate_flags(ev: &VulnEvaluator, pool: &NodeSet) -> Result<Vec<Vec<bool>>> {
    check_pool(ev, pool)?;
    let uni = pool.as_slice();
    (0u32..1 << uni.len())
        .into_par_iter()
        .map(|mask| ev.misclassified(&NodeSet::from_iter_unchecked(subset_of(uni, mask))))
        .collect()
}

/// `A_target` restricted to subsets of `pool`.
pub fn enumerate_vulnerable_set(
    ev: &VulnEvaluator,
    target: usize,
    pool: &NodeSet,
) -> Result<SetFamily> {
    Ok(
        enumerate_vulnerable_sets(ev, &NodeSet::new(vec![target], ev.n())?, pool)?
            .pop()
            .expect("one target"),
    )
}

/// `A_t` for every target, sharing one forward pass per subset.
pub fn enumerate_vulnerable_sets(
    ev: &VulnEvaluator,
    targets: &NodeSet,
    pool: &NodeSet,
) -> Result<Vec<SetFamily>> {
    targets.check_range(ev.n())?;
    let flags = enumerate_flags(ev, pool)?;
    let uni = pool.as_slice();
    targets
        .iter()
        .map(|t| {
            let sets = flags
                .iter()
                .enumerate()
                .filter(|(_, f)| f[t])
                .map(|(mask, _)| subset_of(uni, mask as u32))
                .collect();
            SetFamily::new(uni.to_vec(), sets)
        })
        .collect()
}

/// Both sides of the coverage identity, with the numerators kept as
/// integers so equality is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Check {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_count: usize,
    pub rhs_count: usize,
    pub equal: bool,
}

/// In the singleton regime (`B_j` empty or all singletons) compares the
/// direct rate `(1/N) Σ_j [B_j = ∅ ∨ ∃T ∈ B_j, T ⊆ S]` with the coverage form
/// `(1/N)(|∪_{i∈S} e(i)| + #{j : B_j = ∅})`, `e(i) = {j : {i} ∈ B_j}`.
/// An empty `B_j` stands for a node that is misclassified under every `S`.
pub fn lemma2_identity_check(bs: &[SetFamily], s: &NodeSet) -> Result<Lemma2Check> {
    if bs.is_empty() {
        return Err(Error::InvalidInput("no basic families given".into()));
    }
    if let Some(j) = bs.iter().position(|b| !b.is_singleton_family()) {
        return Err(Error::InvalidInput(format!(
            "basic family of node {j} has a non-singleton member"
        )));
    }
    let n = bs.len();
    let lhs_count = bs
        .iter()
        .filter(|b| b.is_empty() || b.sets.iter().any(|t| is_subset(t, s.as_slice())))
        .count();

    let mut covered = BTreeSet::new();
    for i in s.iter() {
        // e(i)
        covered.extend(
            bs.iter()
                .enumerate()
                .filter(|(_, b)| b.contains(&[i]))
                .map(|(j, _)| j),
        );
    }
    let rhs_count = covered.len() + bs.iter().filter(|b| b.is_empty()).count();
    Ok(Lemma2Check {
        lhs: lhs_count as f64 / n as f64,
        rhs: rhs_count as f64 / n as f64,
        lhs_count,
        rhs_count,
        equal: lhs_count == rhs_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiminishingReturnProfile {
    pub r_values: Vec<usize>,
    pub h: Vec<f64>,
    /// Max over observed `(S ⊂ T, v ∉ T)` of `[h(T∪v) − h(T)] − [h(S∪v) − h(S)]`;
    /// positive values are violations of submodularity.
    pub submodularity_violation: f64,
    pub triples_checked: usize,
}

/// `h` along prefixes of `ranking` of the given sizes. Triples use the
/// prefixes as nested `S ⊂ T` and the next `probes` ranked nodes after `T`
/// as `v`.
pub fn diminishing_return_profile(
    ev: &VulnEvaluator,
    targets: &NodeSet,
    ranking: &[usize],
    r_values: &[usize],
    probes: usize,
) -> Result<DiminishingReturnProfile> {
    if let Some(&r) = r_values.iter().find(|&&r| r > ranking.len()) {
        return Err(Error::InvalidInput(format!(
            "budget {r} exceeds the ranking length {}",
            ranking.len()
        )));
    }
    let prefix = |r: usize| NodeSet::new(ranking[..r].to_vec(), ev.n());
    let h_of = |s: &NodeSet| misclassification_rate(ev, targets, s);
    let h = r_values
        .iter()
        .map(|&r| h_of(&prefix(r)?))
        .collect::<Result<Vec<_>>>()?;

    let mut violation = f64::NEG_INFINITY;
    let mut triples = 0;
    for (a, &ra) in r_values.iter().enumerate() {
        for (b, &rb) in r_values.iter().enumerate() {
            if rb <= ra {
                continue;
            }
            for &v in ranking.iter().skip(rb).take(probes) {
                let with_v = |r: usize| {
                    let mut ids = ranking[..r].to_vec();
                    ids.push(v);
                    NodeSet::new(ids, ev.n())
                };
                let gain_t = h_of(&with_v(rb)?)? - h[b];
                let gain_s = h_of(&with_v(ra)?)? - h[a];
                violation = violation.max(gain_t - gain_s);
                triples += 1;
            }
        }
    }
    Ok(DiminishingReturnProfile {
        r_values: r_values.to_vec(),
        h,
        submodularity_violation: if triples == 0 { 0.0 } else { violation },
        triples_checked: triples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Pairs `(S, S ∪ {v})` times targets.
    pub pairs_checked: usize,
    pub violations: usize,
    pub violation_fraction: f64,
}

/// How often adding a pool node to `S` turns a misclassified target back
/// to correct.
pub fn monotonicity_report(
    ev: &VulnEvaluator,
    targets: &NodeSet,
    pool: &NodeSet,
) -> Result<MonotonicityReport> {
    targets.check_range(ev.n())?;
    let flags = enumerate_flags(ev, pool)?;
    Ok(monotonicity_from_flags(&flags, pool.len(), targets))
}

fn monotonicity_from_flags(
    flags: &[Vec<bool>],
    bits: usize,
    targets: &NodeSet,
) -> MonotonicityReport {
    let mut pairs = 0;
    let mut violations = 0;
    for (mask, f) in flags.iter().enumerate() {
        for b in (0..bits).filter(|b| mask >> b & 1 == 0) {
            let g = &flags[mask | 1 << b];
            for t in targets.iter() {
                pairs += 1;
                if f[t] && !g[t] {
                    violations += 1;
                }
            }
        }
    }
    MonotonicityReport {
        pairs_checked: pairs,
        violations,
        violation_fraction: if pairs == 0 {
            0.0
        } else {
            violations as f64 / pairs as f64
        },
    }
}

/// Empirical homophily and large-perturbation statistics over every `S`
/// with `|S| > 1` that lies in some `A_j`. `b(S)` counts targets with
/// `S ∈ A_j`; `p(S)` is the fraction of those that are already vulnerable
/// to a single node of `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionStats {
    pub sets_considered: usize,
    pub mean_b: f64,
    pub min_b: usize,
    pub mean_p: f64,
    pub min_p: f64,
    /// Fraction of sets with `p(S) > r/(r+1)`.
    pub frac_p_above: f64,
    pub r: usize,
}

pub fn assumption_statistics(families: &[SetFamily], r: usize) -> AssumptionStats {
    let mut union: BTreeSet<&Vec<usize>> = BTreeSet::new();
    for f in families {
        union.extend(f.sets.iter().filter(|s| s.len() > 1));
    }
    let threshold = r as f64 / (r as f64 + 1.0);
    let (mut sum_b, mut min_b, mut sum_p, mut min_p, mut above) =
        (0usize, usize::MAX, 0.0, 1.0f64, 0);
    for s in &union {
        let holders: Vec<&SetFamily> = families.iter().filter(|f| f.contains(s)).collect();
        let b = holders.len();
        let single = holders
            .iter()
            .filter(|f| s.iter().any(|&u| f.contains(&[u])))
            .count();
        let p = single as f64 / b as f64;
        sum_b += b;
        min_b = min_b.min(b);
        sum_p += p;
        min_p = min_p.min(p);
        if p > threshold {
            above += 1;
        }
    }
    let m = union.len();
    AssumptionStats {
        sets_considered: m,
        mean_b: if m == 0 { 0.0 } else { sum_b as f64 / m as f64 },
        min_b: if m == 0 { 0 } else { min_b },
        mean_p: if m == 0 { 0.0 } else { sum_p / m as f64 },
        min_p: if m == 0 { 0.0 } else { min_p },
        frac_p_above: if m == 0 { 0.0 } else { above as f64 / m as f64 },
        r,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub target: usize,
    pub vulnerable: SetFamily,
    /// `None` when the family is not upward closed.
    pub basic: Option<SetFamily>,
    pub basic_conditions_hold: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub pool: NodeSet,
    pub targets: Vec<TargetReport>,
    pub monotonicity: MonotonicityReport,
    pub assumptions: AssumptionStats,
    pub singleton_regime: bool,
    /// Identity checked for every subset of the pool, in the singleton regime.
    pub lemma2_all_equal: Option<bool>,
}

/// Full enumeration over `pool` for every target.
pub fn run_oracle(
    ev: &VulnEvaluator,
    targets: &NodeSet,
    pool: &NodeSet,
    r: usize,
) -> Result<OracleReport> {
    targets.check_range(ev.n())?;
    let flags = enumerate_flags(ev, pool)?;
    let uni = pool.as_slice();
    let mut reports = Vec::with_capacity(targets.len());
    for t in targets.iter() {
        let sets = flags
            .iter()
            .enumerate()
            .filter(|(_, f)| f[t])
            .map(|(mask, _)| subset_of(uni, mask as u32))
            .collect();
        let vulnerable = SetFamily::new(uni.to_vec(), sets)?;
        let basic = basic_vulnerable_set(&vulnerable).ok();
        let basic_conditions_hold = basic
            .as_ref()
            .map(|b| satisfies_basic_conditions(&vulnerable, b));
        reports.push(TargetReport {
            target: t,
            vulnerable,
            basic,
            basic_conditions_hold,
        });
    }
    let families: Vec<SetFamily> = reports.iter().map(|r| r.vulnerable.clone()).collect();
    let basics: Option<Vec<SetFamily>> = reports.iter().map(|r| r.basic.clone()).collect();
    // A_j = ∅ has no misclassifying set at all, which the identity does not model.
    let singleton_regime = basics.as_ref().is_some_and(|bs| {
        bs.iter().all(SetFamily::is_singleton_family)
            && reports.iter().all(|r| !r.vulnerable.is_empty())
    });
    let lemma2_all_equal = if singleton_regime {
        let bs = basics.expect("checked above");
        let mut all = true;
        for mask in 0u32..1 << uni.len() {
            let s = NodeSet::from_iter_unchecked(subset_of(uni, mask));
            all &= lemma2_identity_check(&bs, &s)?.equal;
        }
        Some(all)
    } else {
        None
    };
    Ok(OracleReport {
        pool: pool.clone(),
        targets: reports,
        monotonicity: monotonicity_from_flags(&flags, uni.len(), targets),
        assumptions: assumption_statistics(&families, r),
        singleton_regime,
        lemma2_all_equal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::{evaluate_attack, GcnConfig, Layer, Normalization};
    use crate::graph::fixtures::path;
    use ndarray::{array, Array1};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fam(n: usize, sets: &[&[usize]]) -> SetFamily {
        SetFamily::over_ground(n, sets.iter().map(|s| s.to_vec()).collect()).unwrap()
    }

    /// One-layer mean GCN on the path 0-1-2: node 0 flips once its
    /// aggregated feature exceeds 1/4.
    fn path_fixture() -> (Graph, GcnModel, FeatureMatrix, Vec<usize>, Epsilon) {
        let cfg = GcnConfig {
            layers: 1,
            normalization: Normalization::Mean,
            ..GcnConfig::default()
        };
        let model = GcnModel::from_layers(
            vec![Layer {
                weight: array![[-1.0, 1.0]],
                bias: Array1::from(vec![0.25, -0.25]),
            }],
            cfg,
        )
        .unwrap();
        let x = FeatureMatrix::new(ndarray::Array2::zeros((3, 1))).unwrap();
        let eps = Epsilon::from_direction(vec![1.0], 1.0).unwrap();
        (path(3), model, x, vec![0, 0, 0], eps)
    }

    #[test]
    fn family_validation_and_lookup() {
        assert!(SetFamily::over_ground(3, vec![vec![3]]).is_err());
        assert!(SetFamily::over_ground(3, vec![vec![1], vec![1]]).is_err());
        assert!(SetFamily::over_ground(3, vec![vec![1, 1]]).is_err());
        let f = fam(3, &[&[2, 0], &[1]]);
        assert_eq!(f.sets(), &[vec![1], vec![0, 2]]);
        assert!(f.contains(&[0, 2]) && f.contains(&[2, 0]) && !f.contains(&[0]));
    }

    #[test]
    fn basic_set_examples() {
        let a = SetFamily::upward_closure((0..4).collect(), &[vec![1]]).unwrap();
        assert_eq!(basic_vulnerable_set(&a).unwrap().sets(), &[vec![1]]);

        let all = SetFamily::upward_closure((0..3).collect(), &[vec![]]).unwrap();
        assert_eq!(all.len(), 8);
        assert!(basic_vulnerable_set(&all).unwrap().is_empty());

        let a = SetFamily::upward_closure((0..4).collect(), &[vec![1, 2], vec![2, 3]]).unwrap();
        assert_eq!(
            basic_vulnerable_set(&a).unwrap().sets(),
            &[vec![1, 2], vec![2, 3]]
        );

        assert!(basic_vulnerable_set(&fam(3, &[&[1]])).is_err());
        assert!(basic_vulnerable_set(&fam(3, &[])).unwrap().is_empty());
    }

    #[test]
    fn lemma2_examples() {
        let selfish: Vec<SetFamily> = (0..4).map(|i| fam(4, &[&[i]])).collect();
        for mask in 0u32..16 {
            let s = NodeSet::from_iter_unchecked(subset_of(&[0, 1, 2, 3], mask));
            let c = lemma2_identity_check(&selfish, &s).unwrap();
            assert!(c.equal);
            assert_eq!(c.lhs, s.len() as f64 / 4.0);
        }
        let always: Vec<SetFamily> = (0..3).map(|_| fam(3, &[])).collect();
        let c = lemma2_identity_check(&always, &NodeSet::empty()).unwrap();
        assert_eq!((c.lhs, c.rhs), (1.0, 1.0));

        // targets 1..=4 stored at positions 0..=3: e(1) = {1, 2}, e(3) = {2, 4}
        let bs = vec![
            fam(5, &[&[1]]),
            fam(5, &[&[1], &[3]]),
            fam(5, &[&[0]]),
            fam(5, &[&[3]]),
        ];
        let c = lemma2_identity_check(&bs, &NodeSet::from_iter_unchecked([1, 3])).unwrap();
        assert_eq!((c.lhs_count, c.rhs_count), (3, 3));
        assert_eq!(c.lhs, 0.75);

        assert!(lemma2_identity_check(&[fam(3, &[&[0, 1]])], &NodeSet::empty()).is_err());
    }

    #[test]
    fn analytic_path_instance() {
        let (g, model, x, y, eps) = path_fixture();
        let ev = VulnEvaluator::new(&model, &g, &x, &y, &eps).unwrap();
        let one = NodeSet::from_iter_unchecked([1]);
        assert!(!vulnerable_function(&ev, 0, &NodeSet::empty()).unwrap());
        assert!(vulnerable_function(&ev, 0, &one).unwrap());
        assert!(!vulnerable_function(&ev, 0, &NodeSet::from_iter_unchecked([2])).unwrap());

        let pool = NodeSet::from_iter_unchecked([1, 2]);
        let a = enumerate_vulnerable_set(&ev, 0, &pool).unwrap();
        assert_eq!(a.sets(), &[vec![1], vec![1, 2]]);
        assert_eq!(basic_vulnerable_set(&a).unwrap().sets(), &[vec![1]]);
    }

    #[test]
    fn receptive_field_locality() {
        let g = path(6);
        let model = GcnModel::init(
            2,
            2,
            &GcnConfig {
                layers: 2,
                hidden: 4,
                seed: 3,
                ..GcnConfig::default()
            },
        )
        .unwrap();
        let x = FeatureMatrix::new(ndarray::Array2::from_elem((6, 2), 0.3)).unwrap();
        let y = vec![0; 6];
        let eps = Epsilon::from_direction(vec![1.0, -1.0], 50.0).unwrap();
        let ev = VulnEvaluator::new(&model, &g, &x, &y, &eps).unwrap();
        let far = NodeSet::from_iter_unchecked([3, 4, 5]);
        assert_eq!(
            vulnerable_function(&ev, 0, &far).unwrap(),
            vulnerable_function(&ev, 0, &NodeSet::empty()).unwrap()
        );
    }

    #[test]
    fn always_and_never_misclassified_targets() {
        let (g, model, x, _, eps) = path_fixture();
        // label 1 at node 2: predicted 0 at S = ∅ and nothing in {0} reaches it
        let y = vec![0, 0, 1];
        let ev = VulnEvaluator::new(&model, &g, &x, &y, &eps).unwrap();
        let pool = NodeSet::from_iter_unchecked([0]);
        let a = enumerate_vulnerable_set(&ev, 2, &pool).unwrap();
        assert_eq!(a.len(), 2);
        assert!(basic_vulnerable_set(&a).unwrap().is_empty());
        let a = enumerate_vulnerable_set(&ev, 0, &NodeSet::from_iter_unchecked([2])).unwrap();
        assert!(a.is_empty());
    }

    #[test]
    fn pool_capacity() {
        let (g, model, x, y, eps) = path_fixture();
        let ev = VulnEvaluator::new(&model, &g, &x, &y, &eps).unwrap();
        let big = NodeSet::from_iter_unchecked(0..16);
        assert!(matches!(
            enumerate_vulnerable_set(&ev, 0, &big),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn rate_matches_attacked_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Graph::from_edges(
            12,
            (0..20).map(|_| (rng.random_range(0..12), rng.random_range(0..12))),
        )
        .unwrap();
        let model = GcnModel::init(
            3,
            3,
            &GcnConfig {
                seed: 4,
                ..GcnConfig::default()
            },
        )
        .unwrap();
        let x = FeatureMatrix::new(ndarray::Array2::from_shape_simple_fn((12, 3), || {
            rng.random_range(-1.0..1.0)
        }))
        .unwrap();
        let y: Vec<usize> = (0..12).map(|_| rng.random_range(0..3)).collect();
        let eps = Epsilon::from_direction(vec![1.0, 0.0, -1.0], 3.0).unwrap();
        let ev = VulnEvaluator::new(&model, &g, &x, &y, &eps).unwrap();
        let targets = NodeSet::from_iter_unchecked(0..12);
        let s = NodeSet::from_iter_unchecked([2, 5]);
        let h = misclassification_rate(&ev, &targets, &s).unwrap();
        let mask: Vec<usize> = (0..12).collect();
        let m = evaluate_attack(&model, &g, &x, &y, &s, &eps, &mask).unwrap();
        assert!((h - (1.0 - m.acc_attacked)).abs() < 1e-12);
    }

    #[test]
    fn profile_on_path_fixture() {
        let (g, model, x, y, eps) = path_fixture();
        let ev = VulnEvaluator::new(&model, &g, &x, &y, &eps).unwrap();
        let targets = NodeSet::from_iter_unchecked(0..3);
        let p = diminishing_return_profile(&ev, &targets, &[1, 0, 2], &[0, 1, 2], 1).unwrap();
        assert_eq!(p.h[0], 0.0);
        assert!(p.h.windows(2).all(|w| w[0] <= w[1]));
        assert!(p.triples_checked > 0);
    }

    #[test]
    fn oracle_report_on_path_fixture() {
        let (g, model, x, y, eps) = path_fixture();
        let ev = VulnEvaluator::new(&model, &g, &x, &y, &eps).unwrap();
        let rep = run_oracle(
            &ev,
            &NodeSet::from_iter_unchecked(0..3),
            &NodeSet::from_iter_unchecked(0..3),
            1,
        )
        .unwrap();
        assert_eq!(rep.monotonicity.violations, 0);
        assert!(rep
            .targets
            .iter()
            .all(|t| t.basic_conditions_hold == Some(true)));
        let text = serde_json::to_string(&rep).unwrap();
        assert_eq!(serde_json::from_str::<OracleReport>(&text).unwrap(), rep);
    }

    #[test]
    fn assumption_statistics_by_hand() {
        // {0,1} vulnerable for targets 0 and 1; only target 0 also has {0}
        let fams = vec![
            SetFamily::upward_closure(vec![0, 1], &[vec![0]]).unwrap(),
            fam(2, &[&[0, 1]]),
        ];
        let st = assumption_statistics(&fams, 1);
        assert_eq!(st.sets_considered, 1);
        assert_eq!(st.min_b, 2);
        assert_eq!(st.mean_p, 0.5);
        assert_eq!(st.frac_p_above, 0.0);
    }

    fn random_antichain(rng: &mut ChaCha8Rng, ground: usize) -> Vec<Vec<usize>> {
        let mut gens: Vec<Vec<usize>> = Vec::new();
        for _ in 0..rng.random_range(0..5) {
            let s: Vec<usize> = (0..ground).filter(|_| rng.random_bool(0.35)).collect();
            if s.is_empty() {
                continue;
            }
            if gens.iter().all(|g| !is_subset(g, &s) && !is_subset(&s, g)) {
                gens.push(s);
            }
        }
        gens
    }

    #[test]
    fn basic_sets_on_random_monotone_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let ground = rng.random_range(1..=10);
            let gens = random_antichain(&mut rng, ground);
            let a = SetFamily::upward_closure((0..ground).collect(), &gens).unwrap();
            let b = basic_vulnerable_set(&a).unwrap();
            assert!(satisfies_basic_conditions(&a, &b));
            let mut want = gens.clone();
            canonical(&mut want);
            assert_eq!(b.sets(), want.as_slice());

            let mut shuffled = a.sets().to_vec();
            shuffled.shuffle(&mut rng);
            let again = SetFamily::new(a.universe().to_vec(), shuffled).unwrap();
            assert_eq!(basic_vulnerable_set(&again).unwrap(), b);
        }
    }

    proptest! {
        #[test]
        fn lemma2_exhaustive_small_ground(
            ground in 1usize..=5,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bs: Vec<SetFamily> = (0..ground)
                .map(|_| {
                    let sets: Vec<Vec<usize>> =
                        (0..ground).filter(|_| rng.random_bool(0.4)).map(|i| vec![i]).collect();
                    SetFamily::over_ground(ground, sets).unwrap()
                })
                .collect();
            let uni: Vec<usize> = (0..ground).collect();
            for s in subsets(&uni) {
                let c = lemma2_identity_check(&bs, &NodeSet::from_iter_unchecked(s)).unwrap();
                prop_assert!(c.equal);
            }
        }
    }
}

use ndarray::{Array2, Axis};

use rwcs_core::centrality::rwcs_score_vector;
use rwcs_core::experiment::{epsilon_for, importance_vector, Dataset, EpsilonSource};
use rwcs_core::gcn::{
    accuracy, first_order_deltas, loss_and_grad, output_pullback, train, LossKind, SplitSpec,
};
use rwcs_core::selector::{degree_threshold, select_top_r};
use rwcs_core::synth::SynthSpec;
use rwcs_core::theory::{diminishing_return_profile, VulnEvaluator};
use rwcs_core::{rwcs_scores, GcnConfig, NodeSet, Normalization, SelectionConstraints};

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut c, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        c += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    c / (va * vb).sqrt()
}

fn small_scale(n: usize, seed: u64) -> SynthSpec {
    SynthSpec {
        n,
        seed,
        feature_scale: 0.1,
        ..SynthSpec::default()
    }
}

#[test]
fn two_layer_gcn_learns_the_synthetic_labels() {
    let mut accs = Vec::new();
    for seed in 0..3 {
        let data = Dataset::synthetic(&SynthSpec {
            seed,
            ..SynthSpec::default()
        })
        .unwrap();
        let split = SplitSpec::standard(data.n(), seed).unwrap();
        let cfg = GcnConfig {
            seed,
            ..GcnConfig::default()
        };
        let model = train(&data.graph, &data.x, &data.y, &split, &cfg).unwrap();
        let h = model.forward(&data.graph, &data.x).unwrap();
        accs.push(accuracy(h.view(), &data.y, &split.test).unwrap());
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!(
        mean >= 0.786,
        "mean clean test accuracy {mean:.3} ({accs:?})"
    );
}

/// Pulls the mean CW subgradient back through the model for every node and
/// compares the resulting first-order change with RWCS of matching length.
/// The sign of the common factor is estimated from the data.
#[test]
fn expected_first_order_change_tracks_rwcs() {
    let n = 1000;
    for layers in [1, 2] {
        for seed in 0..3 {
            let data = Dataset::synthetic(&small_scale(n, seed)).unwrap();
            let split = SplitSpec::standard(n, seed).unwrap();
            let cfg = GcnConfig {
                layers,
                normalization: Normalization::Mean,
                seed,
                ..GcnConfig::default()
            };
            let model = train(&data.graph, &data.x, &data.y, &split, &cfg).unwrap();
            let imp = importance_vector(&EpsilonSource::Disclosed, &model, &data).unwrap();
            let e = epsilon_for(&EpsilonSource::Disclosed, &imp, 0.02, 1.0).unwrap();

            let logits = model.forward(&data.graph, &data.x).unwrap();
            let all: Vec<usize> = (0..n).collect();
            let (_, a) = loss_and_grad(LossKind::Cw, logits.view(), &data.y, &all).unwrap();
            let c = a.mean_axis(Axis(0)).unwrap();
            let rows = Array2::from_shape_fn((n, c.len()), |(_, k)| c[k]);
            let grad = output_pullback(&model, &data.graph, &data.x, &rows).unwrap();
            let delta = first_order_deltas(&grad, &e).unwrap();
            let sign = delta.iter().sum::<f64>().signum();
            let signed: Vec<f64> = delta.iter().map(|d| sign * d).collect();

            let rwcs = rwcs_scores(&data.graph, layers).unwrap();
            let rho = spearman(&signed, &rwcs);
            let floor = if layers == 1 { 0.999 } else { 0.9 };
            assert!(
                rho > floor,
                "layers {layers}, seed {seed}: spearman {rho:.4}"
            );
        }
    }
}

/// Saturation shows once the budget is a few percent of the graph; at 1%
/// the per-node gains of consecutive RWCS picks are still flat.
#[test]
fn rwcs_gain_saturates_over_the_budget() {
    let n = 3000;
    let (mut first, mut second) = (0.0, 0.0);
    for seed in 0..3 {
        let data = Dataset::synthetic(&small_scale(n, seed)).unwrap();
        let split = SplitSpec::standard(n, seed).unwrap();
        let cfg = GcnConfig {
            seed,
            ..GcnConfig::default()
        };
        let model = train(&data.graph, &data.x, &data.y, &split, &cfg).unwrap();
        let imp = importance_vector(&EpsilonSource::Disclosed, &model, &data).unwrap();
        let e = epsilon_for(&EpsilonSource::Disclosed, &imp, 0.02, 1.0).unwrap();

        let c = SelectionConstraints {
            budget: 8 * n / 100,
            max_degree: degree_threshold(&data.graph, 10.0).unwrap(),
            hops: 1,
        };
        let scores = rwcs_score_vector(&data.graph, 4).unwrap();
        let ranking = select_top_r(&scores, &data.graph, &c).unwrap().order;
        let ev = VulnEvaluator::new(&model, &data.graph, &data.x, &data.y, &e).unwrap();
        let targets = NodeSet::new(split.test.clone(), n).unwrap();
        let r = ranking.len();
        let profile =
            diminishing_return_profile(&ev, &targets, &ranking, &[0, r / 2, r], 0).unwrap();
        first += profile.h[1] - profile.h[0];
        second += profile.h[2] - profile.h[1];
    }
    assert!(first > 0.0, "no gain from the first half");
    assert!(
        second < first,
        "second-half gain {second:.4} vs first-half {first:.4}"
    );
}

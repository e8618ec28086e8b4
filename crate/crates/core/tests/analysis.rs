use polylab_core::analysis::{
    classify_collisions, count_polysemantic, expected_collisions, feature_assignments, predicted_l1,
    predicted_m_prime, relative_variance_bounds, CollisionKind,
};
use polylab_core::l1::{loss_l1, L1Trainer};
use polylab_core::matrix::init_weights;
use polylab_core::metrics::slice_metrics;
use polylab_core::noisy::clean_loss;
use polylab_core::rng::{stream, Stream};
use polylab_core::surgery::split_neuron;
use polylab_core::{Error, ModelConfig, WeightMatrix};
use proptest::prelude::*;

#[test]
fn mean_colliding_pairs_matches_birthday_count() {
    let (n, m) = (32, 256);
    let seeds = 1000;
    let counts: Vec<f64> = (0..seeds)
        .map(|seed| {
            let cfg = ModelConfig { n, m, seed, ..Default::default() };
            let w = init_weights(&cfg, &mut stream(seed, Stream::Init));
            classify_collisions(&w).unwrap().collisions.len() as f64
        })
        .collect();
    let k = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / k;
    let sd = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    let expected = expected_collisions(n, m);
    assert_eq!(expected, 1.9375);
    assert!((mean - expected).abs() <= 3.0 * sd / k.sqrt(), "{mean} vs {expected}");
}

#[test]
fn single_neuron_collisions_are_benign_half_the_time() {
    let trials = 10_000u64;
    let mut benign = 0;
    for seed in 0..trials {
        let cfg = ModelConfig { n: 2, m: 1, seed, ..Default::default() };
        let w = init_weights(&cfg, &mut stream(seed, Stream::Init));
        let r = classify_collisions(&w).unwrap();
        assert_eq!(r.collisions.len(), 1);
        if r.collisions[0].kind == CollisionKind::Benign {
            benign += 1;
        }
    }
    let p = benign as f64 / trials as f64;
    let se = (0.25 / trials as f64).sqrt();
    assert!((p - 0.5).abs() <= 3.0 * se, "{p}");
}

#[test]
fn feature_assignment_rejects_zero_rows() {
    let w = WeightMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
    assert!(matches!(feature_assignments(&w), Err(Error::ZeroRow { row: 1 })));
}

#[test]
fn polysemantic_count_on_hand_matrix() {
    let w = WeightMatrix::from_rows(&[[0.99, 0.0, 0.0], [-0.98, 0.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
    let pc = count_polysemantic(&w, 0.5);
    assert_eq!(pc.count, 1);
    assert_eq!(pc.polysemantic().next(), Some(&(0, vec![0, 1])));
}

/// First step at which the support of a single interference-free row drops
/// to `target` or below.
fn crossing_times(m: usize, lambda: f64, eta: f64, targets: &[usize]) -> Vec<f64> {
    let cfg = ModelConfig { n: 1, m, lambda, eta, interference_enabled: false, seed: 1, ..Default::default() };
    let mut tr = L1Trainer::new(&cfg, init_weights(&cfg, &mut stream(1, Stream::Init))).unwrap();
    let mut out = Vec::new();
    for &target in targets {
        while tr.support_len(0) > target {
            tr.step().unwrap();
        }
        out.push(tr.time());
    }
    out
}

#[test]
fn support_crosses_each_decade_near_prediction() {
    let (m, lambda) = (10_000, 1e-4);
    let targets = [1000, 100, 10, 1];
    let times = crossing_times(m, lambda, 0.1, &targets);
    for (&target, &t) in targets.iter().zip(&times) {
        // Predicted m' = (1 / (lambda t))^2 reaches `target` at:
        let predicted = 1.0 / (lambda * (target as f64).sqrt());
        let ratio = t / predicted;
        assert!((1.0 / 3.0..=3.0).contains(&ratio), "m' = {target}: t = {t}, predicted {predicted}");
        assert!(predicted_m_prime(predicted, m, lambda) - target as f64 <= 1e-6 * target as f64);
    }
}

#[test]
fn relative_variance_stays_inside_brackets_along_a_run() {
    let cfg = ModelConfig { n: 1, m: 10_000, lambda: 1e-3, eta: 0.1, interference_enabled: false, seed: 5, ..Default::default() };
    let w0 = init_weights(&cfg, &mut stream(5, Stream::Init));
    let mut tr = L1Trainer::new(&cfg, w0.clone()).unwrap();
    let mut checked = 0;
    while tr.support_len(0) >= 2 {
        tr.step().unwrap();
        if !tr.step_count().is_multiple_of(25) {
            continue;
        }
        let row = tr.weights().row(0);
        let metrics = slice_metrics(row, 0.0);
        let Some(rv) = metrics.relative_variance else { continue };
        let (lo, hi) = relative_variance_bounds(w0.row(0), metrics.nonzero_count).unwrap();
        assert!(rv >= lo * (1.0 - 1e-9) && rv <= hi * (1.0 + 1e-9) + 1e-12, "m' {}: {lo} <= {rv} <= {hi}", metrics.nonzero_count);
        checked += 1;
    }
    assert!(checked > 20);
}

#[test]
fn split_preserves_both_losses_without_perturbation() {
    let cfg = ModelConfig { n: 6, m: 5, seed: 3, ..Default::default() };
    let w = init_weights(&cfg, &mut stream(3, Stream::Init));
    for k in 0..5 {
        let s = split_neuron(&w, k, 0.0, &mut stream(3, Stream::Split)).unwrap();
        assert_eq!(s.cols(), 6);
        let (a, b) = (w.gram(), s.gram());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((loss_l1(&w, 0.0) - loss_l1(&s, 0.0)).abs() < 1e-12);
        assert!((clean_loss(&w) - clean_loss(&s)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn collisions_ignore_positive_rescaling(seed in 0u64..10_000, scale in 1e-3f64..1e3) {
        let cfg = ModelConfig { n: 12, m: 10, seed, ..Default::default() };
        let w = init_weights(&cfg, &mut stream(seed, Stream::Init));
        let scaled = WeightMatrix::from_vec(12, 10, w.as_slice().iter().map(|x| x * scale).collect()).unwrap();
        let a = classify_collisions(&w).unwrap();
        let b = classify_collisions(&scaled).unwrap();
        prop_assert_eq!(a.collisions, b.collisions);
    }

    #[test]
    fn predicted_curve_is_monotone_and_bounded(m in 1usize..1_000_000, lambda in 1e-7f64..1.0, t0 in 0.0f64..1e7, dt in 0.0f64..1e7) {
        let a = predicted_l1(t0, m, lambda);
        let b = predicted_l1(t0 + dt, m, lambda);
        prop_assert!(b <= a);
        prop_assert!(b >= 1.0 - 1e-12);
        prop_assert!(a <= (m as f64).sqrt() * (1.0 + 1e-12));
    }
}

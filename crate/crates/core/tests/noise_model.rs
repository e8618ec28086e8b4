use polylab_core::matrix::init_weights;
use polylab_core::noise::sample_noise;
use polylab_core::noisy::{
    analytic_cross_moment, analytic_fourth_moment, clean_loss, forward_noisy, grad_noisy, implicit_reg_term,
    train_noisy, train_noisy_from,
};
use polylab_core::rng::{stream, Rng, Stream};
use polylab_core::{Error, ModelConfig, NoiseSpec, RecordSchedule, WeightMatrix};
use rand_distr::{Distribution, Normal, StandardNormal};

fn random_matrix(n: usize, m: usize, std: f64, rng: &mut Rng) -> WeightMatrix {
    let d = Normal::new(0.0, std).unwrap();
    let data = (0..n * m).map(|_| d.sample(rng)).collect();
    WeightMatrix::from_vec(n, m, data).unwrap()
}

fn unit_row(m: usize, rng: &mut Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / s).collect()
}

/// Random orthogonal matrix by Gram-Schmidt on Gaussian columns, row-major.
fn random_rotation(m: usize, rng: &mut Rng) -> Vec<f64> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < m {
        let mut v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        for u in &q {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        q.push(v.into_iter().map(|x| x / s).collect());
    }
    q.concat()
}

fn loss_oracle(w: &WeightMatrix, i: usize, xi: &[f64]) -> f64 {
    let (n, m) = (w.rows(), w.cols());
    let mut total = 0.0;
    for j in 0..n {
        let mut z = 0.0;
        for k in 0..m {
            z += w[(j, k)] * (w[(i, k)] + xi[k]);
        }
        let target = if j == i { 1.0 } else { 0.0 };
        total += (z.max(0.0) - target).powi(2);
    }
    total
}

#[test]
fn perfect_reconstruction_without_noise() {
    let w = WeightMatrix::basis(3, 5);
    for i in 0..3 {
        let r = forward_noisy(&w, i, &[0.0; 5]).unwrap();
        let mut e = vec![0.0; 3];
        e[i] = 1.0;
        assert_eq!(r.y, e);
        assert_eq!(r.loss, 0.0);
    }
}

#[test]
fn scalar_forward_by_hand() {
    let w = WeightMatrix::from_rows(&[[1.0]]).unwrap();
    let r = forward_noisy(&w, 0, &[0.1]).unwrap();
    assert!((r.y[0] - 1.1).abs() < 1e-15);
    assert!((r.loss - 0.01).abs() < 1e-15);
    assert_eq!(r.h, [1.1]);
}

#[test]
fn forward_rejects_wrong_noise_length() {
    let w = WeightMatrix::basis(2, 3);
    assert!(matches!(
        forward_noisy(&w, 0, &[0.0; 2]),
        Err(Error::DimensionMismatch { expected: 3, got: 2 })
    ));
}

#[test]
fn forward_matches_loop_oracle() {
    let mut rng = stream(1, Stream::Aux(0));
    for _ in 0..50 {
        let w = random_matrix(6, 9, 0.4, &mut rng);
        let xi = sample_noise(&NoiseSpec::Gaussian { sigma: 0.3 }, 9, &mut rng);
        for i in 0..6 {
            let r = forward_noisy(&w, i, &xi).unwrap();
            assert!(r.y.iter().all(|&v| v >= 0.0));
            assert!(r.z.iter().zip(&r.y).all(|(z, y)| *z > 0.0 || *y == 0.0));
            let o = loss_oracle(&w, i, &xi);
            assert!((r.loss - o).abs() <= 1e-12 * o.max(1e-300), "{} vs {o}", r.loss);
        }
    }
}

#[test]
fn gradient_vanishes_at_solution_without_noise() {
    let w = WeightMatrix::basis(4, 6);
    for i in 0..4 {
        let g = grad_noisy(&w, i, &[0.0; 6]).unwrap();
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }
}

#[test]
fn single_active_output_gradient_has_closed_form() {
    // Three unit rows 120 degrees apart: every cross pre-activation is near
    // -1/2, so with small noise only output i is active.
    let m = 8;
    let mut rows = vec![vec![0.0; m]; 3];
    for (r, a) in rows.iter_mut().zip([0.0f64, 120.0, 240.0]) {
        r[0] = a.to_radians().cos();
        r[1] = a.to_radians().sin();
    }
    let w = WeightMatrix::from_rows(&rows).unwrap();
    let mut rng = stream(2, Stream::Aux(0));
    let spec = NoiseSpec::Gaussian { sigma: 0.05 };
    for _ in 0..100 {
        let xi = sample_noise(&spec, m, &mut rng);
        for i in 0..3 {
            let fwd = forward_noisy(&w, i, &xi).unwrap();
            assert!((0..3).all(|j| j == i || fwd.z[j] < 0.0));
            let g = grad_noisy(&w, i, &xi).unwrap();
            let wi = w.row(i);
            let p: f64 = wi.iter().zip(&xi).map(|(a, b)| a * b).sum();
            for j in 0..3 {
                for k in 0..m {
                    let expected = if j == i { 2.0 * p * (2.0 * wi[k] + xi[k]) } else { 0.0 };
                    assert!((g[(j, k)] - expected).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    let h = 1e-6;
    let mut rng = stream(3, Stream::Aux(0));
    let mut checked = 0;
    while checked < 40 {
        let w = random_matrix(5, 7, 0.5, &mut rng);
        let xi = sample_noise(&NoiseSpec::Gaussian { sigma: 0.2 }, 7, &mut rng);
        let i = checked % 5;
        let fwd = forward_noisy(&w, i, &xi).unwrap();
        if fwd.z.iter().any(|z| z.abs() < 1e-4) {
            continue;
        }
        checked += 1;
        let g = grad_noisy(&w, i, &xi).unwrap();
        let mut fd = Vec::with_capacity(35);
        for idx in 0..35 {
            let mut plus = w.clone();
            plus.as_mut_slice()[idx] += h;
            let mut minus = w.clone();
            minus.as_mut_slice()[idx] -= h;
            let lp = forward_noisy(&plus, i, &xi).unwrap().loss;
            let lm = forward_noisy(&minus, i, &xi).unwrap().loss;
            fd.push((lp - lm) / (2.0 * h));
        }
        let diff: f64 = g.as_slice().iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = fd.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(diff <= 1e-5 * norm.max(1e-12), "relative error {}", diff / norm);
    }
}

#[test]
fn moment_formulas_on_degenerate_rows() {
    let sigma: f64 = 0.3;
    let s4 = sigma.powi(4);
    let g = NoiseSpec::Gaussian { sigma };
    let row = [0.3, -0.4, 0.5, 0.1];
    let l2 = row.iter().map(|x| x * x).sum::<f64>();
    assert!((analytic_fourth_moment(&row, &g) - 3.0 * s4 * l2 * l2).abs() < 1e-15);
    let b = NoiseSpec::Bipolar { sigma };
    assert!((analytic_fourth_moment(&[1.0, 0.0, 0.0], &b) - s4).abs() < 1e-15);
    assert!((analytic_cross_moment(&[1.0], &b) - s4).abs() < 1e-15);
    let unit = NoiseSpec::Gaussian { sigma: 1.0 };
    assert!((analytic_cross_moment(&[0.6, 0.8], &unit) - 4.0).abs() < 1e-12);
}

/// Mean and standard error of `f` over `samples` noise draws.
fn monte_carlo(spec: &NoiseSpec, m: usize, samples: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let mut rng = stream(seed, Stream::Aux(7));
    let mut xi = vec![0.0; m];
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        spec.fill(&mut rng, &mut xi);
        let v = f(&xi);
        s += v;
        s2 += v * v;
    }
    let n = samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn fourth_moment_matches_monte_carlo_uniform() {
    let spec = NoiseSpec::Uniform { half_width: 1.0 };
    let row = unit_row(8, &mut stream(4, Stream::Aux(0)));
    let (mean, se) = monte_carlo(&spec, 8, 10_000_000, 4, |xi| {
        let p: f64 = row.iter().zip(xi).map(|(a, b)| a * b).sum();
        p.powi(4)
    });
    let exact = analytic_fourth_moment(&row, &spec);
    assert!((mean - exact).abs() <= 4.0 * se, "{mean} vs {exact} (se {se})");
}

#[test]
fn cross_moment_matches_monte_carlo_bipolar() {
    let spec = NoiseSpec::Bipolar { sigma: 0.5 };
    let row: Vec<f64> = {
        let mut rng = stream(5, Stream::Aux(0));
        (0..16).map(|_| StandardNormal.sample(&mut rng)).collect()
    };
    let (mean, se) = monte_carlo(&spec, 16, 1_000_000, 5, |xi| {
        let p: f64 = row.iter().zip(xi).map(|(a, b)| a * b).sum();
        p * p * xi.iter().map(|x| x * x).sum::<f64>()
    });
    let exact = analytic_cross_moment(&row, &spec);
    assert!((mean - exact).abs() <= 4.0 * se, "{mean} vs {exact} (se {se})");
}

#[test]
fn implicit_regularization_values() {
    let eta = 0.05;
    let sigma: f64 = 0.2;
    let mut rng = stream(6, Stream::Aux(0));
    for _ in 0..10 {
        let row = unit_row(16, &mut rng);
        assert_eq!(implicit_reg_term(&row, &NoiseSpec::Gaussian { sigma }, eta), 0.0);
    }
    let one_hot = [0.0, 1.0, 0.0];
    let v = implicit_reg_term(&one_hot, &NoiseSpec::Bipolar { sigma }, eta);
    assert!((v + 32.0 * eta * eta * sigma.powi(4)).abs() < 1e-18);
}

#[test]
fn noiseless_solution_is_a_fixed_point() {
    let cfg = ModelConfig { n: 4, m: 6, eta: 0.1, steps: 200, noise: NoiseSpec::None, ..Default::default() };
    let w0 = WeightMatrix::basis(4, 6);
    let (w, trace) = train_noisy_from(&cfg, w0.clone()).unwrap();
    assert_eq!(w, w0);
    assert!(trace.records.iter().all(|r| r.loss == 0.0));
}

#[test]
fn noise_model_rejects_l1_penalty() {
    let cfg = ModelConfig { lambda: 0.1, steps: 1, noise: NoiseSpec::Gaussian { sigma: 0.1 }, ..Default::default() };
    assert!(matches!(train_noisy(&cfg), Err(Error::InvalidConfig(_))));
}

#[test]
fn noisy_training_is_reproducible() {
    let cfg = ModelConfig { eta: 0.05, steps: 300, noise: NoiseSpec::Bipolar { sigma: 0.2 }, seed: 11, ..Default::default() };
    let a = train_noisy(&cfg).unwrap();
    let b = train_noisy(&cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gaussian_training_commutes_with_hidden_rotations() {
    // Rotating the start by R and every noise draw by R rotates the whole
    // trajectory by R.
    let (n, m, eta) = (5, 8, 0.05);
    let spec = NoiseSpec::Gaussian { sigma: 0.2 };
    let mut rng = stream(8, Stream::Aux(0));
    let r = random_rotation(m, &mut rng);
    let cfg = ModelConfig { n, m, ..Default::default() };
    let mut w = init_weights(&cfg, &mut stream(8, Stream::Init));
    let mut wr = w.mul_right(&r).unwrap();
    let mut noise = stream(8, Stream::Noise);
    for _ in 0..200 {
        let mut g = WeightMatrix::zeros(n, m);
        let mut gr = WeightMatrix::zeros(n, m);
        for i in 0..n {
            let xi = sample_noise(&spec, m, &mut noise);
            let xi_r = WeightMatrix::from_vec(1, m, xi.clone()).unwrap().mul_right(&r).unwrap().into_vec();
            let a = grad_noisy(&w, i, &xi).unwrap();
            let b = grad_noisy(&wr, i, &xi_r).unwrap();
            g.as_mut_slice().iter_mut().zip(a.as_slice()).for_each(|(x, y)| *x += y);
            gr.as_mut_slice().iter_mut().zip(b.as_slice()).for_each(|(x, y)| *x += y);
        }
        w.as_mut_slice().iter_mut().zip(g.as_slice()).for_each(|(x, y)| *x -= eta * y);
        wr.as_mut_slice().iter_mut().zip(gr.as_slice()).for_each(|(x, y)| *x -= eta * y);
    }
    let expected = w.mul_right(&r).unwrap();
    for (a, b) in wr.as_slice().iter().zip(expected.as_slice()) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

#[test]
fn gaussian_loss_is_indistinguishable_under_rotated_starts() {
    let (n, m) = (8, 16);
    let spec = NoiseSpec::Gaussian { sigma: 0.2 };
    let r = random_rotation(m, &mut stream(9, Stream::Aux(0)));
    let (mut plain, mut rotated) = (Vec::new(), Vec::new());
    for seed in 0..32 {
        let cfg = ModelConfig { n, m, eta: 0.05, steps: 1000, noise: spec, seed, schedule: RecordSchedule::every(u64::MAX), ..Default::default() };
        let w0 = init_weights(&cfg, &mut stream(seed, Stream::Init));
        let (a, _) = train_noisy_from(&cfg, w0.clone()).unwrap();
        let (b, _) = train_noisy_from(&cfg, w0.mul_right(&r).unwrap()).unwrap();
        plain.push(clean_loss(&a));
        rotated.push(clean_loss(&b));
    }
    let (ma, ca) = mean_ci(&plain);
    let (mb, cb) = mean_ci(&rotated);
    assert!((ma - mb).abs() <= ca + cb, "{ma} +- {ca} vs {mb} +- {cb}");
}

/// Mean over seeds of the row-averaged l4p4 curve.
fn mean_l4p4_curve(spec: NoiseSpec, eta: f64, steps: u64, seeds: u64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for seed in 0..seeds {
        let cfg = ModelConfig { eta, steps, noise: spec, seed, schedule: RecordSchedule::every(steps / 20), ..Default::default() };
        let (_, trace) = train_noisy(&cfg).unwrap();
        let c = trace.mean_over_rows(|r| r.l4p4);
        if out.is_empty() {
            out = c.iter().map(|p| (p.0, 0.0)).collect();
        }
        for (a, b) in out.iter_mut().zip(&c) {
            a.1 += b.1 / seeds as f64;
        }
    }
    out
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
}

#[test]
fn l4_drift_follows_kurtosis_sign_and_order() {
    let sigma: f64 = 0.2;
    let specs = [NoiseSpec::Bipolar { sigma }, NoiseSpec::uniform_with_sigma(sigma), NoiseSpec::Gaussian { sigma }];
    let curves: Vec<Vec<(f64, f64)>> = specs.iter().map(|&s| mean_l4p4_curve(s, 0.05, 4000, 8)).collect();
    // Skip the norm-growth transient at the start.
    let phase: Vec<&[(f64, f64)]> = curves.iter().map(|c| &c[2..]).collect();
    let span = phase[0].last().unwrap().0 - phase[0][0].0;
    let change: Vec<f64> = phase.iter().map(|c| slope(c) * span).collect();
    assert!(change[0] > 0.0 && change[1] > 0.0, "{change:?}");
    assert!(change[2].abs() < 0.1 * change[0], "{change:?}");
    let finals: Vec<f64> = curves.iter().map(|c| c.last().unwrap().1).collect();
    assert!(finals[0] > finals[1] && finals[1] > finals[2], "{finals:?}");
}

#[test]
fn encodings_shrink_at_large_noise() {
    let mut prev = f64::INFINITY;
    for sigma in [0.25, 0.5, 1.0, 2.0] {
        let mut l2 = 0.0;
        for seed in 0..4 {
            let cfg = ModelConfig { eta: 0.005, steps: 5000, noise: NoiseSpec::Gaussian { sigma }, seed, schedule: RecordSchedule::every(u64::MAX), ..Default::default() };
            let (w, _) = train_noisy(&cfg).unwrap();
            l2 += (0..cfg.n).map(|i| w.row_norm_sq(i)).sum::<f64>() / cfg.n as f64;
        }
        l2 /= 4.0;
        assert!(l2 < prev, "sigma {sigma}: {l2} !< {prev}");
        prev = l2;
    }
}

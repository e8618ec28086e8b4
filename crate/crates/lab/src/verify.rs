//! The verification suite: numerical identities, statistical checks and the
//! headline training outcomes, each reported with its measured value and
//! bound.
//!
//! Every check runs at a pinned configuration. Only the base seed, the worker
//! count and the fault flag come from the caller. Expensive training runs
//! shared between checks are computed once per [`Suite`].

use std::io::Write as _;
use std::sync::OnceLock;

use polylab_core::analysis::{affine_spacing_fit, classify_collisions, count_polysemantic, relative_variance_bounds, CollisionKind};
use polylab_core::l1::{forces, loss_l1, train_l1_from, L1Trainer};
use polylab_core::matrix::init_weights;
use polylab_core::metrics::slice_metrics;
use polylab_core::noise::sample_noise;
use polylab_core::noisy::{analytic_cross_moment, analytic_fourth_moment, forward_noisy, grad_noisy};
use polylab_core::rng::{stream, Rng, Stream};
use polylab_core::{ModelConfig, NoiseSpec, RecordSchedule, WeightMatrix};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, Fault, NoiseFamily, Seeds};
use crate::error::{LabError, Result};
use crate::experiments::collide::{self, CollideOutcome};
use crate::experiments::noise_sweep::{self, SweepModel};
use crate::experiments::{mean, std_dev};
use crate::io::{self, VERSION};

/// `(id, name)` of every check, in report order.
pub const CHECKS: [(&str, &str); 11] = [
    ("C1", "collision-scaling"),
    ("C2", "sparsification-law"),
    ("C3", "gradient-correctness"),
    ("C4", "moment-identities"),
    ("C5", "single-active-output-gradient"),
    ("C6", "kurtosis-ordering"),
    ("C7", "affine-spacing"),
    ("C8", "collision-resolution"),
    ("C9", "solution-quality"),
    ("X1", "birthday-collision-count"),
    ("X2", "benign-collision-fraction"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub name: String,
    pub description: String,
    /// The property of the model the check stands for.
    pub anchor: String,
    /// Headline number compared against `bound`.
    pub measured: f64,
    pub bound: String,
    pub passed: bool,
    pub details: String,
}

impl Check {
    /// One-line verdict: `PASS` or `FAIL`, id, name, measured value and bound.
    pub fn line(&self) -> String {
        format!(
            "{} {} {}: measured {:.6} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.bound
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: String,
    pub seed: u64,
    pub fault: String,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone)]
struct ResolutionRun {
    kind: CollisionKind,
    i: usize,
    j: usize,
    neuron: usize,
    final_w: WeightMatrix,
}

#[derive(Debug, Clone)]
struct SparsifyRun {
    lambda: f64,
    records: Vec<(f64, f64, usize)>,
    final_w: WeightMatrix,
}

type Cached<T> = OnceLock<std::result::Result<T, String>>;

/// Check runner holding the shared training runs.
#[derive(Debug)]
pub struct Suite {
    seed: u64,
    workers: usize,
    fault: Fault,
    collide: Cached<CollideOutcome>,
    sparsify: Cached<SparsifyRun>,
    resolution: Cached<Vec<ResolutionRun>>,
}

fn cached<T>(cell: &Cached<T>, f: impl FnOnce() -> Result<T>) -> std::result::Result<&T, String> {
    cell.get_or_init(|| f().map_err(|e| e.to_string())).as_ref().map_err(Clone::clone)
}

fn descriptor(id: &str) -> Option<(&'static str, &'static str)> {
    CHECKS.iter().copied().find(|(i, n)| i.eq_ignore_ascii_case(id) || n.eq_ignore_ascii_case(id))
}

impl Suite {
    pub fn new(seed: u64, workers: usize, fault: Fault) -> Self {
        Suite {
            seed,
            workers: workers.max(1),
            fault,
            collide: OnceLock::new(),
            sparsify: OnceLock::new(),
            resolution: OnceLock::new(),
        }
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Suite::new(cfg.model.seed, cfg.workers, cfg.fault)
    }

    /// Runs one check by id (`C3`) or name (`gradient-correctness`).
    pub fn run(&self, id: &str) -> Result<Check> {
        let (id, name) = descriptor(id).ok_or_else(|| LabError::config(format!("unknown check `{id}`")))?;
        let mut check = match id {
            "C1" => self.collision_scaling(),
            "C2" => self.sparsification_law(),
            "C3" => self.gradient_correctness(),
            "C4" => self.moment_identities(),
            "C5" => self.single_active_output(),
            "C6" => self.kurtosis_ordering(),
            "C7" => self.affine_spacing(),
            "C8" => self.collision_resolution(),
            "C9" => self.solution_quality(),
            "X1" => self.birthday_count(),
            _ => self.benign_fraction(),
        };
        check.id = id.to_string();
        check.name = name.to_string();
        Ok(check)
    }

    fn collide_runs(&self) -> std::result::Result<&CollideOutcome, String> {
        cached(&self.collide, || {
            let mut cfg = ExperimentConfig::defaults(Experiment::Collide);
            cfg.model.seed = self.seed;
            cfg.workers = self.workers;
            collide::train_all(&cfg)
        })
    }

    fn sparsify_run(&self) -> std::result::Result<&SparsifyRun, String> {
        cached(&self.sparsify, || {
            let mut cfg = ExperimentConfig::defaults(Experiment::Sparsify);
            cfg.model.seed = self.seed;
            cfg.model.eps_zero = 0.0;
            let model = cfg.model_config();
            let w0 = init_weights(&model, &mut stream(model.seed, Stream::Init));
            let (final_w, trace) = train_l1_from(&model, w0).map_err(|e| LabError::from_model("sparsify", e))?;
            let records = trace.row(0).map(|r| (r.t, r.l1, r.m_prime)).collect();
            Ok(SparsifyRun { lambda: model.lambda, records, final_w })
        })
    }

    fn resolution_runs(&self) -> std::result::Result<&Vec<ResolutionRun>, String> {
        cached(&self.resolution, || {
            let model = resolution_model(self.seed);
            let mut found = Vec::new();
            let mut seed = self.seed;
            while found.len() < RESOLUTION_RUNS {
                let cfg = ModelConfig { seed, ..model.clone() };
                let w0 = init_weights(&cfg, &mut stream(seed, Stream::Init));
                if let Some(c) = classify_collisions(&w0).map_err(|e| LabError::from_model("resolution", e))?.collisions.first() {
                    found.push((cfg, w0, *c));
                }
                seed += 1;
            }
            crate::experiments::par_map(self.workers, &found, |(cfg, w0, c)| {
                let cell = format!("seed{}", cfg.seed);
                let (final_w, _) = train_l1_from(cfg, w0.clone()).map_err(|e| LabError::from_model(&cell, e))?;
                Ok(ResolutionRun { kind: c.kind, i: c.i, j: c.j, neuron: c.neuron, final_w })
            })
        })
    }

    fn collision_scaling(&self) -> Check {
        let mut c = blank(
            "mean polysemantic-neuron count of trained l1 models (n = 64, 16 seeds per m in 64..1024) against n(n-1)/(4m)",
            "each benign initial collision leaves one polysemantic neuron, so the count falls as 1/m",
            "every per-m ratio in [0.5, 2] and log-log slope in [-1.3, -0.7]",
        );
        let out = match self.collide_runs() {
            Ok(o) => o,
            Err(e) => return c.error(e),
        };
        let ratios: Vec<f64> = out.by_width.iter().map(|w| w.mean / w.prediction).collect();
        let worst = ratios.iter().copied().fold(1.0, |a: f64, r| if (r.ln()).abs() > a.ln().abs() { r } else { a });
        let ratio_ok = ratios.iter().all(|r| (0.5..=2.0).contains(r));
        let slope_ok = (-1.3..=-0.7).contains(&out.slope);
        let mut details: Vec<String> = out
            .by_width
            .iter()
            .map(|w| format!("m={}: mean {:.3} (sd {:.3}) vs {:.3}", w.m, w.mean, w.std_dev, w.prediction))
            .collect();
        details.push(format!("slope {:.4}", out.slope));
        for thr in [0.3, 0.7] {
            let means: Vec<String> = out
                .by_width
                .iter()
                .map(|w| {
                    let counts: Vec<f64> = out
                        .runs
                        .iter()
                        .filter(|r| r.m == w.m)
                        .map(|r| count_polysemantic(&r.final_w, thr).count as f64)
                        .collect();
                    format!("{:.3}", mean(&counts))
                })
                .collect();
            details.push(format!("threshold {thr}: means {}", means.join("/")));
        }
        c.measured = worst;
        c.passed = ratio_ok && slope_ok;
        c.details = details.join("; ");
        c
    }

    fn sparsification_law(&self) -> Check {
        let mut c = blank(
            "single interference-free encoding, m = 1e5, lambda = 1e-5: |W|_1 against 1/(lambda t) in the middle regime, and time to one survivor",
            "the l1 norm of a sparsifying encoding decays like 1/(lambda t) until one entry is left",
            "|W|_1 lambda t in [0.3, 3] for 3/(lambda sqrt m) <= t <= 1/(3 lambda); m' = 1 by t = 5/lambda",
        );
        let run = match self.sparsify_run() {
            Ok(r) => r,
            Err(e) => return c.error(e),
        };
        let lambda = run.lambda;
        let m = run.final_w.cols() as f64;
        let (lo, hi) = (3.0 / (lambda * m.sqrt()), 1.0 / (3.0 * lambda));
        let ratios: Vec<f64> = run.records.iter().filter(|r| r.0 >= lo && r.0 <= hi).map(|r| r.1 * lambda * r.0).collect();
        let worst = ratios.iter().copied().fold(1.0, |a: f64, r| if r.ln().abs() > a.ln().abs() { r } else { a });
        let band_ok = !ratios.is_empty() && ratios.iter().all(|r| (0.3..=3.0).contains(r));
        let single = run.records.iter().find(|r| r.2 == 1).map(|r| r.0);
        let single_ok = single.is_some_and(|t| t <= 5.0 / lambda);
        c.measured = worst;
        c.passed = band_ok && single_ok;
        c.details = format!(
            "{} records in [{lo:.1}, {hi:.1}], ratio range [{:.4}, {:.4}]; first record with m'=1 at t={}",
            ratios.len(),
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            single.map_or("never".to_string(), |t| format!("{t}"))
        );
        c
    }

    fn gradient_correctness(&self) -> Check {
        let mut c = blank(
            "analytic gradients of both models against central differences at 100 generic random points each",
            "the l1 forces and the noisy-model backward pass are the exact derivatives of their losses",
            "relative error < 1e-6 (l1 forces) and < 1e-5 (noise model)",
        );
        let corrupt = if self.fault == Fault::Gradient { 1.0 + 1e-3 } else { 1.0 };
        let mut rng = stream(self.seed, Stream::Aux(30));
        let h = 1e-6;

        let mut l1_worst: f64 = 0.0;
        let mut points = 0;
        while points < 100 {
            let (n, m) = (2 + points % 5, 2 + points % 7);
            let w = gaussian_matrix(n, m, 0.5, &mut rng);
            let lambda = 0.1 * (points as f64 + 1.0) / 100.0;
            let g = w.gram();
            let near_kink = w.as_slice().iter().any(|x| x.abs() < 1e-3)
                || (0..n).any(|i| (0..n).any(|j| i != j && g[i * n + j].abs() < 1e-3));
            if near_kink {
                continue;
            }
            points += 1;
            let mut analytic = Vec::with_capacity(n * m);
            for i in 0..n {
                match forces(&w, i, lambda) {
                    Ok(f) => analytic.extend(f.loss_gradient().into_iter().map(|x| x * corrupt)),
                    Err(e) => return c.error(e.to_string()),
                }
            }
            let fd = central_differences(&w, h, |v| loss_l1(v, lambda));
            l1_worst = l1_worst.max(relative_error(&analytic, &fd));
        }

        let mut noisy_worst: f64 = 0.0;
        let specs = [
            NoiseSpec::Gaussian { sigma: 0.2 },
            NoiseSpec::Bipolar { sigma: 0.2 },
            NoiseSpec::uniform_with_sigma(0.2),
        ];
        let mut points = 0;
        while points < 100 {
            let (n, m) = (2 + points % 6, 2 + points % 9);
            let w = gaussian_matrix(n, m, 0.5, &mut rng);
            let xi = sample_noise(&specs[points % 3], m, &mut rng);
            let i = points % n;
            let fwd = match forward_noisy(&w, i, &xi) {
                Ok(f) => f,
                Err(e) => return c.error(e.to_string()),
            };
            if fwd.z.iter().any(|z| z.abs() < 1e-4) {
                continue;
            }
            points += 1;
            let analytic: Vec<f64> = match grad_noisy(&w, i, &xi) {
                Ok(g) => g.as_slice().iter().map(|x| x * corrupt).collect(),
                Err(e) => return c.error(e.to_string()),
            };
            let fd = central_differences(&w, h, |v| forward_noisy(v, i, &xi).map(|f| f.loss).unwrap_or(f64::NAN));
            noisy_worst = noisy_worst.max(relative_error(&analytic, &fd));
        }

        c.measured = (l1_worst / 1e-6).max(noisy_worst / 1e-5);
        c.bound = format!("{} (measured is the worst error / its bound, pass < 1)", c.bound);
        c.passed = l1_worst < 1e-6 && noisy_worst < 1e-5;
        c.details = format!("worst relative error: l1 {l1_worst:.3e}, noise model {noisy_worst:.3e}");
        c
    }

    fn moment_identities(&self) -> Check {
        let mut c = blank(
            "closed-form E[(W_i.xi)^4] and E[(W_i.xi)^2 |xi|^2] against 1e6-sample Monte Carlo, three noise shapes, m in {1, 2, 8, 64}, 5 random rows each",
            "the noise enters the expected loss only through its variance and fourth moment",
            "every |MC - exact| <= 4 standard errors (plus summation rounding when the statistic is constant)",
        );
        const SAMPLES: usize = 1_000_000;
        let sigma = 0.5;
        let specs = [
            NoiseSpec::Bipolar { sigma },
            NoiseSpec::Gaussian { sigma },
            NoiseSpec::uniform_with_sigma(sigma),
        ];
        let mut worst: f64 = 0.0;
        let mut compared = 0;
        let mut failures = Vec::new();
        for (s, spec) in specs.iter().enumerate() {
            for (k, m) in [1usize, 2, 8, 64].into_iter().enumerate() {
                let mut rng = stream(self.seed, Stream::Aux(40 + (4 * s + k) as u32));
                let rows: Vec<Vec<f64>> = (0..5).map(|_| (0..m).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
                // Per row: sums and squared sums of both statistics.
                let mut acc = vec![[0.0f64; 4]; rows.len()];
                let mut xi = vec![0.0; m];
                for _ in 0..SAMPLES {
                    spec.fill(&mut rng, &mut xi);
                    let xi2: f64 = xi.iter().map(|x| x * x).sum();
                    for (row, a) in rows.iter().zip(acc.iter_mut()) {
                        let p: f64 = row.iter().zip(&xi).map(|(w, x)| w * x).sum();
                        let p2 = p * p;
                        let (f, x) = (p2 * p2, p2 * xi2);
                        a[0] += f;
                        a[1] += f * f;
                        a[2] += x;
                        a[3] += x * x;
                    }
                }
                for (r, (row, a)) in rows.iter().zip(&acc).enumerate() {
                    let exact = [analytic_fourth_moment(row, spec), analytic_cross_moment(row, spec)];
                    for (q, ex) in exact.into_iter().enumerate() {
                        let (mean, se) = mean_se(a[2 * q], a[2 * q + 1], SAMPLES);
                        // Zero-variance statistics (bipolar, m = 1) leave only the
                        // rounding of a plain sum of SAMPLES terms.
                        let rounding = SAMPLES as f64 * f64::EPSILON * ex.abs();
                        let z = (mean - ex).abs() / (se + rounding / 4.0);
                        worst = worst.max(z);
                        compared += 1;
                        if z > 4.0 {
                            failures.push(format!("{} m={m} row {r} moment {q}: {mean} vs {ex} (se {se:.3e})", spec.name()));
                        }
                    }
                }
            }
        }
        c.measured = worst;
        c.passed = failures.is_empty();
        c.details = format!("{compared} comparisons, worst {worst:.3} standard errors; {}", failures.join("; "));
        c
    }

    fn single_active_output(&self) -> Check {
        let mut c = blank(
            "noisy-model gradient at unit rows 120 degrees apart (cross products -1/2), 100 noise draws, only output i active",
            "when only the target output fires, the noisy gradient reduces to 2(W_i.xi)(2W_i + xi) on row i",
            "max |analytic - closed form| <= 1e-12",
        );
        let m = 8;
        let mut rows = vec![vec![0.0; m]; 3];
        for (r, a) in rows.iter_mut().zip([0.0f64, 120.0, 240.0]) {
            r[0] = a.to_radians().cos();
            r[1] = a.to_radians().sin();
        }
        let w = WeightMatrix::from_rows(&rows).expect("equal-length rows");
        let spec = NoiseSpec::Gaussian { sigma: 0.05 };
        let mut rng = stream(self.seed, Stream::Aux(50));
        let mut worst: f64 = 0.0;
        let mut skipped = 0;
        for _ in 0..100 {
            let xi = sample_noise(&spec, m, &mut rng);
            for i in 0..3 {
                let Ok(fwd) = forward_noisy(&w, i, &xi) else { return c.error("forward failed") };
                if (0..3).any(|j| j != i && fwd.z[j] >= 0.0) {
                    skipped += 1;
                    continue;
                }
                let Ok(g) = grad_noisy(&w, i, &xi) else { return c.error("gradient failed") };
                let wi = w.row(i);
                let p: f64 = wi.iter().zip(&xi).map(|(a, b)| a * b).sum();
                for j in 0..3 {
                    for k in 0..m {
                        let expected = if j == i { 2.0 * p * (2.0 * wi[k] + xi[k]) } else { 0.0 };
                        worst = worst.max((g[(j, k)] - expected).abs());
                    }
                }
            }
        }
        c.measured = worst;
        c.passed = worst <= 1e-12 && skipped == 0;
        c.details = format!("300 (draw, input) pairs, {skipped} with a second active output");
        c
    }

    fn kurtosis_ordering(&self) -> Check {
        let mut c = blank(
            "final mean |W_i|_4^4 of the noise model (n = 8, m = 16, sigma = 0.2, eta = 0.05, 2e4 steps, 32 seeds) per noise shape",
            "negative excess kurtosis rewards sparse encodings, zero kurtosis leaves them dense, so sparsity orders bipolar > uniform > gaussian",
            "bipolar > uniform > gaussian, gaussian in [1/3, 3] x 3/m, bipolar >= 5 x gaussian",
        );
        let mut cfg = ExperimentConfig::defaults(Experiment::NoiseSweep);
        cfg.model.seed = self.seed;
        cfg.model.steps = 20_000;
        cfg.model.schedule = RecordSchedule::every(20_000);
        cfg.sweep.sigma = vec![0.2];
        cfg.sweep.lambda = Vec::new();
        cfg.sweep.seeds = Seeds::Count(32);
        cfg.workers = self.workers;
        let out = match noise_sweep::train_all(&cfg) {
            Ok(o) => o,
            Err(e) => return c.error(e.to_string()),
        };
        let get = |fam: NoiseFamily| {
            out.settings
                .iter()
                .find(|s| matches!(s.model, SweepModel::Noise { family, .. } if family == fam))
                .map(|s| (s.mean_l4p4, s.diverged))
                .unwrap_or((f64::NAN, 0))
        };
        let (b, bd) = get(NoiseFamily::Bipolar);
        let (u, ud) = get(NoiseFamily::Uniform);
        let (g, gd) = get(NoiseFamily::Gaussian);
        let reference = 3.0 / cfg.model.m as f64;
        let clauses = [
            ("bipolar > uniform > gaussian", b > u && u > g),
            ("gaussian within [1/3, 3] x 3/m", g >= reference / 3.0 && g <= 3.0 * reference),
            ("bipolar >= 5 x gaussian", b >= 5.0 * g),
            ("no divergence", bd + ud + gd == 0),
        ];
        c.measured = b / g;
        c.passed = clauses.iter().all(|k| k.1);
        let failed: Vec<&str> = clauses.iter().filter(|k| !k.1).map(|k| k.0).collect();
        c.details = format!(
            "mean l4p4: bipolar {b:.4}, uniform {u:.4}, gaussian {g:.4}, 3/m = {reference:.4}; measured is bipolar/gaussian; failing: {}",
            if failed.is_empty() { "none".to_string() } else { failed.join(", ") }
        );
        c
    }

    fn affine_spacing(&self) -> Check {
        let mut c = blank(
            "interference-free single encodings at m = 1e3 and 1e4 (lambda = 1/(10 sqrt m)), every step while m' >= 10",
            "without interference all surviving magnitudes follow one affine map of their initial values, pinning their relative variance between two brackets",
            "relative max residual < 1e-3 at every step; relative variance inside its bracket (relative slack 1e-9)",
        );
        let mut worst: f64 = 0.0;
        let mut details = Vec::new();
        let mut brackets_ok = true;
        for m in [1_000usize, 10_000] {
            let model = ModelConfig {
                n: 1,
                m,
                lambda: 1.0 / (10.0 * (m as f64).sqrt()),
                eta: 0.1,
                interference_enabled: false,
                seed: self.seed,
                steps: 100_000,
                eps_zero: 0.0,
                ..ModelConfig::default()
            };
            let w0 = init_weights(&model, &mut stream(model.seed, Stream::Init));
            let Ok(mut tr) = L1Trainer::new(&model, w0.clone()) else { return c.error("invalid model") };
            let (mut steps, mut violations) = (0u64, 0usize);
            while tr.support_len(0) >= 10 && steps < model.steps {
                let row = tr.weights().row(0);
                let fit = match affine_spacing_fit(w0.row(0), row, 0.0) {
                    Ok(f) => f,
                    Err(e) => return c.error(e.to_string()),
                };
                let top = row.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                worst = worst.max(fit.max_residual / top);
                let mt = slice_metrics(row, 0.0);
                if let Some(rv) = mt.relative_variance {
                    let Ok((lo, hi)) = relative_variance_bounds(w0.row(0), mt.nonzero_count) else {
                        return c.error("bracket undefined");
                    };
                    if rv < lo * (1.0 - 1e-9) - 1e-15 || rv > hi * (1.0 + 1e-9) + 1e-15 {
                        violations += 1;
                    }
                }
                if tr.step().is_err() {
                    return c.error(format!("m={m} diverged"));
                }
                steps += 1;
            }
            brackets_ok &= violations == 0 && steps < model.steps;
            details.push(format!("m={m}: {steps} steps to m' < 10, {violations} bracket violations"));
        }
        c.measured = worst;
        c.passed = worst < 1e-3 && brackets_ok;
        c.details = details.join("; ");
        c
    }

    fn collision_resolution(&self) -> Check {
        let mut c = blank(
            "1000 seeded n = 2, m = 4 l1 runs whose initialization has both features on one argmax neuron",
            "opposite-sign collisions survive training as a shared neuron, same-sign ones are resolved by interference",
            "every malign collision leaves at most one feature on the neuron (the other exactly 0); >= 90% of benign ones keep both at |w| >= 0.9 with opposite signs",
        );
        let runs = match self.resolution_runs() {
            Ok(r) => r,
            Err(e) => return c.error(e),
        };
        let (mut benign, mut shared, mut malign, mut resolved) = (0, 0, 0, 0);
        for r in runs {
            let (a, b) = (r.final_w[(r.i, r.neuron)], r.final_w[(r.j, r.neuron)]);
            match r.kind {
                CollisionKind::Benign => {
                    benign += 1;
                    shared += usize::from(a.abs() >= 0.9 && b.abs() >= 0.9 && a * b < 0.0);
                }
                CollisionKind::Malign => {
                    malign += 1;
                    resolved += usize::from(a == 0.0 || b == 0.0);
                }
            }
        }
        let frac = shared as f64 / benign.max(1) as f64;
        c.measured = frac;
        c.passed = resolved == malign && benign > 0 && frac >= 0.9;
        c.details = format!("benign: {shared}/{benign} shared; malign: {resolved}/{malign} resolved; measured is the benign fraction");
        c
    }

    fn solution_quality(&self) -> Check {
        let mut c = blank(
            "every feature of every finished l1 run from the collision-scaling, sparsification and collision-resolution checks",
            "trained encodings are one dominant entry of magnitude near 1, shortened only by the penalty",
            "|W_{i,k_i}| >= 0.9 and |W_i|^2 in [1 - 5 lambda |W_i|_1, 1] for every feature",
        );
        let mut mats: Vec<(&WeightMatrix, f64)> = Vec::new();
        let mut errors = Vec::new();
        let collide_lambda = ExperimentConfig::defaults(Experiment::Collide).model.lambda;
        match self.collide_runs() {
            Ok(o) => mats.extend(o.runs.iter().map(|r| (&r.final_w, collide_lambda))),
            Err(e) => errors.push(e),
        }
        match self.sparsify_run() {
            Ok(r) => mats.push((&r.final_w, r.lambda)),
            Err(e) => errors.push(e),
        }
        let lambda8 = resolution_model(self.seed).lambda;
        match self.resolution_runs() {
            Ok(r) => mats.extend(r.iter().map(|r| (&r.final_w, lambda8))),
            Err(e) => errors.push(e),
        }
        let (mut features, mut bad) = (0usize, Vec::new());
        for (w, lambda) in &mats {
            for (i, row) in w.rows_iter().enumerate() {
                features += 1;
                let top = row.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                let l2: f64 = row.iter().map(|x| x * x).sum();
                let l1: f64 = row.iter().map(|x| x.abs()).sum();
                if top < 0.9 || l2 > 1.0 || l2 < 1.0 - 5.0 * lambda * l1 {
                    bad.push(format!("row {i} of a {}x{} run: top {top:.4}, |W|^2 {l2:.6}", w.rows(), w.cols()));
                }
            }
        }
        c.measured = bad.len() as f64;
        c.bound = format!("{} (measured is the number of violating features)", c.bound);
        c.passed = bad.is_empty() && errors.is_empty() && features > 0;
        bad.truncate(10);
        c.details = format!("{} runs, {features} features; {}{}", mats.len(), bad.join("; "), errors.join("; "));
        c
    }

    fn birthday_count(&self) -> Check {
        let mut c = blank(
            "pairs of features sharing an argmax neuron at initialization, n = 32, m = 256, 1000 seeds",
            "random initialization puts two features on the same neuron about n(n-1)/(2m) times",
            "mean within 3 standard errors of n(n-1)/(2m) = 1.9375",
        );
        let model = ModelConfig { n: 32, m: 256, ..ModelConfig::default() };
        let counts: Vec<f64> = (0..1000u64)
            .map(|k| {
                let w = init_weights(&model, &mut stream(self.seed + k, Stream::Init));
                classify_collisions(&w).map(|r| r.collisions.len() as f64).unwrap_or(f64::NAN)
            })
            .collect();
        let (mu, se) = (mean(&counts), std_dev(&counts) / (counts.len() as f64).sqrt());
        let expected = polylab_core::analysis::expected_collisions(32, 256);
        c.measured = mu;
        c.passed = (mu - expected).abs() <= 3.0 * se;
        c.details = format!("mean {mu:.4}, standard error {se:.4}, expected {expected}");
        c
    }

    fn benign_fraction(&self) -> Check {
        let mut c = blank(
            "sign agreement of two features forced onto one neuron (n = 2, m = 1), 1e4 seeds",
            "half of all initial collisions are benign",
            "benign fraction within 3 standard errors of 1/2",
        );
        let model = ModelConfig { n: 2, m: 1, ..ModelConfig::default() };
        let k = 10_000u64;
        let benign = (0..k)
            .filter(|s| {
                let w = init_weights(&model, &mut stream(self.seed + s, Stream::Init));
                classify_collisions(&w).is_ok_and(|r| r.benign_count == 1)
            })
            .count();
        let p = benign as f64 / k as f64;
        let se = (0.25 / k as f64).sqrt();
        c.measured = p;
        c.passed = (p - 0.5).abs() <= 3.0 * se;
        c.details = format!("{benign}/{k} benign");
        c
    }
}

const RESOLUTION_RUNS: usize = 1000;

fn resolution_model(seed: u64) -> ModelConfig {
    ModelConfig {
        n: 2,
        m: 4,
        lambda: 0.02,
        eta: 0.1,
        seed,
        steps: 5000,
        schedule: RecordSchedule::every(5000),
        ..ModelConfig::default()
    }
}

fn blank(description: &str, anchor: &str, bound: &str) -> Check {
    Check {
        id: String::new(),
        name: String::new(),
        description: description.to_string(),
        anchor: anchor.to_string(),
        measured: f64::NAN,
        bound: bound.to_string(),
        passed: false,
        details: String::new(),
    }
}

impl Check {
    fn error(mut self, msg: impl Into<String>) -> Check {
        self.passed = false;
        self.details = format!("could not be evaluated: {}", msg.into());
        self
    }
}

fn gaussian_matrix(n: usize, m: usize, std: f64, rng: &mut Rng) -> WeightMatrix {
    let data = (0..n * m).map(|_| { let z: f64 = StandardNormal.sample(rng); std * z }).collect();
    WeightMatrix::from_vec(n, m, data).expect("n * m entries")
}

fn central_differences(w: &WeightMatrix, h: f64, loss: impl Fn(&WeightMatrix) -> f64) -> Vec<f64> {
    (0..w.as_slice().len())
        .map(|idx| {
            let mut plus = w.clone();
            plus.as_mut_slice()[idx] += h;
            let mut minus = w.clone();
            minus.as_mut_slice()[idx] -= h;
            (loss(&plus) - loss(&minus)) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / |b|` in the Euclidean norm.
fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-12)
}

fn mean_se(sum: f64, sum_sq: f64, k: usize) -> (f64, f64) {
    let n = k as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Check ids selected by `cfg.checks`, or all of them.
pub fn selected(cfg: &ExperimentConfig) -> Result<Vec<&'static str>> {
    if cfg.checks.is_empty() {
        return Ok(CHECKS.iter().map(|c| c.0).collect());
    }
    cfg.checks
        .iter()
        .map(|c| descriptor(c).map(|d| d.0).ok_or_else(|| LabError::config(format!("unknown check `{c}`"))))
        .collect()
}

/// Runs the selected checks, printing one verdict line each, and writes
/// `<out>/verify/report.json`.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let ids = selected(cfg)?;
    let suite = Suite::from_config(cfg);
    let mut checks = Vec::with_capacity(ids.len());
    for id in ids {
        log::info!("running check {id}");
        let check = suite.run(id)?;
        println!("{}", check.line());
        let _ = std::io::stdout().flush();
        checks.push(check);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let report = Report {
        version: VERSION.to_string(),
        seed: cfg.model.seed,
        fault: format!("{:?}", cfg.fault).to_lowercase(),
        passed,
        failed: checks.len() - passed,
        checks,
    };
    let dir = cfg.experiment_dir();
    io::create_dir(&dir)?;
    let path = dir.join("report.json");
    let json = serde_json::to_string_pretty(&report).map_err(|e| LabError::Format { path: path.clone(), reason: e.to_string() })?;
    io::write_text(&path, &(json + "\n"))?;
    Ok(report)
}

//! Experiment configuration: per-experiment defaults, overridden by a flat
//! `key = value` file, then by `--set` pairs, then by dedicated CLI flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use polylab_core::{ModelConfig, NoiseSpec, RecordSchedule};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Sparsify,
    Collide,
    NoiseSweep,
    Instance,
    Verify,
    SplitNeuron,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Sparsify,
        Experiment::Collide,
        Experiment::NoiseSweep,
        Experiment::Instance,
        Experiment::Verify,
        Experiment::SplitNeuron,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sparsify => "sparsify",
            Experiment::Collide => "collide",
            Experiment::NoiseSweep => "noise-sweep",
            Experiment::Instance => "instance",
            Experiment::Verify => "verify",
            Experiment::SplitNeuron => "split-neuron",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| LabError::config(format!("unknown experiment `{s}`")))
    }
}

/// Noise distribution family; the scale comes from `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseFamily {
    None,
    Bipolar,
    Gaussian,
    Uniform,
}

impl NoiseFamily {
    pub fn name(self) -> &'static str {
        match self {
            NoiseFamily::None => "none",
            NoiseFamily::Bipolar => "bipolar",
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Uniform => "uniform",
        }
    }

    /// Distribution of this family with standard deviation `sigma`.
    pub fn spec(self, sigma: f64) -> NoiseSpec {
        match self {
            NoiseFamily::None => NoiseSpec::None,
            NoiseFamily::Bipolar => NoiseSpec::Bipolar { sigma },
            NoiseFamily::Gaussian => NoiseSpec::Gaussian { sigma },
            NoiseFamily::Uniform => NoiseSpec::uniform_with_sigma(sigma),
        }
    }
}

impl FromStr for NoiseFamily {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        [NoiseFamily::None, NoiseFamily::Bipolar, NoiseFamily::Gaussian, NoiseFamily::Uniform]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| LabError::config(format!("unknown noise family `{s}`")))
    }
}

/// Deliberate corruption used to check that `verify` can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    Gradient,
}

impl Fault {
    fn name(self) -> &'static str {
        match self {
            Fault::None => "none",
            Fault::Gradient => "gradient",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Seeds {
    /// `count` consecutive seeds starting at the base `seed`.
    Count(u64),
    List(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub m: Vec<usize>,
    pub lambda: Vec<f64>,
    pub sigma: Vec<f64>,
    pub variants: Vec<NoiseFamily>,
    pub seeds: Seeds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub csv: bool,
    pub svg: bool,
    pub final_matrix: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: ModelConfig,
    /// Noise family of single-model experiments; scale is `sigma`.
    pub noise_family: NoiseFamily,
    pub sigma: f64,
    pub sweep: Sweep,
    pub out_dir: PathBuf,
    pub emit: Emit,
    pub workers: usize,
    /// `|W_ik|` above which feature `i` counts as living on neuron `k`.
    pub poly_threshold: f64,
    /// Rows ending below this `l4p4` are flagged as compromise rows.
    pub compromise_threshold: f64,
    pub perturb_scale: f64,
    /// Number of split-neuron trials to collect.
    pub trials: usize,
    pub fault: Fault,
    /// Subset of verify checks to run; empty means all.
    pub checks: Vec<String>,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = ExperimentConfig {
            experiment,
            model: ModelConfig { eps_zero: polylab_core::config::DEFAULT_EPS_ZERO, ..ModelConfig::default() },
            noise_family: NoiseFamily::None,
            sigma: 0.0,
            sweep: Sweep {
                m: Vec::new(),
                lambda: Vec::new(),
                sigma: Vec::new(),
                variants: Vec::new(),
                seeds: Seeds::Count(1),
            },
            out_dir: PathBuf::from("out"),
            emit: Emit { csv: true, svg: true, final_matrix: false },
            workers: 1,
            poly_threshold: 0.5,
            compromise_threshold: 0.5,
            perturb_scale: 1e-3,
            trials: 32,
            fault: Fault::None,
            checks: Vec::new(),
        };
        match experiment {
            Experiment::Sparsify => ExperimentConfig {
                model: ModelConfig {
                    n: 1,
                    m: 100_000,
                    lambda: 1e-5,
                    eta: 0.1,
                    interference_enabled: false,
                    steps: 5_000_000,
                    schedule: RecordSchedule::log_spaced(100_000, 20),
                    ..base.model
                },
                ..base
            },
            Experiment::Collide => ExperimentConfig {
                model: ModelConfig {
                    n: 64,
                    m: 64,
                    lambda: 0.02,
                    eta: 0.1,
                    steps: 5000,
                    schedule: RecordSchedule::every(500),
                    ..base.model
                },
                sweep: Sweep { m: vec![64, 128, 256, 512, 1024], seeds: Seeds::Count(16), ..base.sweep },
                ..base
            },
            Experiment::NoiseSweep => ExperimentConfig {
                model: ModelConfig {
                    n: 8,
                    m: 16,
                    eta: 0.05,
                    steps: 20_000,
                    schedule: RecordSchedule::log_spaced(500, 10),
                    ..base.model
                },
                sweep: Sweep {
                    sigma: vec![0.05, 0.1, 0.2, 0.4],
                    variants: vec![NoiseFamily::Bipolar, NoiseFamily::Uniform, NoiseFamily::Gaussian],
                    lambda: vec![0.005, 0.01, 0.02, 0.04],
                    seeds: Seeds::Count(8),
                    ..base.sweep
                },
                ..base
            },
            Experiment::Instance => ExperimentConfig {
                model: ModelConfig {
                    n: 8,
                    m: 16,
                    eta: 0.05,
                    steps: 20_000,
                    schedule: RecordSchedule::log_spaced(100, 10),
                    ..base.model
                },
                noise_family: NoiseFamily::Bipolar,
                sigma: 0.2,
                emit: Emit { final_matrix: true, ..base.emit },
                ..base
            },
            Experiment::SplitNeuron => ExperimentConfig {
                model: ModelConfig {
                    n: 8,
                    m: 16,
                    lambda: 0.02,
                    eta: 0.1,
                    steps: 5000,
                    schedule: RecordSchedule::every(500),
                    ..base.model
                },
                ..base
            },
            Experiment::Verify => base,
        }
    }

    /// Seeds of every sweep cell.
    pub fn seeds(&self) -> Vec<u64> {
        match &self.sweep.seeds {
            Seeds::Count(k) => (0..*k).map(|i| self.model.seed.wrapping_add(i)).collect(),
            Seeds::List(v) => v.clone(),
        }
    }

    /// Model configuration with the single-model noise applied.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig { noise: self.noise_family.spec(self.sigma), ..self.model.clone() }
    }

    pub fn experiment_dir(&self) -> PathBuf {
        self.out_dir.join(self.experiment.name())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| LabError::config(format!("`{key}`: expected {what}, got `{value}`"));
        let m = &mut self.model;
        match key {
            "n" => m.n = parse(value).map_err(|_| bad("a positive integer"))?,
            "m" => m.m = parse(value).map_err(|_| bad("a positive integer"))?,
            "lambda" => m.lambda = parse(value).map_err(|_| bad("a number"))?,
            "eta" => m.eta = parse(value).map_err(|_| bad("a number"))?,
            "init_scale" => m.init_scale = parse(value).map_err(|_| bad("a number"))?,
            "interference" => m.interference_enabled = parse_bool(value).ok_or_else(|| bad("true or false"))?,
            "seed" => m.seed = parse(value).map_err(|_| bad("an unsigned integer"))?,
            "steps" => m.steps = parse_count(value).ok_or_else(|| bad("an unsigned integer"))?,
            "record_every" => m.schedule.every = parse_count(value).ok_or_else(|| bad("an unsigned integer"))?,
            "record_per_decade" => m.schedule.per_decade = parse(value).map_err(|_| bad("an unsigned integer"))?,
            "eps_zero" => m.eps_zero = parse(value).map_err(|_| bad("a number"))?,
            "noise" => self.noise_family = value.parse()?,
            "sigma" => self.sigma = parse(value).map_err(|_| bad("a number"))?,
            "sweep.m" => self.sweep.m = parse_list(value).map_err(|_| bad("a comma-separated list of integers"))?,
            "sweep.lambda" => self.sweep.lambda = parse_list(value).map_err(|_| bad("a comma-separated list of numbers"))?,
            "sweep.sigma" => self.sweep.sigma = parse_list(value).map_err(|_| bad("a comma-separated list of numbers"))?,
            "sweep.variants" => {
                self.sweep.variants = split_list(value).map(str::parse).collect::<Result<_>>()?;
            }
            "seeds" => self.sweep.seeds = parse_seeds(value).ok_or_else(|| bad("a count, a list `a,b,c` or a range `a..b`"))?,
            "emit.csv" => self.emit.csv = parse_bool(value).ok_or_else(|| bad("true or false"))?,
            "emit.svg" => self.emit.svg = parse_bool(value).ok_or_else(|| bad("true or false"))?,
            "emit.final_matrix" => self.emit.final_matrix = parse_bool(value).ok_or_else(|| bad("true or false"))?,
            "out" => self.out_dir = PathBuf::from(value),
            "workers" => self.workers = parse(value).map_err(|_| bad("a positive integer"))?,
            "poly_threshold" => self.poly_threshold = parse(value).map_err(|_| bad("a number"))?,
            "compromise_threshold" => self.compromise_threshold = parse(value).map_err(|_| bad("a number"))?,
            "perturb_scale" => self.perturb_scale = parse(value).map_err(|_| bad("a number"))?,
            "trials" => self.trials = parse(value).map_err(|_| bad("a positive integer"))?,
            "fault" => {
                self.fault = match value {
                    "none" => Fault::None,
                    "gradient" => Fault::Gradient,
                    _ => return Err(bad("`none` or `gradient`")),
                }
            }
            "checks" => self.checks = split_list(value).map(String::from).collect(),
            _ => return Err(LabError::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every assignment of a `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::config(format!("{origin}:{}: expected `key = value`", lineno + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| LabError::config(format!("{origin}:{}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::config(format!("{}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies a `key=value` override from the command line.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| LabError::config(format!("--set `{pair}`: expected key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(LabError::config("workers must be >= 1"));
        }
        if self.experiment == Experiment::Verify {
            return Ok(());
        }
        self.model_config()
            .validate()
            .map_err(|e| LabError::config(e.to_string()))?;
        if matches!(&self.sweep.seeds, Seeds::Count(0)) || matches!(&self.sweep.seeds, Seeds::List(v) if v.is_empty()) {
            return Err(LabError::config("seeds must not be empty"));
        }
        match self.experiment {
            Experiment::Collide if self.sweep.m.is_empty() => Err(LabError::config("sweep.m must not be empty")),
            Experiment::Collide if self.sweep.m.contains(&0) => Err(LabError::config("sweep.m entries must be >= 1")),
            Experiment::NoiseSweep if self.sweep.sigma.is_empty() || self.sweep.variants.is_empty() => {
                Err(LabError::config("sweep.sigma and sweep.variants must not be empty"))
            }
            Experiment::NoiseSweep if self.model.lambda != 0.0 => {
                Err(LabError::config("noise-sweep trains the noise model; lambda must be 0"))
            }
            Experiment::Instance if self.model.lambda != 0.0 => {
                Err(LabError::config("instance trains the noise model; lambda must be 0"))
            }
            Experiment::SplitNeuron if self.trials == 0 => Err(LabError::config("trials must be >= 1")),
            _ => Ok(()),
        }
    }

    /// Canonical `(key, value)` listing of the resolved configuration, in a
    /// fixed order. Parsing it back yields the same configuration.
    pub fn resolved(&self) -> Vec<(&'static str, String)> {
        let m = &self.model;
        let join = |v: &[String]| v.join(",");
        let seeds = match &self.sweep.seeds {
            Seeds::Count(k) => k.to_string(),
            Seeds::List(v) => join(&v.iter().map(u64::to_string).collect::<Vec<_>>()),
        };
        vec![
            ("experiment", self.experiment.name().to_string()),
            ("n", m.n.to_string()),
            ("m", m.m.to_string()),
            ("lambda", m.lambda.to_string()),
            ("eta", m.eta.to_string()),
            ("init_scale", m.init_scale.to_string()),
            ("interference", m.interference_enabled.to_string()),
            ("noise", self.noise_family.name().to_string()),
            ("sigma", self.sigma.to_string()),
            ("seed", m.seed.to_string()),
            ("seeds", seeds),
            ("steps", m.steps.to_string()),
            ("record_every", m.schedule.every.to_string()),
            ("record_per_decade", m.schedule.per_decade.to_string()),
            ("eps_zero", m.eps_zero.to_string()),
            ("sweep.m", join(&self.sweep.m.iter().map(usize::to_string).collect::<Vec<_>>())),
            ("sweep.lambda", join(&self.sweep.lambda.iter().map(f64::to_string).collect::<Vec<_>>())),
            ("sweep.sigma", join(&self.sweep.sigma.iter().map(f64::to_string).collect::<Vec<_>>())),
            ("sweep.variants", join(&self.sweep.variants.iter().map(|v| v.name().to_string()).collect::<Vec<_>>())),
            ("poly_threshold", self.poly_threshold.to_string()),
            ("compromise_threshold", self.compromise_threshold.to_string()),
            ("perturb_scale", self.perturb_scale.to_string()),
            ("trials", self.trials.to_string()),
            ("fault", self.fault.name().to_string()),
            ("checks", self.checks.join(",")),
        ]
    }
}

fn parse<T: FromStr>(s: &str) -> std::result::Result<T, T::Err> {
    s.parse()
}

/// Integer that may be written in scientific notation, e.g. `5e6`.
fn parse_count(s: &str) -> Option<u64> {
    if let Ok(v) = s.parse::<u64>() {
        return Some(v);
    }
    let f: f64 = s.parse().ok()?;
    (f >= 0.0 && f.fract() == 0.0 && f < 1.8e19).then_some(f as u64)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "on" | "yes" | "1" => Some(true),
        "false" | "off" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, T::Err> {
    split_list(s).map(str::parse).collect()
}

fn parse_seeds(s: &str) -> Option<Seeds> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        return (a < b).then(|| Seeds::List((a..b).collect()));
    }
    if s.contains(',') {
        return parse_list(s).ok().map(Seeds::List);
    }
    s.parse().ok().map(Seeds::Count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_override() {
        let mut c = ExperimentConfig::defaults(Experiment::Collide);
        c.apply_text("# comment\nn = 16\nsweep.m = 16, 32 # trailing\n\nlambda=0.01\n", "test").unwrap();
        c.apply_override("n=8").unwrap();
        assert_eq!(c.model.n, 8);
        assert_eq!(c.sweep.m, [16, 32]);
        assert_eq!(c.model.lambda, 0.01);
    }

    #[test]
    fn resolved_listing_round_trips() {
        for e in Experiment::ALL {
            let mut c = ExperimentConfig::defaults(e);
            c.apply_override("seeds=3,5,9").unwrap();
            let text: String = c.resolved().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
            let mut d = ExperimentConfig::defaults(Experiment::Verify);
            d.apply_text(&text.replace("experiment = ", "# "), "echo").unwrap();
            d.experiment = e;
            // Emit flags choose which files exist, not what they contain.
            d.emit = c.emit;
            assert_eq!(c, d);
        }
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut c = ExperimentConfig::defaults(Experiment::Sparsify);
        assert!(matches!(c.apply_override("colour=red"), Err(LabError::Config(_))));
        assert!(matches!(c.apply_override("n=-3"), Err(LabError::Config(_))));
        assert!(matches!(c.apply_override("noise=pink"), Err(LabError::Config(_))));
        assert!(c.apply_override("steps=5e6").is_ok());
        assert_eq!(c.model.steps, 5_000_000);
    }

    #[test]
    fn seeds_forms() {
        let mut c = ExperimentConfig::defaults(Experiment::Collide);
        c.apply_override("seed=10").unwrap();
        assert_eq!(c.seeds(), (10..26).collect::<Vec<_>>());
        c.apply_override("seeds=2..5").unwrap();
        assert_eq!(c.seeds(), [2, 3, 4]);
    }

    #[test]
    fn validation_catches_empty_sweeps() {
        let mut c = ExperimentConfig::defaults(Experiment::Collide);
        c.apply_override("sweep.m=").unwrap();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(Experiment::Instance);
        c.apply_override("lambda=0.1").unwrap();
        assert!(c.validate().is_err());
    }
}

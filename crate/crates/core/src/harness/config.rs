use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::align::{AdmmParams, WeightBackend};
use crate::embedding_io::SyntheticSpec;
use crate::error::{Error, Result};
use crate::latent::LatentConfig;
use crate::metrics::SampleStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    LowRank,
    Lle,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowrank" | "low-rank" | "low_rank" => Ok(Self::LowRank),
            "lle" => Ok(Self::Lle),
            other => Err(Error::Config(format!(
                "unknown backend `{other}` (expected lowrank or lle)"
            ))),
        }
    }
}

/// Every knob of every subcommand. Keys in config files and command-line
/// flags share the kebab-case names accepted by [`ExperimentConfig::set`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,

    // synthetic models, used when no inputs are given
    pub synth_n: usize,
    pub synth_m: usize,
    pub intrinsic_dim: usize,
    pub sigma: f64,
    pub trials: usize,

    pub sample: SampleStrategy,
    pub sample_count: usize,
    pub k_values: Vec<usize>,
    pub overlap_k: usize,

    pub center: Option<String>,
    pub epsilon: f64,
    /// Grow `epsilon` until the two neighborhoods share this many words.
    pub min_common: Option<usize>,
    pub normalize: bool,

    pub latent: bool,
    pub latent_count: usize,
    pub latent_attempts: Option<usize>,
    pub min_terms: usize,
    pub max_terms: Option<usize>,
    pub latent_metrics: bool,

    pub backend: BackendKind,
    pub mu: f64,
    pub lambda: Option<f64>,
    pub k_lle: usize,
    pub reg: f64,
    pub rho: f64,
    pub adaptive_rho: bool,
    pub tol: f64,
    pub max_iters: usize,
    pub d: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            out: PathBuf::from("out"),
            seed: 0,
            synth_n: 2000,
            synth_m: 200,
            intrinsic_dim: 10,
            sigma: 0.1,
            trials: 5,
            sample: SampleStrategy::Uniform,
            sample_count: 100,
            k_values: vec![2, 5, 10, 15, 20, 25, 30],
            overlap_k: 10,
            center: None,
            epsilon: 0.5,
            min_common: None,
            normalize: false,
            latent: true,
            latent_count: 100,
            latent_attempts: None,
            min_terms: 2,
            max_terms: None,
            latent_metrics: false,
            backend: BackendKind::LowRank,
            mu: 0.5,
            lambda: None,
            k_lle: 10,
            reg: 1e-3,
            rho: 1.0,
            adaptive_rho: true,
            tol: 1e-6,
            max_iters: 500,
            d: 50,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid value `{value}` for `{key}` (expected on or off)"
        ))),
    }
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" || value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl ExperimentConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('_', "-").as_str() {
            "inputs" => {
                self.inputs = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(PathBuf::from)
                    .collect()
            }
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            "synth-n" => self.synth_n = parse(key, value)?,
            "synth-m" => self.synth_m = parse(key, value)?,
            "intrinsic-dim" => self.intrinsic_dim = parse(key, value)?,
            "sigma" => self.sigma = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "sample" => self.sample = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "sample-count" => self.sample_count = parse(key, value)?,
            "k-values" => {
                self.k_values = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "overlap-k" => self.overlap_k = parse(key, value)?,
            "center" => self.center = Some(value.to_string()).filter(|s| !s.is_empty()),
            "epsilon" => self.epsilon = parse(key, value)?,
            "min-common" => self.min_common = parse_optional(key, value)?,
            "normalize" => self.normalize = parse_switch(key, value)?,
            "latent" => self.latent = parse_switch(key, value)?,
            "latent-count" => self.latent_count = parse(key, value)?,
            "latent-attempts" => self.latent_attempts = parse_optional(key, value)?,
            "min-terms" => self.min_terms = parse(key, value)?,
            "max-terms" => self.max_terms = parse_optional(key, value)?,
            "latent-metrics" => self.latent_metrics = parse_switch(key, value)?,
            "backend" => self.backend = value.parse()?,
            "mu" => self.mu = parse(key, value)?,
            "lambda" => self.lambda = parse_optional(key, value)?,
            "k-lle" => self.k_lle = parse(key, value)?,
            "reg" => self.reg = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "adaptive-rho" => self.adaptive_rho = parse_switch(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "max-iters" => self.max_iters = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() {
            return Err(Error::Config("k-values must not be empty".into()));
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) || self.k_values[0] == 0 {
            return Err(Error::Config(
                "k-values must be positive and strictly ascending".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// Synthetic pair for trial `trial`; seeds are `seed + trial`.
    pub fn synthetic_spec(&self, trial: u64) -> SyntheticSpec {
        SyntheticSpec {
            n: self.synth_n,
            m: self.synth_m,
            intrinsic_dim: self.intrinsic_dim,
            noise_sigma: self.sigma,
            seed: self.seed.wrapping_add(trial),
        }
    }

    pub fn latent_config(&self) -> LatentConfig {
        LatentConfig {
            max_attempts: self.latent_attempts,
            min_terms: self.min_terms,
            max_terms: self.max_terms,
            ..LatentConfig::new(self.epsilon, self.latent_count, self.seed)
        }
    }

    pub fn weight_backend(&self) -> WeightBackend {
        match self.backend {
            BackendKind::LowRank => WeightBackend::LowRank {
                lambda: self.lambda,
                admm: AdmmParams {
                    rho: self.rho,
                    max_iters: self.max_iters,
                    tol: self.tol,
                    adaptive: self.adaptive_rho,
                },
            },
            BackendKind::Lle => WeightBackend::Lle {
                k: self.k_lle,
                reg: self.reg,
            },
        }
    }
}

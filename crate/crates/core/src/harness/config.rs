use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

/// How the gap of each sweep cell is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Moment propagation.
    Exact,
    /// Monte Carlo over independent chains.
    Mc,
    /// The exact gap at the smallest `K`, extrapolated with slope `2c - 1`.
    Theory,
}

impl SweepMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepMode::Exact => "exact",
            SweepMode::Mc => "mc",
            SweepMode::Theory => "theory",
        }
    }

    pub(crate) fn index(&self) -> u64 {
        match self {
            SweepMode::Exact => 0,
            SweepMode::Mc => 1,
            SweepMode::Theory => 2,
        }
    }
}

/// Additive gradient-noise covariance: one variance for every coordinate, or
/// one per coordinate.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NoiseSetting {
    Isotropic(f64),
    Diagonal(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub sigma2: f64,
    pub seed: u64,
    pub k_grid: Vec<usize>,
    pub c_list: Vec<f64>,
    /// Step-size constant in `eta = a K^-c`; tuned when absent.
    pub a: Option<f64>,
    pub gamma: f64,
    pub mode: SweepMode,
    pub mc_chains: usize,
    /// Mini-batch size whose gradient noise is simulated.
    pub batch_size: Option<usize>,
    pub sigma_eps: Option<NoiseSetting>,
    /// Candidate step sizes at the smallest `K` when tuning `a`.
    pub eta_grid: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 1000,
            d: 10,
            sigma2: 1.0,
            seed: 0,
            k_grid: (6..=12).map(|p| 1usize << p).collect(),
            c_list: vec![0.25, 1.0 / 3.0, 0.5],
            a: None,
            gamma: 0.0,
            mode: SweepMode::Exact,
            mc_chains: 100,
            batch_size: None,
            sigma_eps: None,
            eta_grid: (1..=10).map(|i| 0.05 * i as f64).collect(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    n: Option<usize>,
    d: Option<usize>,
    sigma2: Option<f64>,
    seed: Option<u64>,
    #[serde(alias = "K_grid")]
    k_grid: Option<Vec<usize>>,
    c_list: Option<Vec<f64>>,
    a: Option<f64>,
    gamma: Option<f64>,
    mode: Option<SweepMode>,
    mc_chains: Option<usize>,
    batch_size: Option<usize>,
    sigma_eps: Option<NoiseSetting>,
    eta_grid: Option<Vec<f64>>,
}

impl ExperimentConfig {
    /// The data size of the original simulation, `n = 10000`.
    pub fn paper_scale() -> Self {
        ExperimentConfig { n: 10_000, ..Self::default() }
    }

    /// Parses a TOML document. Every key is optional; `preset = "paper-scale"`
    /// switches the defaults that the other keys override.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let mut cfg = match raw.preset.as_deref() {
            None | Some("desk") => Self::default(),
            Some("paper-scale") => Self::paper_scale(),
            Some(other) => {
                return Err(invalid("preset", format!("unknown preset {other:?} (expected \"desk\" or \"paper-scale\")")))
            }
        };
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = raw.$field { cfg.$field = v; } )* };
        }
        take!(n, d, sigma2, seed, k_grid, c_list, gamma, mode, mc_chains, eta_grid);
        cfg.a = raw.a;
        cfg.batch_size = raw.batch_size;
        cfg.sigma_eps = raw.sigma_eps;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if self.d == 0 {
            return Err(invalid("d", "must be at least 1"));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(invalid("sigma2", "must be positive"));
        }
        if self.k_grid.is_empty() {
            return Err(invalid("K_grid", "must not be empty"));
        }
        if self.k_grid[0] == 0 || self.k_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("K_grid", "must be strictly ascending positive integers"));
        }
        if self.c_list.is_empty() || self.c_list.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(invalid("c_list", "must be a non-empty list of non-negative numbers"));
        }
        if let Some(a) = self.a {
            if !(a > 0.0) || !a.is_finite() {
                return Err(invalid("a", "must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("gamma", "must lie in [0, 1]"));
        }
        if self.mode == SweepMode::Mc && self.mc_chains < 2 {
            return Err(invalid("mc_chains", "mc mode needs at least 2 chains"));
        }
        if let Some(b) = self.batch_size {
            if b == 0 || b > self.n {
                return Err(invalid("batch_size", format!("must lie in 1..={}", self.n)));
            }
        }
        match &self.sigma_eps {
            Some(NoiseSetting::Isotropic(v)) if !(*v >= 0.0) || !v.is_finite() => {
                return Err(invalid("sigma_eps", "variance must be non-negative"));
            }
            Some(NoiseSetting::Diagonal(v)) => {
                if v.len() != self.d {
                    return Err(invalid("sigma_eps", format!("needs {} entries, got {}", self.d, v.len())));
                }
                if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                    return Err(invalid("sigma_eps", "variances must be non-negative"));
                }
            }
            _ => {}
        }
        if self.batch_size.is_some() && self.sigma_eps.is_some() {
            return Err(invalid("sigma_eps", "give either batch_size or sigma_eps, not both"));
        }
        if self.eta_grid.is_empty() || self.eta_grid.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(invalid("eta_grid", "must be a non-empty list of positive step sizes"));
        }
        Ok(())
    }
}

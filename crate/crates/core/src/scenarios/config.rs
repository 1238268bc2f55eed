use serde::{Deserialize, Serialize};

use crate::channels::{GhzCoefficients, DEFAULT_TRUNCATION};
use crate::error::{Result, SqeError};

fn default_restarts() -> usize {
    64
}
fn default_seed() -> u64 {
    0x5eed
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Also run the alternating solver on every cell.
    #[serde(default = "yes")]
    pub cross_check: bool,
}

fn yes() -> bool {
    true
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig { restarts: default_restarts(), seed: default_seed(), cross_check: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_mu_step")]
    pub mu_step: f64,
    #[serde(default)]
    pub mu_min: f64,
    #[serde(default = "one")]
    pub mu_max: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_mu_step() -> f64 {
    1e-4
}
fn one() -> f64 {
    1.0
}
fn default_margin() -> f64 {
    crate::witness::DEFAULT_MARGIN
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { mu_step: default_mu_step(), mu_min: 0.0, mu_max: 1.0, margin: default_margin() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    /// 1-based subsystems carrying the losses.
    #[serde(default = "default_pair")]
    pub pair: [usize; 2],
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_pair() -> [usize; 2] {
    [2, 4]
}
fn default_resolution() -> usize {
    101
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { pair: default_pair(), resolution: default_resolution() }
    }
}

/// `"geometric"` or an explicit coefficient list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Named(String),
    List(Vec<f64>),
}

impl LambdaSpec {
    pub fn coefficients(&self) -> Result<GhzCoefficients> {
        match self {
            LambdaSpec::Named(s) if s == "geometric" => Ok(GhzCoefficients::Geometric),
            LambdaSpec::Named(s) => Err(SqeError::InvalidArgument(format!("unknown coefficient family {s:?}"))),
            LambdaSpec::List(v) => Ok(GhzCoefficients::Explicit(v.clone())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhzConfig {
    #[serde(default = "default_lambdas")]
    pub lambdas: LambdaSpec,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_s_min")]
    pub s_min: f64,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default = "default_r_list")]
    pub r_list: Vec<usize>,
    /// Number of sites sharing the phase diffusion equally.
    #[serde(default = "default_sites")]
    pub sites: usize,
    #[serde(default)]
    pub renormalize: bool,
}

fn default_lambdas() -> LambdaSpec {
    LambdaSpec::Named("geometric".into())
}
fn default_truncation() -> usize {
    DEFAULT_TRUNCATION
}
fn default_points() -> usize {
    200
}
fn default_s_min() -> f64 {
    1e-3
}
fn default_s_max() -> f64 {
    1e2
}
fn default_r_list() -> Vec<usize> {
    vec![1, 2, 3, 4]
}
fn default_sites() -> usize {
    100
}

impl Default for GhzConfig {
    fn default() -> Self {
        GhzConfig {
            lambdas: default_lambdas(),
            truncation: default_truncation(),
            points: default_points(),
            s_min: default_s_min(),
            s_max: default_s_max(),
            r_list: default_r_list(),
            sites: default_sites(),
            renormalize: false,
        }
    }
}

/// A scenario with its parameters, tagged by `"scenario"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Table(TableConfig),
    Noise(NoiseConfig),
    Loss(LossConfig),
    Ghz(GhzConfig),
}

fn invalid(msg: String) -> SqeError {
    SqeError::InvalidArgument(msg)
}

impl TableConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=64).contains(&self.restarts) {
            return Err(invalid(format!("restarts = {} outside 1..=64", self.restarts)));
        }
        Ok(())
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_step > 0.0 && self.mu_step <= 1.0) {
            return Err(invalid(format!("mu_step = {} outside (0, 1]", self.mu_step)));
        }
        if !(0.0 <= self.mu_min && self.mu_min < self.mu_max && self.mu_max <= 1.0) {
            return Err(invalid(format!("mu range [{}, {}] not inside [0, 1]", self.mu_min, self.mu_max)));
        }
        if ((self.mu_max - self.mu_min) / self.mu_step).round() > 1e7 {
            return Err(invalid("mu grid larger than 1e7 points".into()));
        }
        if !(self.margin >= 0.0 && self.margin < 1.0) {
            return Err(invalid(format!("margin = {} outside [0, 1)", self.margin)));
        }
        Ok(())
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.pair;
        if a == b || !(1..=4).contains(&a) || !(1..=4).contains(&b) {
            return Err(invalid(format!("pair {:?} must be two distinct sites in 1..=4", self.pair)));
        }
        if !(2..=1001).contains(&self.resolution) {
            return Err(invalid(format!("resolution {} outside 2..=1001", self.resolution)));
        }
        Ok(())
    }
}

impl GhzConfig {
    pub fn validate(&self) -> Result<()> {
        self.lambdas.coefficients()?;
        if !(1..=4096).contains(&self.truncation) {
            return Err(invalid(format!("truncation {} outside 1..=4096", self.truncation)));
        }
        if !(2..=100_000).contains(&self.points) {
            return Err(invalid(format!("points {} outside 2..=100000", self.points)));
        }
        if !(self.s_min > 0.0 && self.s_min < self.s_max && self.s_max.is_finite()) {
            return Err(invalid(format!("s range [{}, {}] must satisfy 0 < min < max", self.s_min, self.s_max)));
        }
        if self.r_list.iter().any(|&r| r == 0) {
            return Err(invalid("r values start at 1".into()));
        }
        if self.sites == 0 {
            return Err(invalid("sites must be at least 1".into()));
        }
        Ok(())
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScenarioConfig::Table(c) => c.validate(),
            ScenarioConfig::Noise(c) => c.validate(),
            ScenarioConfig::Loss(c) => c.validate(),
            ScenarioConfig::Ghz(c) => c.validate(),
        }
    }

    /// Parses and range-checks a config; unknown keys are rejected.
    pub fn from_json(s: &str) -> Result<Self> {
        let c: ScenarioConfig = serde_json::from_str(s).map_err(|e| SqeError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioConfig::Table(_) => "table",
            ScenarioConfig::Noise(_) => "noise",
            ScenarioConfig::Loss(_) => "loss",
            ScenarioConfig::Ghz(_) => "ghz",
        }
    }
}

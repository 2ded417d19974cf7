//! Run configuration read from JSON.
//!
//! ```json
//! {
//!   "params": { "gamma1": 1, "gamma2": 1, "delta1": 1, "delta2": 1, "gamma": "7/48" },
//!   "grid": { "n_modes": 256, "length": "16pi" },
//!   "data": { "kind": "poisson_kernel", "amplitude": 0.1, "sigma0": 0.5, "seed": 0 },
//!   "stepper": { "dt": 0.01, "scheme": "ExponentialRK4" },
//!   "t_end": 100, "observer_interval": 2,
//!   "sigma_grid": [0.1, 0.25, 0.5],
//!   "output_dir": "out/moderate"
//! }
//! ```
//!
//! Numbers may be given as JSON numbers or as strings such as `"7/48"`,
//! `"16pi"` or `"pi/2"`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{StepperConfig, DEFAULT_EXISTENCE_CONSTANT};
use crate::error::{Error, Result};
use crate::gevrey::{
    gaussian_bump_spectrum, mode_sum_spectrum, poisson_kernel_spectrum, RadiusOptions,
};
use crate::params::Parameters;
use crate::spectral::{Grid, SpectralField};

/// Environment variable that replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "GBBM_OUTPUT_DIR";

/// A real number written as a JSON number or as a string expression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Text(String),
}

impl Number {
    pub fn value(&self) -> Result<f64> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Text(s) => parse_number(s),
        }
    }
}

impl From<f64> for Number {
    fn from(v: f64) -> Self {
        Number::Value(v)
    }
}

/// Parses `"a"`, `"a/b"`, `"pi"`, `"ka pi"` style strings (`"16pi"`, `"2*pi"`, `"pi/4"`).
pub fn parse_number(text: &str) -> Result<f64> {
    let bad = || Error::Config(format!("cannot parse number {text:?}"));
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if let Some((num, den)) = s.split_once('/') {
        let d = parse_number(den)?;
        if d == 0.0 {
            return Err(bad());
        }
        return Ok(parse_number(num)? / d);
    }
    if let Some(pre) = s.strip_suffix("pi") {
        let pre = pre.strip_suffix('*').unwrap_or(pre);
        let k = if pre.is_empty() {
            1.0
        } else {
            pre.parse::<f64>().map_err(|_| bad())?
        };
        return Ok(k * std::f64::consts::PI);
    }
    s.parse::<f64>().map_err(|_| bad())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub gamma1: Number,
    pub gamma2: Number,
    pub delta1: Number,
    pub delta2: Number,
    pub gamma: Number,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_slope: Option<Number>,
}

impl ParamsSpec {
    pub fn resolve(&self) -> Result<Parameters<f64>> {
        let mut p = Parameters::new(
            self.gamma1.value()?,
            self.gamma2.value()?,
            self.delta1.value()?,
            self.delta2.value()?,
            self.gamma.value()?,
        );
        if let Some(k) = &self.gamma_slope {
            p = p.with_gamma_slope(k.value()?);
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_modes: usize,
    pub length: Number,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    PoissonKernel,
    GaussianBump,
    ModeSum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub kind: DataKind,
    pub amplitude: f64,
    /// Decay rate of the Fourier envelope. For `gaussian_bump` it is only the
    /// reference radius for the σ grid.
    pub sigma0: f64,
    #[serde(default)]
    pub seed: u64,
    /// Width of `gaussian_bump`.
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_width() -> f64 {
    1.0
}

impl DataSpec {
    pub fn generate(&self, grid: &Grid<f64>) -> Result<SpectralField<f64>> {
        if !self.amplitude.is_finite() {
            return Err(Error::Config("data.amplitude must be finite".into()));
        }
        match self.kind {
            DataKind::PoissonKernel => poisson_kernel_spectrum(grid, self.sigma0, self.amplitude),
            DataKind::ModeSum => mode_sum_spectrum(grid, self.sigma0, self.amplitude, self.seed),
            DataKind::GaussianBump => gaussian_bump_spectrum(grid, self.amplitude, self.width),
        }
    }
}

fn default_continuation_c() -> f64 {
    1.0
}
fn default_existence_c() -> f64 {
    DEFAULT_EXISTENCE_CONSTANT
}
fn default_tail_fraction() -> f64 {
    0.5
}
fn default_tail_min_samples() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ParamsSpec,
    pub grid: GridSpec,
    pub data: DataSpec,
    #[serde(default)]
    pub stepper: StepperConfig,
    pub t_end: f64,
    pub observer_interval: f64,
    pub sigma_grid: Vec<f64>,
    pub output_dir: PathBuf,
    /// `c` in `σ = min(σ₀, c/T*)`.
    #[serde(default = "default_continuation_c")]
    pub continuation_c: f64,
    /// `c_T` in the local existence time.
    #[serde(default = "default_existence_c")]
    pub existence_c: f64,
    #[serde(default)]
    pub radius: RadiusOptions,
    /// The decay fit uses `t ≥ (1 − tail_fraction)·t_end`.
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    #[serde(default = "default_tail_min_samples")]
    pub tail_min_samples: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies the output directory override.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            cfg.output_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        self.params
            .resolve()
            .map_err(|e| Error::Config(format!("params: {e}")))?;
        self.grid_instance()
            .map_err(|e| Error::Config(format!("grid: {e}")))?;
        self.stepper
            .validate()
            .map_err(|e| Error::Config(format!("stepper: {e}")))?;
        if !(self.data.sigma0 > 0.0) {
            return cfg_err(format!("data.sigma0 must be > 0, got {}", self.data.sigma0));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return cfg_err(format!("t_end must be > 0, got {}", self.t_end));
        }
        if !(self.observer_interval > 0.0) {
            return cfg_err(format!(
                "observer_interval must be > 0, got {}",
                self.observer_interval
            ));
        }
        if self.sigma_grid.is_empty() {
            return cfg_err("sigma_grid must not be empty".into());
        }
        if let Some(s) = self
            .sigma_grid
            .iter()
            .find(|&&s| !(s > 0.0 && s <= self.data.sigma0))
        {
            return cfg_err(format!(
                "sigma_grid entry {s} must lie in (0, sigma0 = {}]",
                self.data.sigma0
            ));
        }
        if !(self.continuation_c > 0.0) || !(self.existence_c > 0.0) {
            return cfg_err("continuation_c and existence_c must be > 0".into());
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return cfg_err(format!(
                "tail_fraction must lie in (0, 1], got {}",
                self.tail_fraction
            ));
        }
        if !(self.radius.floor > 0.0)
            || !(self.radius.window_fraction > 0.0 && self.radius.window_fraction <= 1.0)
        {
            return cfg_err("radius.floor must be > 0 and radius.window_fraction in (0, 1]".into());
        }
        Ok(())
    }

    pub fn parameters(&self) -> Result<Parameters<f64>> {
        self.params.resolve()
    }

    pub fn grid_instance(&self) -> Result<Grid<f64>> {
        Grid::new(self.grid.n_modes, self.grid.length.value()?)
    }

    pub fn initial_data(&self, grid: &Grid<f64>) -> Result<SpectralField<f64>> {
        self.data.generate(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const SAMPLE: &str = r#"{
        "params": { "gamma1": 1, "gamma2": 1, "delta1": 1, "delta2": 1, "gamma": "7/48" },
        "grid": { "n_modes": 64, "length": "8pi" },
        "data": { "kind": "mode_sum", "amplitude": 0.1, "sigma0": 0.5, "seed": 3 },
        "stepper": { "dt": 0.01 },
        "t_end": 1, "observer_interval": 0.5,
        "sigma_grid": [0.1, 0.5],
        "output_dir": "out"
    }"#;

    #[test]
    fn numbers() {
        assert_eq!(parse_number("7/48").unwrap(), 7.0 / 48.0);
        assert_eq!(parse_number("64pi").unwrap(), 64.0 * PI);
        assert_eq!(parse_number("2*pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_number("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_number(" 0.25 ").unwrap(), 0.25);
        for bad in ["", "x", "1/0", "3pix"] {
            assert!(parse_number(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn parses_sample() {
        let cfg = RunConfig::from_json(SAMPLE).unwrap();
        let p = cfg.parameters().unwrap();
        assert!(p.energy_conserving());
        assert_eq!(cfg.grid_instance().unwrap().length(), 8.0 * PI);
        assert_eq!(
            cfg.stepper.picard_max_iter,
            StepperConfig::default().picard_max_iter
        );
        assert_eq!(cfg.continuation_c, 1.0);
        assert_eq!(cfg.tail_min_samples, 10);
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = SAMPLE.replace("\"t_end\"", "\"t_stop\": 2, \"t_end\"");
        match RunConfig::from_json(&text) {
            Err(Error::Config(m)) => assert!(m.contains("t_stop"), "{m}"),
            other => panic!("{other:?}"),
        }
        let text = SAMPLE.replace("\"dt\": 0.01", "\"dt\": 0.01, \"order\": 4");
        match RunConfig::from_json(&text) {
            Err(Error::Config(m)) => assert!(m.contains("order"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_invalid_values() {
        for (from, to) in [
            ("[0.1, 0.5]", "[]"),
            ("[0.1, 0.5]", "[0.1, 0.6]"),
            ("[0.1, 0.5]", "[0.0]"),
            ("\"n_modes\": 64", "\"n_modes\": 63"),
            ("\"gamma1\": 1", "\"gamma1\": -1"),
            ("\"dt\": 0.01", "\"dt\": 0"),
            ("\"t_end\": 1", "\"t_end\": -1"),
            ("\"mode_sum\"", "\"sawtooth\""),
        ] {
            let text = SAMPLE.replace(from, to);
            assert!(
                matches!(RunConfig::from_json(&text), Err(Error::Config(_))),
                "{to}"
            );
        }
    }

    #[test]
    fn generates_each_kind() {
        let mut cfg = RunConfig::from_json(SAMPLE).unwrap();
        let g = cfg.grid_instance().unwrap();
        for kind in [
            DataKind::PoissonKernel,
            DataKind::GaussianBump,
            DataKind::ModeSum,
        ] {
            cfg.data.kind = kind;
            let f = cfg.initial_data(&g).unwrap();
            assert!(f.max_abs() > 0.0);
            assert_eq!(f.symmetry_defect(), 0.0);
        }
    }
}

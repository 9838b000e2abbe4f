use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stabproj::{DEFAULT_DELTA, DEFAULT_RADIUS_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Spectral,
    Rates,
    Coverage,
    ProjectOne,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Experiment::Spectral),
            "rates" => Ok(Experiment::Rates),
            "coverage" => Ok(Experiment::Coverage),
            "project-one" | "project_one" => Ok(Experiment::ProjectOne),
            _ => Err(Error::Config(format!("unknown experiment {s:?}"))),
        }
    }
}

/// Speed sequence a_T of the moderate-deviations scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateScaling {
    #[serde(rename = "sqrtT")]
    SqrtT,
    #[serde(rename = "T^0.75")]
    ThreeQuarters,
}

impl RateScaling {
    pub fn a_t(self, t: usize) -> f64 {
        let t = t as f64;
        match self {
            RateScaling::SqrtT => t.sqrt(),
            RateScaling::ThreeQuarters => t.powf(0.75),
        }
    }
}

impl FromStr for RateScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrtT" | "sqrt" => Ok(RateScaling::SqrtT),
            "T^0.75" | "T0.75" | "pow0.75" => Ok(RateScaling::ThreeQuarters),
            _ => Err(Error::Config(format!("unknown a_T rule {s:?} (sqrtT or T^0.75)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format {s:?} (csv or json)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// State dimension. The spectral experiment needs a multiple of 3
    /// (n = 3m).
    pub n: usize,
    /// Accepted trials (spectral, coverage) or trajectories per system
    /// (rates).
    pub trials: usize,
    /// Number of sampled system matrices (rates).
    pub systems: usize,
    /// Fixed horizon. Spectral defaults to round(25√m), coverage to 500.
    pub t: Option<usize>,
    /// Largest horizon of the rates grid; defaults to 100(n+1).
    pub t_max: Option<usize>,
    /// Smallest horizon of the rates grid; defaults to max(T_max/10, n+1).
    pub t_min: Option<usize>,
    pub grid_points: usize,
    pub delta: f64,
    pub q_scale: f64,
    pub radius_cap: f64,
    pub master_seed: u64,
    pub a_t: RateScaling,
    pub beta: f64,
    /// True scalar system for the coverage experiment.
    pub theta: f64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// Candidate trajectories per requested trial before giving up.
    pub oversample_cap: usize,
    /// Draws per system before giving up on finding a stable matrix.
    pub rejection_cap: usize,
    /// Rescale unstable draws by 1/(1.05ρ) instead of rejecting them.
    pub scale_down: bool,
    pub timings: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Spectral,
            n: 3,
            trials: 50,
            systems: 20,
            t: None,
            t_max: None,
            t_min: None,
            grid_points: 8,
            delta: DEFAULT_DELTA,
            q_scale: 1.0,
            radius_cap: DEFAULT_RADIUS_CAP,
            master_seed: 0,
            a_t: RateScaling::SqrtT,
            beta: 0.1,
            theta: 0.5,
            workers: 0,
            oversample_cap: 100,
            rejection_cap: 10_000,
            scale_down: false,
            timings: false,
            out: None,
            format: Format::Csv,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key} = {value:?}: expected true or false"))),
    }
}

impl ExperimentConfig {
    /// Sets one field from its textual `key = value` form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = value.parse()?,
            "n" => self.n = parse_num(key, value)?,
            "trials" => self.trials = parse_num(key, value)?,
            "systems" => self.systems = parse_num(key, value)?,
            "t" | "T" => self.t = Some(parse_num(key, value)?),
            "t_max" | "T_max" => self.t_max = Some(parse_num(key, value)?),
            "t_min" | "T_min" => self.t_min = Some(parse_num(key, value)?),
            "grid_points" => self.grid_points = parse_num(key, value)?,
            "delta" => self.delta = parse_num(key, value)?,
            "q_scale" => self.q_scale = parse_num(key, value)?,
            "radius_cap" => self.radius_cap = parse_num(key, value)?,
            "master_seed" | "seed" => self.master_seed = parse_num(key, value)?,
            "a_t" | "a_T" => self.a_t = value.parse()?,
            "beta" => self.beta = parse_num(key, value)?,
            "theta" => self.theta = parse_num(key, value)?,
            "workers" => self.workers = parse_num(key, value)?,
            "oversample_cap" => self.oversample_cap = parse_num(key, value)?,
            "rejection_cap" => self.rejection_cap = parse_num(key, value)?,
            "scale_down" => self.scale_down = parse_bool(key, value)?,
            "timings" => self.timings = parse_bool(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses flat `key = value` lines over the defaults. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn spectral_m(&self) -> Result<usize> {
        if self.n == 0 || !self.n.is_multiple_of(3) {
            return Err(Error::Config(format!(
                "spectral experiment needs n = 3m, got n = {}",
                self.n
            )));
        }
        Ok(self.n / 3)
    }

    pub fn spectral_horizon(&self) -> Result<usize> {
        let m = self.spectral_m()?;
        Ok(self.t.unwrap_or_else(|| (25.0 * (m as f64).sqrt()).round() as usize))
    }

    pub fn rates_t_max(&self) -> usize {
        self.t_max.unwrap_or(100 * (self.n + 1))
    }

    pub fn coverage_horizon(&self) -> usize {
        self.t.unwrap_or(500)
    }

    /// Log-spaced horizons from t_min to t_max, endpoints included,
    /// deduplicated after rounding.
    pub fn rates_grid(&self) -> Result<Vec<usize>> {
        let t_max = self.rates_t_max();
        let t_min = self.t_min.unwrap_or((t_max / 10).max(self.n + 1));
        if t_min < self.n || t_min > t_max {
            return Err(Error::Config(format!(
                "horizon grid needs n <= t_min <= t_max, got t_min = {t_min}, t_max = {t_max}"
            )));
        }
        let k = self.grid_points.max(2);
        let (lo, hi) = ((t_min as f64).ln(), (t_max as f64).ln());
        let mut grid: Vec<usize> = (0..k)
            .map(|i| (lo + (hi - lo) * i as f64 / (k - 1) as f64).exp().round() as usize)
            .collect();
        grid[0] = t_min;
        grid[k - 1] = t_max;
        grid.dedup();
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive, got {v}")))
            }
        };
        positive(self.delta, "delta")?;
        positive(self.q_scale, "q_scale")?;
        if !(self.radius_cap > 0.0 && self.radius_cap < 1.0) {
            return Err(Error::Config(format!(
                "radius_cap must lie in (0, 1), got {}",
                self.radius_cap
            )));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.oversample_cap == 0 || self.rejection_cap == 0 {
            return Err(Error::Config("sampling caps must be at least 1".into()));
        }
        let horizon = match self.experiment {
            Experiment::Spectral => {
                self.spectral_m()?;
                self.spectral_horizon()?
            }
            Experiment::Rates => {
                if self.systems == 0 {
                    return Err(Error::Config("systems must be at least 1".into()));
                }
                self.rates_grid()?;
                self.rates_t_max()
            }
            Experiment::Coverage => {
                if !(self.beta > 0.0 && self.beta < 1.0) {
                    return Err(Error::Config(format!("beta must lie in (0, 1), got {}", self.beta)));
                }
                self.coverage_horizon()
            }
            Experiment::ProjectOne => return Ok(()),
        };
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.experiment != Experiment::Spectral && self.a_t.a_t(horizon) / horizon as f64 > 0.5 {
            return Err(Error::Config(format!(
                "a_T/T > 0.5 at T = {horizon}; use a longer horizon"
            )));
        }
        Ok(())
    }
}

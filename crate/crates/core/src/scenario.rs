//! Scenario files: one JSON document describing a full experiment.
//!
//! ```json
//! {
//!   "name": "hyperbolic-small-data",
//!   "manifold": { "kind": "hyperbolic" },
//!   "target": { "kind": "sphere" },
//!   "n": 3, "k": 1,
//!   "delta0": "search",
//!   "grid": { "r_max": 60.0, "n": 4000 },
//!   "time": { "t_final": 50.0, "dt_factor": 0.1, "snap_every": 1.0 },
//!   "data": { "amplitude": 0.05, "shape": "gaussian", "width": 1.0, "support": 10.0 },
//!   "checks": ["hardy", "smoothing", "consistency"],
//!   "seed": 0
//! }
//! ```
//!
//! Unknown fields and unknown check names are rejected at parse time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::profiles::{MetricProfile, ProfileSpec, TargetProfile};
use crate::wave::{InitialData, WaveProblem, MAX_DT_FACTOR};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Hardy,
    Hardy2,
    Smoothing,
    Strichartz,
    Dimshift,
    NormEquivalence,
    Consistency,
    Reversal,
}

impl CheckName {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Hardy => "hardy",
            CheckName::Hardy2 => "hardy2",
            CheckName::Smoothing => "smoothing",
            CheckName::Strichartz => "strichartz",
            CheckName::Dimshift => "dimshift",
            CheckName::NormEquivalence => "norm_equivalence",
            CheckName::Consistency => "consistency",
            CheckName::Reversal => "reversal",
        }
    }

    /// Checks run by the `estimates` command; the rest belong to `evolve`.
    pub fn is_estimate(self) -> bool {
        !matches!(self, CheckName::Consistency | CheckName::Reversal)
    }
}

/// A fixed `delta0` or a search over the standard ladder.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Delta0Raw", into = "Delta0Raw")]
pub enum Delta0 {
    #[default]
    Search,
    Value(f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Delta0Raw {
    Number(f64),
    Text(String),
}

impl TryFrom<Delta0Raw> for Delta0 {
    type Error = String;

    fn try_from(raw: Delta0Raw) -> std::result::Result<Self, String> {
        match raw {
            Delta0Raw::Number(v) if v > 0.0 && v < 1.0 => Ok(Delta0::Value(v)),
            Delta0Raw::Number(v) => Err(format!("delta0 = {v} must lie in (0, 1)")),
            Delta0Raw::Text(s) if s == "search" => Ok(Delta0::Search),
            Delta0Raw::Text(s) => Err(format!("delta0 must be a number or \"search\", got \"{s}\"")),
        }
    }
}

impl From<Delta0> for Delta0Raw {
    fn from(d: Delta0) -> Self {
        match d {
            Delta0::Search => Delta0Raw::Text("search".into()),
            Delta0::Value(v) => Delta0Raw::Number(v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub r_max: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_final: f64,
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
    #[serde(default = "default_snap")]
    pub snap_every: f64,
}

fn default_dt_factor() -> f64 {
    0.1
}

fn default_snap() -> f64 {
    1.0
}

fn default_target() -> ProfileSpec {
    ProfileSpec { kind: "sphere".into(), params: Default::default() }
}

/// Tuning of the estimate checks; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSpec {
    /// Weight `alpha(r)` for the Hardy check; `r^(1-n)` when absent.
    pub hardy_alpha: Option<String>,
    pub zeta: String,
    pub epsilon: f64,
    pub family_size: usize,
    pub smoothing_family_size: usize,
    /// Spectral parameters `[re, im]` for the smoothing check.
    pub lambdas: Vec<[f64; 2]>,
    pub strichartz_cells: usize,
    pub strichartz_horizon: f64,
    pub strichartz_time_samples: usize,
    pub dimshift_orders: Vec<f64>,
    pub norm_order: f64,
}

impl Default for EstimateSpec {
    fn default() -> Self {
        let mut lambdas = Vec::new();
        for re in [0.0, 1.0, 2.5, 5.0] {
            for im in [0.2, 1.0, 5.0] {
                lambdas.push([re, im]);
            }
        }
        EstimateSpec {
            hardy_alpha: None,
            zeta: "r".into(),
            epsilon: 0.1,
            family_size: 30,
            smoothing_family_size: 10,
            lambdas,
            strichartz_cells: 400,
            strichartz_horizon: 10.0,
            strichartz_time_samples: 101,
            dimshift_orders: vec![0.0, 1.0],
            norm_order: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub manifold: ProfileSpec,
    #[serde(default = "default_target")]
    pub target: ProfileSpec,
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub delta0: Delta0,
    pub grid: GridSpec,
    #[serde(default)]
    pub time: Option<TimeSpec>,
    #[serde(default)]
    pub data: Option<InitialData>,
    #[serde(default)]
    pub checks: Vec<CheckName>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub estimates: EstimateSpec,
    /// Output directory; the command line `--out` takes precedence.
    #[serde(default)]
    pub output: Option<String>,
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Config(format!("n = {} must be at least 3", self.n)));
        }
        if self.k < 1 {
            return Err(Error::Config(format!("k = {} must be at least 1", self.k)));
        }
        RadialGrid::new(self.grid.r_max, self.grid.n)?;
        self.metric()?;
        self.target_profile()?;
        if let Some(t) = &self.time {
            if !(t.dt_factor > 0.0 && t.dt_factor <= MAX_DT_FACTOR) {
                return Err(Error::Config(format!("dt_factor = {} must lie in (0, {MAX_DT_FACTOR}]", t.dt_factor)));
            }
            if !(t.t_final >= 0.0 && t.t_final.is_finite() && t.snap_every > 0.0) {
                return Err(Error::Config("time needs t_final >= 0 and snap_every > 0".into()));
            }
            let support = self.data.as_ref().map(|d| d.support).unwrap_or(0.0);
            if t.t_final > self.grid.r_max - support + 1e-12 {
                return Err(Error::Config(format!(
                    "T = {} exceeds R_max - data support = {}",
                    t.t_final,
                    self.grid.r_max - support
                )));
            }
        }
        let e = &self.estimates;
        if e.family_size == 0 || e.smoothing_family_size == 0 || e.strichartz_cells < 4 || e.strichartz_time_samples < 2 {
            return Err(Error::Config("estimate families and samples must be non-empty".into()));
        }
        if !(e.epsilon >= 0.0) || !(e.strichartz_horizon > 0.0) {
            return Err(Error::Config("epsilon must be >= 0 and the Strichartz horizon positive".into()));
        }
        if e.lambdas.iter().any(|l| !(l[1] > 0.0)) {
            return Err(Error::Config("every lambda needs a positive imaginary part".into()));
        }
        for &s in &e.dimshift_orders {
            if ![0.0, 0.5, 1.0, 2.0].contains(&s) {
                return Err(Error::Config(format!("dimshift order {s} not in {{0, 1/2, 1, 2}}")));
            }
            if self.n < 5 && s != 0.0 && s != 1.0 {
                return Err(Error::Config(format!("dimshift order {s} needs n >= 5")));
            }
        }
        Ok(())
    }

    pub fn metric(&self) -> Result<MetricProfile> {
        MetricProfile::from_spec(&self.manifold)
    }

    pub fn target_profile(&self) -> Result<TargetProfile> {
        TargetProfile::from_spec(&self.target)
    }

    pub fn radial_grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.grid.r_max, self.grid.n)
    }

    pub fn wave_problem(&self) -> Result<WaveProblem> {
        let time = self.time.ok_or_else(|| Error::Config("evolution needs a \"time\" section".into()))?;
        let data = self.data.clone().ok_or_else(|| Error::Config("evolution needs a \"data\" section".into()))?;
        WaveProblem::new(
            self.metric()?,
            self.target_profile()?,
            self.n,
            self.k,
            self.radial_grid()?,
            time.t_final,
            time.dt_factor,
            time.snap_every,
            data,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "manifold": {"kind": "hyperbolic"},
        "n": 3, "k": 1,
        "grid": {"r_max": 20.0, "n": 200},
        "time": {"t_final": 5.0},
        "data": {"amplitude": 0.05}
    }"#;

    #[test]
    fn defaults_apply() {
        let s = Scenario::from_json(BASE).unwrap();
        assert_eq!(s.delta0, Delta0::Search);
        assert_eq!(s.seed, 0);
        assert_eq!(s.target.kind, "sphere");
        assert_eq!(s.time.unwrap().dt_factor, 0.1);
        assert!(s.checks.is_empty());
    }

    #[test]
    fn rejects_bad_fields() {
        let with = |from: &str, to: &str| Scenario::from_json(&BASE.replace(from, to));
        assert!(with("\"k\": 1", "\"k\": 0").is_err());
        assert!(with("\"n\": 3", "\"n\": 2").is_err());
        assert!(with("\"t_final\": 5.0", "\"t_final\": 5.0, \"dt_factor\": 0.6").is_err());
        assert!(with("\"t_final\": 5.0", "\"t_final\": 15.0").is_err());
        assert!(with("\"n\": 3,", "\"n\": 3, \"checks\": [\"hardy3\"],").is_err());
        assert!(with("\"n\": 3,", "\"n\": 3, \"delta0\": \"maybe\",").is_err());
        assert!(with("\"n\": 3,", "\"n\": 3, \"delta0\": 1.5,").is_err());
        assert!(with("\"n\": 3,", "\"n\": 3, \"colour\": 1,").is_err());
        let ok = with("\"n\": 3,", "\"n\": 3, \"delta0\": 0.5, \"checks\": [\"norm_equivalence\"],").unwrap();
        assert_eq!(ok.delta0, Delta0::Value(0.5));
        assert_eq!(ok.checks, vec![CheckName::NormEquivalence]);
    }

    #[test]
    fn round_trips_through_json() {
        let s = Scenario::from_json(BASE).unwrap();
        let back = Scenario::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
    }
}

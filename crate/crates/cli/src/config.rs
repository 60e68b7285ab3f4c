//! Experiment descriptions: which array, which methods, which control points.

use std::collections::BTreeSet;
use std::path::Path;

use beamctl_core::array::{ArrayConfig, ArrayModel, BUNDLED_ARRAYS};
use beamctl_core::metrics::GridSpec;
use beamctl_core::session::{Method, StepRequest};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

const EXPERIMENT1_JSON: &str = include_str!("../assets/experiment1.json");
const EXPERIMENT2_JSON: &str = include_str!("../assets/experiment2.json");

/// Names accepted by [`ExperimentConfig::bundled`].
pub const BUNDLED_EXPERIMENTS: &[&str] = &["experiment1", "experiment2"];

/// Either the name of a bundled array or a full inline description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArraySource {
    Bundled(String),
    Inline(ArrayConfig),
}

impl ArraySource {
    pub fn resolve(&self) -> Result<ArrayModel> {
        match self {
            ArraySource::Bundled(name) => ArrayModel::bundled(name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown bundled array `{name}` (known: {})",
                    BUNDLED_ARRAYS.join(", ")
                ))
            }),
            ArraySource::Inline(cfg) => Ok(ArrayModel::from_config(cfg)?),
        }
    }
}

/// Re-runs of one control step over a range of desired levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// 1-based index into `steps`.
    pub step_index: usize,
    pub rho_db_from: f64,
    pub rho_db_to: f64,
    pub rho_db_step: f64,
}

impl SweepSpec {
    fn validate(&self, steps: usize) -> Result<()> {
        if self.step_index == 0 || self.step_index > steps {
            return Err(CliError::Config(format!(
                "sweep.step_index {} is outside 1..={steps}",
                self.step_index
            )));
        }
        let finite = self.rho_db_from.is_finite() && self.rho_db_to.is_finite() && self.rho_db_step.is_finite();
        if !finite || self.rho_db_step <= 0.0 || self.rho_db_from > self.rho_db_to {
            return Err(CliError::Config(format!(
                "sweep range from={} to={} step={} is not an increasing finite range",
                self.rho_db_from, self.rho_db_to, self.rho_db_step
            )));
        }
        if self.rho_db_to > 0.0 {
            return Err(CliError::Config(format!(
                "sweep.rho_db_to = {} exceeds 0 dB",
                self.rho_db_to
            )));
        }
        if self.points() > 100_000 {
            return Err(CliError::Config("sweep has more than 100000 points".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> usize {
        ((self.rho_db_to - self.rho_db_from) / self.rho_db_step + 1e-9).floor() as usize + 1
    }

    /// `from + i·step`, both endpoints included when the span divides evenly.
    pub fn rho_values(&self) -> Vec<f64> {
        (0..self.points())
            .map(|i| self.rho_db_from + i as f64 * self.rho_db_step)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub array: ArraySource,
    pub theta0_deg: f64,
    pub methods: Vec<Method>,
    pub steps: Vec<StepRequest>,
    /// Pattern export grid, also used for `J`.
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    pub fn from_json(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&src)
    }

    pub fn bundled(name: &str) -> Option<Self> {
        let src = match name {
            "experiment1" => EXPERIMENT1_JSON,
            "experiment2" => EXPERIMENT2_JSON,
            _ => return None,
        };
        Some(Self::from_json(src).expect("bundled experiment configs are valid"))
    }

    /// Checks every invariant and resolves the array.
    pub fn validate(&self) -> Result<ArrayModel> {
        if self.methods.is_empty() {
            return Err(CliError::Config("methods is empty".into()));
        }
        let distinct: BTreeSet<Method> = self.methods.iter().copied().collect();
        if distinct.len() != self.methods.len() {
            return Err(CliError::Config("methods lists a method twice".into()));
        }
        if self.steps.is_empty() {
            return Err(CliError::Config("steps is empty".into()));
        }
        if !self.theta0_deg.is_finite() || !(-90.0..=90.0).contains(&self.theta0_deg) {
            return Err(CliError::Config(format!(
                "theta0_deg = {} is outside [-90, 90]",
                self.theta0_deg
            )));
        }
        for (i, s) in self.steps.iter().enumerate() {
            s.validate()
                .map_err(|e| CliError::Config(format!("step {}: {e}", i + 1)))?;
        }
        self.grid.validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.validate(self.steps.len())?;
        }
        self.array.resolve()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::bundled("experiment1").unwrap()
    }

    #[test]
    fn bundled_configs_validate() {
        for name in BUNDLED_EXPERIMENTS {
            let cfg = ExperimentConfig::bundled(name).unwrap();
            assert_eq!(cfg.validate().unwrap().len(), 11);
        }
        assert!(ExperimentConfig::bundled("nope").is_none());
    }

    #[test]
    fn empty_methods_rejected() {
        let mut c = base();
        c.methods.clear();
        assert!(matches!(c.validate(), Err(CliError::Config(m)) if m.contains("methods")));
    }

    #[test]
    fn duplicate_methods_rejected() {
        let mut c = base();
        c.methods = vec![Method::Oparc, Method::Oparc];
        assert!(c.validate().is_err());
    }

    #[test]
    fn empty_steps_rejected() {
        let mut c = base();
        c.steps.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn positive_level_rejected() {
        let mut c = base();
        c.steps[1].rho_db = 0.5;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("step 2"), "{err}");
    }

    #[test]
    fn sweep_index_must_name_a_step() {
        let mut c = base();
        c.sweep.as_mut().unwrap().step_index = 3;
        assert!(c.validate().is_err());
        c.sweep.as_mut().unwrap().step_index = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sweep_range_checks() {
        let mut c = base();
        c.sweep.as_mut().unwrap().rho_db_to = 1.0;
        assert!(c.validate().is_err());
        let mut c = base();
        c.sweep.as_mut().unwrap().rho_db_step = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sweep_points_include_both_ends() {
        let s = base().sweep.unwrap();
        let v = s.rho_values();
        assert_eq!(v.len(), 61);
        assert_eq!(v[0], -50.0);
        assert_eq!(*v.last().unwrap(), -20.0);
        assert!(v.contains(&-30.0));
    }

    #[test]
    fn unknown_array_name() {
        let mut c = base();
        c.array = ArraySource::Bundled("nope".into());
        assert!(c.validate().is_err());
    }

    #[test]
    fn inline_array_and_defaults() {
        let src = r#"{
            "array": {"omega_rad_s": 1.8849555921538759e9, "elements": [{"x_m": 0.0}, {"x_m": 0.08}, {"x_m": 0.16}]},
            "theta0_deg": 0, "methods": ["oparc"], "steps": [{"theta_deg": 30, "rho_db": -20}]
        }"#;
        let c = ExperimentConfig::from_json(src).unwrap();
        assert_eq!(c.grid, GridSpec::default());
        assert_eq!(c.validate().unwrap().len(), 3);
    }

    #[test]
    fn unknown_fields_rejected() {
        let src = r#"{"array": "tapered11", "theta0_deg": 0, "methods": ["oparc"],
            "steps": [{"theta_deg": 30, "rho_db": -20}], "extra": 1}"#;
        assert!(ExperimentConfig::from_json(src).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let c = base();
        let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}

//! Batch execution of experiment configs and level sweeps.

use beamctl_core::array::{Angle, ArrayModel};
use beamctl_core::metrics::{GridSpec, PatternGrid};
use beamctl_core::session::{Method, Session, StepRequest, StepSummary};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternMeta {
    pub theta0_deg: f64,
    pub method: Method,
    /// Number of control steps applied; 0 is the quiescent pattern.
    pub step: usize,
}

/// Pattern in export form: levels clamped at the export floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternExport {
    pub angles_deg: Vec<f64>,
    pub levels_db: Vec<f64>,
    pub meta: PatternMeta,
}

impl PatternExport {
    pub fn new(pattern: &PatternGrid, meta: PatternMeta) -> Self {
        let p = pattern.floored();
        Self {
            angles_deg: p.angles_deg,
            levels_db: p.levels_db,
            meta,
        }
    }

    pub fn to_csv(&self) -> String {
        PatternGrid {
            angles_deg: self.angles_deg.clone(),
            levels_db: self.levels_db.clone(),
        }
        .to_csv()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub steps: Vec<StepSummary>,
    /// One snapshot per state, quiescent first.
    pub patterns: Vec<PatternExport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub config: ExperimentConfig,
    pub runs: Vec<MethodRun>,
}

impl SessionRecord {
    pub fn run(&self, method: Method) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.method == method)
    }
}

fn new_session(model: &ArrayModel, theta0_deg: f64, method: Method, grid: GridSpec) -> Result<Session> {
    Ok(Session::new(model.clone(), Angle::from_degrees(theta0_deg), method).with_metric_grid(grid)?)
}

fn apply(session: &mut Session, request: StepRequest) -> Result<StepSummary> {
    let index = session.step_count() + 1;
    let method = session.method();
    session
        .step(request)
        .cloned()
        .map_err(|source| CliError::Step { method, index, source })
}

pub fn run_method(model: &ArrayModel, config: &ExperimentConfig, method: Method) -> Result<MethodRun> {
    let mut session = new_session(model, config.theta0_deg, method, config.grid)?;
    let snapshot = |s: &Session| -> Result<PatternExport> {
        let meta = PatternMeta {
            theta0_deg: config.theta0_deg,
            method,
            step: s.step_count(),
        };
        Ok(PatternExport::new(&s.pattern(&config.grid)?, meta))
    };
    let mut patterns = vec![snapshot(&session)?];
    let mut steps = Vec::with_capacity(config.steps.len());
    for request in &config.steps {
        steps.push(apply(&mut session, *request)?);
        patterns.push(snapshot(&session)?);
    }
    Ok(MethodRun {
        method,
        steps,
        patterns,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<SessionRecord> {
    let model = config.validate()?;
    let runs = config
        .methods
        .iter()
        .map(|m| run_method(&model, config, *m))
        .collect::<Result<Vec<_>>>()?;
    Ok(SessionRecord {
        config: config.clone(),
        runs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho_db: f64,
    pub method: Method,
    pub d_db: Option<f64>,
    pub j_rms: f64,
    pub gain_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    /// 1-based step whose level was swept.
    pub step_index: usize,
    pub theta_deg: f64,
    /// Ordered by level, then by the config's method order.
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }
}

fn sweep_point(model: &ArrayModel, config: &ExperimentConfig, index: usize, rho_db: f64) -> Result<Vec<SweepRow>> {
    let mut prefix = config.steps[..index].to_vec();
    prefix[index - 1].rho_db = rho_db;
    config
        .methods
        .iter()
        .map(|&method| {
            let mut session = new_session(model, config.theta0_deg, method, config.grid)?;
            let mut last = None;
            for r in &prefix {
                last = Some(apply(&mut session, *r)?);
            }
            let m = last.expect("prefix is nonempty").metrics;
            Ok(SweepRow {
                rho_db,
                method,
                d_db: m.d_db,
                j_rms: m.j_rms,
                gain_db: m.gain_db,
            })
        })
        .collect()
}

fn sweep_with(config: &ExperimentConfig, parallel: bool) -> Result<SweepTable> {
    let model = config.validate()?;
    let spec = config
        .sweep
        .ok_or_else(|| CliError::Config("config has no sweep section".into()))?;
    let levels = spec.rho_values();
    let point = |rho: &f64| sweep_point(&model, config, spec.step_index, *rho);
    let chunks: Vec<Vec<SweepRow>> = if parallel {
        levels.par_iter().map(point).collect::<Result<_>>()?
    } else {
        levels.iter().map(point).collect::<Result<_>>()?
    };
    Ok(SweepTable {
        step_index: spec.step_index,
        theta_deg: config.steps[spec.step_index - 1].theta_deg,
        rows: chunks.into_iter().flatten().collect(),
    })
}

/// Every level runs in fresh sessions, spread over the rayon pool.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepTable> {
    sweep_with(config, true)
}

pub fn run_sweep_serial(config: &ExperimentConfig) -> Result<SweepTable> {
    sweep_with(config, false)
}

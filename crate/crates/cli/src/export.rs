//! Deterministic file exports. Rendering is separate from writing so that
//! tests can compare bytes without touching the disk.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use beamctl_core::session::StepSummary;
use serde::Serialize;

use crate::error::{io_err, Result};
use crate::experiment::{SessionRecord, SweepTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// `(file name, contents)` pairs in a fixed order.
pub type Rendered = Vec<(String, String)>;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn step_row(out: &mut String, s: &StepSummary) {
    let gamma = s.gamma.as_ref().map(|g| g.applied);
    let beta = s.beta.as_ref().map(|b| b.applied);
    let mu = s.mu.as_ref().map(|m| m.mu);
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        s.method,
        s.index,
        s.theta_deg,
        s.rho_db,
        s.achieved_level_db,
        s.gain_db,
        opt(s.metrics.d_db),
        s.metrics.j_rms,
        opt(gamma.map(|g| g.re)),
        opt(gamma.map(|g| g.im)),
        opt(beta),
        opt(mu.map(|m| m.re)),
        opt(mu.map(|m| m.im)),
    )
    .expect("writing to a String cannot fail");
}

pub fn steps_csv(record: &SessionRecord) -> String {
    let mut out = String::from(
        "method,step,theta_deg,rho_db,achieved_level_db,gain_db,d_db,j_rms,gamma_re,gamma_im,beta,mu_re,mu_im\n",
    );
    for run in &record.runs {
        for s in &run.steps {
            step_row(&mut out, s);
        }
    }
    out
}

pub fn render_record(record: &SessionRecord, format: Format) -> Result<Rendered> {
    let mut files = Vec::new();
    match format {
        Format::Csv => files.push(("steps.csv".to_string(), steps_csv(record))),
        Format::Json => files.push(("record.json".to_string(), json(record)?)),
    }
    for run in &record.runs {
        for p in &run.patterns {
            let stem = format!("pattern_{}_step{}", run.method, p.meta.step);
            match format {
                Format::Csv => files.push((format!("{stem}.csv"), p.to_csv())),
                Format::Json => files.push((format!("{stem}.json"), json(p)?)),
            }
        }
    }
    Ok(files)
}

pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = String::from("rho_db,method,d_db,j_rms,gain_db\n");
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.rho_db,
            r.method,
            opt(r.d_db),
            r.j_rms,
            r.gain_db
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn render_sweep(table: &SweepTable) -> Result<Rendered> {
    Ok(vec![
        ("sweep.csv".to_string(), sweep_csv(table)),
        ("sweep.json".to_string(), json(table)?),
    ])
}

/// Writes rendered files into `dir`, creating it if needed.
pub fn write_all(dir: &Path, files: &Rendered) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(io_err(&path))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::experiment::{run_experiment, run_sweep};

    fn record() -> SessionRecord {
        run_experiment(&ExperimentConfig::bundled("experiment1").unwrap()).unwrap()
    }

    #[test]
    fn csv_layout() {
        let files = render_record(&record(), Format::Csv).unwrap();
        assert_eq!(files[0].0, "steps.csv");
        assert_eq!(files.len(), 1 + 3 * 3);
        let steps = &files[0].1;
        assert_eq!(steps.lines().count(), 1 + 6);
        let a2rc_row = steps.lines().nth(1).unwrap();
        assert!(a2rc_row.starts_with("a2rc,1,-45,-40,"));
        assert!(!a2rc_row.ends_with(','));
        let oparc_row = steps.lines().nth(5).unwrap();
        assert_eq!(oparc_row.split(',').count(), 13);
        assert!(files.iter().any(|(n, _)| n == "pattern_oparc_step2.csv"));
    }

    #[test]
    fn json_has_no_nulls_in_patterns() {
        let files = render_record(&record(), Format::Json).unwrap();
        let (_, body) = files.iter().find(|(n, _)| n == "pattern_parc_step2.json").unwrap();
        let v: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(v["meta"]["method"], "parc");
        assert!(v["levels_db"].as_array().unwrap().iter().all(|x| x.is_f64()));
    }

    #[test]
    fn record_json_round_trips() {
        let rec = record();
        let files = render_record(&rec, Format::Json).unwrap();
        let back: SessionRecord = serde_json::from_str(&files[0].1).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn sweep_files() {
        let t = run_sweep(&ExperimentConfig::bundled("experiment2").unwrap()).unwrap();
        let files = render_sweep(&t).unwrap();
        assert_eq!(files[0].1.lines().count(), 1 + 41 * 3);
    }

    #[test]
    fn writes_into_new_directory() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested");
        let paths = write_all(&out, &vec![("a.txt".into(), "x".into())]).unwrap();
        assert_eq!(std::fs::read_to_string(&paths[0]).unwrap(), "x");
    }
}

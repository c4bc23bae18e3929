//! CSV and manifest output of a sweep.
//!
//! | file              | one row per                         |
//! |-------------------|-------------------------------------|
//! | `frames.csv`      | point × trial × frame               |
//! | `summary.csv`     | point × frame (mean over trials)    |
//! | `schedules.csv`   | point × trial × frame × UAV         |
//! | `convergence.csv` | point × trial × frame × iteration   |
//! | `manifest.json`   | run metadata                        |
//!
//! `count_m` columns hold the number of UAVs assigned to radar `m`. Wall
//! times go only to the manifest, so reruns with equal seeds produce
//! byte-identical CSVs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ExperimentSpec, SweepPoint, SweepResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub base_seed: u64,
    pub trials: usize,
    pub frames: usize,
    pub points: usize,
    /// SHA-256 of the JSON-serialized spec.
    pub config_hash: String,
    pub git_revision: Option<String>,
    pub crate_version: String,
    pub wall_time_s: f64,
    pub invariant_violations: usize,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn config_hash(spec: &ExperimentSpec) -> String {
    let bytes = serde_json::to_vec(spec).expect("spec is always serializable");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `git rev-parse HEAD` of the working directory, if available.
pub fn git_revision() -> Option<String> {
    let out = Command::new("git").args(["rev-parse", "HEAD"]).output().ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
}

fn create(dir: &Path, name: &str) -> Result<(csv::Writer<BufWriter<File>>, PathBuf)> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    Ok((w, path))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

const POINT_COLUMNS: [&str; 8] = ["point", "variant", "setting", "cost_factor", "sigma", "budget", "shrink", "population"];

fn point_fields(index: usize, p: &SweepPoint) -> Vec<String> {
    vec![
        index.to_string(),
        p.variant.name().to_string(),
        p.setting.map_or(String::new(), |s| s.index().to_string()),
        p.cost_factor.to_string(),
        p.sigma.to_string(),
        p.budget.to_string(),
        p.shrink.to_string(),
        p.population.to_string(),
    ]
}

fn header(fixed: &[&str], tail: &[&str]) -> Vec<String> {
    fixed.iter().chain(tail).map(|s| s.to_string()).collect()
}

fn count_columns(m: usize, prefix: &str) -> Vec<String> {
    (1..=m).map(|r| format!("{prefix}{r}")).collect()
}

/// Writes the CSVs and manifest for `result` into `dir`, creating it.
pub fn emit_results(result: &SweepResult, dir: impl AsRef<Path>, wall_time_s: f64) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let m = result.spec.scenario.radars.len();

    let (mut w, path) = create(dir, "frames.csv")?;
    let mut head = header(
        &POINT_COLUMNS,
        &["trial", "seed", "frame", "utility", "planned_utility", "found_feasible", "feasible", "idle"],
    );
    head.extend(count_columns(m, "count_"));
    head.extend(
        ["evaluations", "inner_runs", "iterations", "truncated", "assignment"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&head)?;
    for (i, p) in result.points.iter().enumerate() {
        for t in &p.trials {
            for f in &t.frames {
                let mut row = point_fields(i, &p.point);
                row.extend([
                    t.trial.to_string(),
                    t.seed.to_string(),
                    f.frame.to_string(),
                    f.utility.to_string(),
                    f.planned_utility.to_string(),
                    f.found_feasible.to_string(),
                    f.feasible.to_string(),
                    f.idle_count().to_string(),
                ]);
                row.extend(f.counts().iter().map(|c| c.to_string()));
                let tasks: Vec<String> = f.assignment.tasks().iter().map(|t| t.to_string()).collect();
                row.extend([
                    f.evaluations.to_string(),
                    f.inner_runs.to_string(),
                    f.iterations.to_string(),
                    f.truncated.to_string(),
                    tasks.join(" "),
                ]);
                w.write_record(&row)?;
            }
        }
    }
    finish(w, &path)?;

    let (mut w, path) = create(dir, "summary.csv")?;
    let mut head = header(
        &POINT_COLUMNS,
        &["frame", "trials", "mean_utility", "std_utility", "feasible_trials", "mean_idle"],
    );
    head.extend(count_columns(m, "mean_count_"));
    w.write_record(&head)?;
    for (i, p) in result.points.iter().enumerate() {
        for s in &p.stats {
            let mut row = point_fields(i, &p.point);
            row.extend([
                s.frame.to_string(),
                s.trials.to_string(),
                s.mean_utility.to_string(),
                s.std_utility.to_string(),
                s.feasible_trials.to_string(),
                s.mean_idle.to_string(),
            ]);
            row.extend(s.mean_counts.iter().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
    }
    finish(w, &path)?;

    let (mut w, path) = create(dir, "schedules.csv")?;
    w.write_record(["point", "trial", "frame", "uav", "task", "bandwidth_hz"])?;
    for (i, p) in result.points.iter().enumerate() {
        for t in &p.trials {
            for f in &t.frames {
                for r in crate::model::schedule_rows(&f.assignment, &f.bandwidth) {
                    w.write_record([
                        i.to_string(),
                        t.trial.to_string(),
                        r.frame.to_string(),
                        r.uav.to_string(),
                        r.task.to_string(),
                        r.bandwidth_hz.to_string(),
                    ])?;
                }
            }
        }
    }
    finish(w, &path)?;

    let (mut w, path) = create(dir, "convergence.csv")?;
    w.write_record(["point", "trial", "frame", "iteration", "evaluations", "best_utility"])?;
    for (i, p) in result.points.iter().enumerate() {
        for t in &p.trials {
            for f in &t.frames {
                for h in &f.history {
                    let best = if h.best_utility.is_finite() {
                        h.best_utility.to_string()
                    } else {
                        String::new()
                    };
                    w.write_record([
                        i.to_string(),
                        t.trial.to_string(),
                        f.frame.to_string(),
                        h.iteration.to_string(),
                        h.evaluations.to_string(),
                        best,
                    ])?;
                }
            }
        }
    }
    finish(w, &path)?;

    let spec = &result.spec;
    let manifest = Manifest {
        name: spec.name.clone(),
        base_seed: spec.base_seed,
        trials: spec.trials,
        frames: spec.frames,
        points: result.points.len(),
        config_hash: config_hash(spec),
        git_revision: git_revision(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s,
        invariant_violations: result.violations(),
        files: ["frames.csv", "summary.csv", "schedules.csv", "convergence.csv"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let path = dir.join("manifest.json");
    let mut file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(&mut file, &manifest)?;
    file.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

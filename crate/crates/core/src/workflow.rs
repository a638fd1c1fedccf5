//! The simulate / ensemble / converge workflows with their output files.
//! Each writes a [`RunManifest`] into the output directory, and
//! [`replay`] re-runs a manifest into a fresh directory.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::brownian::sample_increments;
use crate::converge::{cmd_converge, ConvergenceReport, Study};
use crate::ensemble::{moment_check, run_ensemble, EnsembleRun, EnsembleStats, MomentReport};
use crate::error::{Error, Result};
use crate::integrator::{run_path, SimConfig, TrajectoryRecord};
use crate::io::manifest::{RunCommand, RunManifest};
use crate::io::snapshot::write_snapshot;
use crate::io::timeseries::write_timeseries;
use crate::spectral::norms;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const FINAL_SNAPSHOT_FILE: &str = "final.snap";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const ENSEMBLE_FILE: &str = "ensemble.json";
pub const CONVERGE_FILE: &str = "converge.json";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_trajectory(traj: &TrajectoryRecord, dir: &Path) -> Result<Vec<String>> {
    write_timeseries(traj, &dir.join(TIMESERIES_FILE))?;
    let mut outputs = vec![TIMESERIES_FILE.to_string()];
    if !traj.snapshots.is_empty() {
        create_dir(&dir.join(SNAPSHOT_DIR))?;
    }
    for s in &traj.snapshots {
        let name = format!("{SNAPSHOT_DIR}/step_{:08}.snap", s.step);
        write_snapshot(&s.field, &dir.join(&name))?;
        outputs.push(name);
    }
    Ok(outputs)
}

/// One path from the configured initial datum, driven by increments drawn
/// from the master seed. On blowup the partial record and the manifest are
/// still written before the error is returned.
pub fn simulate(cfg: &SimConfig, dir: &Path) -> Result<(RunManifest, TrajectoryRecord)> {
    create_dir(dir)?;
    let u0 = cfg.initial_field()?;
    let inc = sample_increments(cfg.seed, cfg.steps()?, cfg.dt, cfg.noise.m())?;
    match run_path(cfg, &u0, &inc) {
        Ok(traj) => {
            let mut outputs = write_trajectory(&traj, dir)?;
            write_snapshot(&traj.last, &dir.join(FINAL_SNAPSHOT_FILE))?;
            outputs.push(FINAL_SNAPSHOT_FILE.to_string());
            let manifest = RunManifest::new(cfg, RunCommand::Simulate, outputs);
            manifest.write(dir)?;
            Ok((manifest, traj))
        }
        Err(Error::Blowup { t, last, partial }) => {
            let outputs = write_trajectory(&partial, dir)?;
            RunManifest::new(cfg, RunCommand::Simulate, outputs).write(dir)?;
            Err(Error::Blowup { t, last, partial })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleOutput<'a> {
    pub u0_v_sq: f64,
    pub stats: &'a EnsembleStats,
    pub moment_check: &'a MomentReport,
}

pub fn ensemble(
    cfg: &SimConfig,
    paths: usize,
    p_list: &[f64],
    workers: Option<usize>,
    dir: &Path,
) -> Result<(RunManifest, EnsembleRun, MomentReport)> {
    let u0 = cfg.initial_field()?;
    let run = run_ensemble(cfg, &u0, paths, p_list, workers)?;
    create_dir(dir)?;
    let u0_v_sq = norms(&u0).v_sq;
    let check = moment_check(&run.stats, u0_v_sq);
    let out = EnsembleOutput {
        u0_v_sq,
        stats: &run.stats,
        moment_check: &check,
    };
    write_json(&dir.join(ENSEMBLE_FILE), &out)?;
    let manifest = RunManifest::new(
        cfg,
        RunCommand::Ensemble {
            paths,
            p: p_list.to_vec(),
        },
        vec![ENSEMBLE_FILE.to_string()],
    );
    manifest.write(dir)?;
    Ok((manifest, run, check))
}

pub fn converge(
    cfg: &SimConfig,
    study: Study,
    levels: usize,
    dir: &Path,
) -> Result<(RunManifest, ConvergenceReport)> {
    let report = cmd_converge(cfg, study, levels)?;
    create_dir(dir)?;
    write_json(&dir.join(CONVERGE_FILE), &report)?;
    let manifest = RunManifest::new(
        cfg,
        RunCommand::Converge { study, levels },
        vec![CONVERGE_FILE.to_string()],
    );
    manifest.write(dir)?;
    Ok((manifest, report))
}

/// Re-run the command recorded in `manifest_path` into `dir`.
pub fn replay(manifest_path: &Path, dir: &Path, workers: Option<usize>) -> Result<RunManifest> {
    let recorded = RunManifest::read(manifest_path)?;
    let cfg = recorded.config()?;
    let manifest = match &recorded.command {
        RunCommand::Simulate => simulate(&cfg, dir)?.0,
        RunCommand::Ensemble { paths, p } => ensemble(&cfg, *paths, p, workers, dir)?.0,
        RunCommand::Converge { study, levels } => converge(&cfg, *study, *levels, dir)?.0,
    };
    Ok(manifest)
}

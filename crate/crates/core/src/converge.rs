//! Refinement studies behind `scnse converge`.
//!
//! The time-step study drives every level with one Brownian path refined by
//! bridge sampling and measures `sup_t |u_dt(t) − u_{dt/2}(t)|_H` on the
//! coarser grid. The Galerkin study doubles `n_max` per level with a common
//! path and a common initial datum, embedding the coarse solution by
//! zero-padding before comparing.

use serde::{Deserialize, Serialize};

use crate::brownian::{sample_increments, BrownianIncrements};
use crate::error::{Error, Result};
use crate::integrator::{run_path, SimConfig, TrajectoryRecord};
use crate::spectral::{build_space, h_norm, normalize_to_sphere, project, SpectralVelocity};

/// Minimum successive error ratio per halving.
pub const MIN_SHRINK: f64 = 1.8;
/// Minimum fitted order for noise-free time-step studies.
pub const MIN_DETERMINISTIC_ORDER: f64 = 1.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    Dt,
    N,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub study: Study,
    /// `dt` or `n_max` of each level.
    pub levels: Vec<f64>,
    /// `errors[i]` compares level `i` with level `i + 1`.
    pub errors: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Least-squares slope of `−log2(error)` against the level index.
    pub fitted_order: f64,
    pub pass: bool,
}

fn sup_distance(coarse: &TrajectoryRecord, fine: &TrajectoryRecord, stride: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for step in 0..coarse.len() {
        let (Some(a), Some(b)) = (coarse.snapshot_at(step), fine.snapshot_at(step * stride)) else {
            return Err(Error::invalid(format!("missing snapshot at step {step}")));
        };
        let a = if a.n_max() == b.n_max() {
            a.clone()
        } else {
            a.embed(b.space())?
        };
        worst = worst.max(h_norm(&a.sub(b)?));
    }
    Ok(worst)
}

fn fit_order(errors: &[f64]) -> f64 {
    let n = errors.len() as f64;
    let xs: Vec<f64> = (0..errors.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.log2()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn report(study: Study, levels: Vec<f64>, errors: Vec<f64>, need_order: bool) -> ConvergenceReport {
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let fitted_order = fit_order(&errors);
    let pass = match study {
        Study::Dt => {
            ratios.iter().all(|&r| r >= MIN_SHRINK)
                && (!need_order || fitted_order >= MIN_DETERMINISTIC_ORDER)
        }
        Study::N => errors.windows(2).all(|w| w[1] < w[0]),
    };
    ConvergenceReport {
        study,
        levels,
        errors,
        ratios,
        fitted_order,
        pass,
    }
}

fn check_levels(levels: usize) -> Result<()> {
    if levels < 3 {
        return Err(Error::invalid(format!(
            "a convergence study needs at least 3 levels, got {levels}"
        )));
    }
    Ok(())
}

/// Halve `cfg.dt` `levels − 1` times along one bridge-refined path.
pub fn dt_study(cfg: &SimConfig, levels: usize) -> Result<ConvergenceReport> {
    check_levels(levels)?;
    let base_steps = cfg.steps()?;
    let base = sample_increments(cfg.seed, base_steps, cfg.dt, cfg.noise.m())?;
    let u0 = cfg.initial_field()?;
    let run = |level: u32, inc: &BrownianIncrements| {
        let mut c = cfg.with_refined_dt(level);
        c.snapshot_stride = 1;
        run_path(&c, &u0, inc)
    };
    let mut inc = base;
    let mut prev = run(0, &inc)?;
    let mut errors = Vec::with_capacity(levels - 1);
    for level in 1..levels as u32 {
        inc = inc.refine();
        let next = run(level, &inc)?;
        errors.push(sup_distance(&prev, &next, 2)?);
        prev = next;
    }
    let dts = (0..levels).map(|l| cfg.dt / 2f64.powi(l as i32)).collect();
    Ok(report(Study::Dt, dts, errors, cfg.noise.m() == 0))
}

/// Double `cfg.n_max` `levels − 1` times with a shared path. The initial
/// datum is built on the finest space, then projected and renormalized.
pub fn n_study(cfg: &SimConfig, levels: usize) -> Result<ConvergenceReport> {
    check_levels(levels)?;
    let ns: Vec<usize> = (0..levels).map(|l| cfg.n_max << l).collect();
    let finest = build_space(*ns.last().expect("levels ≥ 3"))?;
    let u_fine = cfg.initial.build(&finest)?;
    let inc = sample_increments(cfg.seed, cfg.steps()?, cfg.dt, cfg.noise.m())?;
    let run = |n: usize| -> Result<TrajectoryRecord> {
        let c = SimConfig {
            n_max: n,
            snapshot_stride: 1,
            ..cfg.clone()
        };
        let u0: SpectralVelocity = normalize_to_sphere(&project(&build_space(n)?, &u_fine)?)?;
        run_path(&c, &u0, &inc)
    };
    let mut prev = run(ns[0])?;
    let mut errors = Vec::with_capacity(levels - 1);
    for &n in &ns[1..] {
        let next = run(n)?;
        errors.push(sup_distance(&prev, &next, 1)?);
        prev = next;
    }
    Ok(report(Study::N, ns.iter().map(|&n| n as f64).collect(), errors, false))
}

pub fn cmd_converge(cfg: &SimConfig, study: Study, levels: usize) -> Result<ConvergenceReport> {
    match study {
        Study::Dt => dt_study(cfg, levels),
        Study::N => n_study(cfg, levels),
    }
}

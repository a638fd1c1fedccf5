//! Monte Carlo estimation of the moment bounds over independent paths.
//!
//! Path `i` draws its increments from `derive_path_seed(cfg.seed, i)`, so any
//! single path can be reproduced in isolation. Paths run on a rayon pool;
//! aggregation is a sequential fold in path-index order, so results do not
//! depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::sample_increments;
use crate::diagnostics::{cumulative_trapezoid, mean_se};
use crate::error::{Error, Result};
use crate::integrator::{run_path, SimConfig, TrajectoryRecord};
use crate::operators::NoiseModel;
use crate::spectral::SpectralVelocity;

/// Environment variable overriding the ensemble worker count.
pub const WORKERS_ENV: &str = "SCNSE_WORKERS";

/// SplitMix64 finalizer applied to `master + (index + 1)·γ`.
///
/// For a fixed master the map is a bijection of the index (odd-constant
/// multiply, shift, bijective mix), so path seeds never collide.
pub fn derive_path_seed(master: u64, path_index: u64) -> u64 {
    let mut z = master.wrapping_add(path_index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `K_p = 2p[1 − K_c²(p − 1)]`, positive exactly on the admissible range.
pub fn k_p(p: f64, k_c: f64) -> f64 {
    2.0 * p * (1.0 - k_c * k_c * (p - 1.0))
}

/// Reject exponents outside `[1, 1 + 1/K_c²)`.
pub fn check_moment_exponents(noise: &NoiseModel, p_list: &[f64]) -> Result<()> {
    let bound = noise.moment_bound();
    for &p in p_list {
        if !(p >= 1.0 && p < bound) {
            return Err(Error::InadmissibleMoment { p, bound });
        }
        assert!(k_p(p, noise.k_c()) > 0.0, "K_p must be positive for p = {p}");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub p: f64,
    /// Per-time estimate of `E‖u(t)‖^{2p}_V`.
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// Estimate of `E sup_t ‖u(t)‖^{2p}_V` (max over the step grid).
    pub mean_sup: f64,
    pub se_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_paths: usize,
    pub times: Vec<f64>,
    pub mean_v_sq: Vec<f64>,
    pub se_v_sq: Vec<f64>,
    pub p_values_requested: Vec<f64>,
    pub moments: Vec<MomentSeries>,
    /// `E ∫₀ᵀ |u|²_{D(A)} dt` with the graph norm.
    pub mean_int_da: f64,
    pub se_int_da: f64,
    /// `E ∫₀ᵀ |Au − ‖u‖²_V u|²_H dt`.
    pub mean_int_dissipation: f64,
    pub se_int_dissipation: f64,
    pub mean_mu: Vec<f64>,
    pub se_mu: Vec<f64>,
}

impl EnsembleStats {
    pub fn mean_sup_v_2p(&self) -> Vec<f64> {
        self.moments.iter().map(|m| m.mean_sup).collect()
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::invalid("worker count must be positive"));
        }
        b = b.num_threads(w);
    }
    b.build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

/// Worker count from [`WORKERS_ENV`], if set and valid.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&w| w > 0)
}

/// Run `n_paths` independent paths from `u0`. Snapshots are disabled.
pub fn run_paths(
    cfg: &SimConfig,
    u0: &SpectralVelocity,
    n_paths: usize,
    workers: Option<usize>,
) -> Result<Vec<TrajectoryRecord>> {
    let steps = cfg.steps()?;
    let cfg = SimConfig {
        snapshot_stride: 0,
        ..cfg.clone()
    };
    pool(workers)?.install(|| {
        (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let seed = derive_path_seed(cfg.seed, i as u64);
                let inc = sample_increments(seed, steps, cfg.dt, cfg.noise.m())?;
                run_path(&cfg, u0, &inc)
            })
            .collect()
    })
}

fn column(records: &[TrajectoryRecord], f: impl Fn(&TrajectoryRecord) -> f64) -> Result<(f64, f64)> {
    let v: Vec<f64> = records.iter().map(f).collect();
    let (m, se) = mean_se(&v)?;
    Ok((m, se.unwrap_or(f64::NAN)))
}

/// Aggregate per-path functionals in path order.
pub fn aggregate(records: &[TrajectoryRecord], noise: &NoiseModel, p_list: &[f64]) -> Result<EnsembleStats> {
    check_moment_exponents(noise, p_list)?;
    if records.len() < 2 {
        return Err(Error::invalid("at least two paths are needed for standard errors"));
    }
    let times = records[0].times.clone();
    if records.iter().any(|r| r.times != times) {
        return Err(Error::invalid("records use different time grids"));
    }
    let nt = times.len();
    let per_time = |f: &dyn Fn(&TrajectoryRecord, usize) -> f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut mean = Vec::with_capacity(nt);
        let mut se = Vec::with_capacity(nt);
        for i in 0..nt {
            let (m, s) = column(records, |r| f(r, i))?;
            mean.push(m);
            se.push(s);
        }
        Ok((mean, se))
    };

    let (mean_v_sq, se_v_sq) = per_time(&|r, i| r.diag[i].norms.v_sq)?;
    let (mean_mu, se_mu) = per_time(&|r, i| r.mu_series[i])?;
    let moments = p_list
        .iter()
        .map(|&p| {
            let (mean, se) = per_time(&|r, i| r.diag[i].norms.v_sq.powf(p))?;
            let (mean_sup, se_sup) = column(records, |r| {
                r.diag.iter().map(|d| d.norms.v_sq.powf(p)).fold(0.0, f64::max)
            })?;
            Ok(MomentSeries {
                p,
                mean,
                se,
                mean_sup,
                se_sup,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let integral = |r: &TrajectoryRecord, g: &dyn Fn(usize) -> f64| {
        let vals: Vec<f64> = (0..nt).map(g).collect();
        *cumulative_trapezoid(&r.times, &vals).last().unwrap_or(&0.0)
    };
    let (mean_int_da, se_int_da) =
        column(records, |r| integral(r, &|i| r.diag[i].norms.graph_da_sq()))?;
    let (mean_int_dissipation, se_int_dissipation) =
        column(records, |r| integral(r, &|i| r.diag[i].dissipation))?;

    Ok(EnsembleStats {
        n_paths: records.len(),
        times,
        mean_v_sq,
        se_v_sq,
        p_values_requested: p_list.to_vec(),
        moments,
        mean_int_da,
        se_int_da,
        mean_int_dissipation,
        se_int_dissipation,
        mean_mu,
        se_mu,
    })
}

/// Paths plus their aggregate.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub records: Vec<TrajectoryRecord>,
    pub stats: EnsembleStats,
}

pub fn run_ensemble(
    cfg: &SimConfig,
    u0: &SpectralVelocity,
    n_paths: usize,
    p_list: &[f64],
    workers: Option<usize>,
) -> Result<EnsembleRun> {
    check_moment_exponents(&cfg.noise, p_list)?;
    if n_paths < 2 {
        return Err(Error::invalid("an ensemble needs at least two paths"));
    }
    let records = run_paths(cfg, u0, n_paths, workers)?;
    let stats = aggregate(&records, &cfg.noise, p_list)?;
    Ok(EnsembleRun { records, stats })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentViolation {
    pub quantity: String,
    pub t: f64,
    pub mean: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub pass: bool,
    /// Smallest `bound + bands·SE − mean` over all checked quantities and times.
    pub worst_margin: f64,
    pub worst_quantity: String,
    pub worst_t: f64,
    pub violations: Vec<MomentViolation>,
}

/// Number of standard errors allowed above a bound.
pub const SE_BANDS: f64 = 3.0;

/// Check `E‖u(t)‖^{2p}_V ≤ ‖u0‖^{2p}_V + 3·SE` at every recorded time,
/// for `p = 1` and each requested `p`. The bound is formed as
/// `(‖u0‖²_V)^p`, the same expression the per-path moments use.
pub fn moment_check(stats: &EnsembleStats, u0_v_sq: f64) -> MomentReport {
    let mut series: Vec<(String, f64, &[f64], &[f64])> =
        vec![("E|u|_V^2".to_string(), 1.0, &stats.mean_v_sq, &stats.se_v_sq)];
    for m in &stats.moments {
        series.push((format!("E|u|_V^{}", 2.0 * m.p), m.p, &m.mean, &m.se));
    }
    let mut report = MomentReport {
        pass: true,
        worst_margin: f64::INFINITY,
        worst_quantity: String::new(),
        worst_t: 0.0,
        violations: Vec::new(),
    };
    for (name, p, mean, se) in series {
        let bound = u0_v_sq.powf(p);
        for ((&t, &m), &s) in stats.times.iter().zip(mean).zip(se) {
            let margin = bound + SE_BANDS * s - m;
            if margin < report.worst_margin || margin.is_nan() {
                report.worst_margin = margin;
                report.worst_quantity = name.clone();
                report.worst_t = t;
            }
            if !(margin >= 0.0) {
                report.pass = false;
                report.violations.push(MomentViolation {
                    quantity: name.clone(),
                    t,
                    mean: m,
                    bound,
                });
            }
        }
    }
    report
}

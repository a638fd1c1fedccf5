//! Post-processing checks on recorded trajectories: sphere constraint,
//! pathwise enstrophy balance, the weighted stability functional of two
//! paths driven by the same noise, and martingale statistics of `μ_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::TrajectoryRecord;
use crate::spectral::h_norm;

/// `max_t ||u(t)|_H − 1|`.
pub fn constraint_error(traj: &TrajectoryRecord) -> f64 {
    traj.diag.iter().map(|d| d.constraint_err).fold(0.0, f64::max)
}

/// Cumulative trapezoid integral of `values` on the grid `times`.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.extend(values.first().map(|_| 0.0));
    for i in 1..values.len().min(times.len()) {
        acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        out.push(acc);
    }
    out
}

/// Residual of the enstrophy identity
/// `R(t) = ‖u(t)‖²_V + 2∫₀ᵗ D − ‖u0‖²_V − 2μ_n(t)`.
pub fn enstrophy_balance(traj: &TrajectoryRecord) -> Vec<f64> {
    let d: Vec<f64> = traj.diag.iter().map(|x| x.dissipation).collect();
    let int_d = cumulative_trapezoid(&traj.times, &d);
    let v0 = traj.diag.first().map_or(0.0, |x| x.norms.v_sq);
    traj.diag
        .iter()
        .zip(&int_d)
        .zip(&traj.mu_series)
        .map(|((x, i), mu)| x.norms.v_sq + 2.0 * i - v0 - 2.0 * mu)
        .collect()
}

pub fn max_abs(series: &[f64]) -> f64 {
    series.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    pub r_of_t: Vec<f64>,
    /// `e^{−r(t)} |u₁(t) − u₂(t)|²_H`.
    pub weighted_dist: Vec<f64>,
    /// `|U(t)|²_H` without the weight.
    pub dist_sq: Vec<f64>,
    /// Largest positive increment of `weighted_dist` (0 if non-increasing).
    pub monotone_violation: f64,
}

/// Weighted distance of two paths sharing noise, with
/// `r(t) = ∫₀ᵗ [8‖u₁‖²_V + 2(‖u₁‖_V + ‖u₂‖_V)² |u₁|²_H] ds`.
///
/// Both records need a snapshot at every step.
pub fn stability_functional(
    traj1: &TrajectoryRecord,
    traj2: &TrajectoryRecord,
) -> Result<StabilityReport> {
    if traj1.times != traj2.times {
        return Err(Error::invalid("trajectories use different time grids"));
    }
    if traj1.increments != traj2.increments {
        return Err(Error::invalid("trajectories are driven by different increments"));
    }
    let n = traj1.len();
    let integrand: Vec<f64> = traj1
        .diag
        .iter()
        .zip(&traj2.diag)
        .map(|(a, b)| {
            let s = a.norms.v_sq.sqrt() + b.norms.v_sq.sqrt();
            8.0 * a.norms.v_sq + 2.0 * s * s * a.norms.h * a.norms.h
        })
        .collect();
    let r_of_t = cumulative_trapezoid(&traj1.times, &integrand);
    let mut dist_sq = Vec::with_capacity(n);
    for step in 0..n {
        let (Some(a), Some(b)) = (traj1.snapshot_at(step), traj2.snapshot_at(step)) else {
            return Err(Error::invalid(format!(
                "missing snapshot at step {step}; the stability functional needs snapshot_stride = 1"
            )));
        };
        dist_sq.push(h_norm(&a.sub(b)?).powi(2));
    }
    let weighted_dist: Vec<f64> = r_of_t
        .iter()
        .zip(&dist_sq)
        .map(|(r, d)| (-r).exp() * d)
        .collect();
    let monotone_violation = weighted_dist
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    Ok(StabilityReport {
        times: traj1.times.clone(),
        r_of_t,
        weighted_dist,
        dist_sq,
        monotone_violation,
    })
}

/// Sample mean and standard error of a set of values. The SE is `None` for
/// a single sample.
///
/// Sums are shifted by the first value, so identical samples give back that
/// value exactly.
pub fn mean_se(values: &[f64]) -> Result<(f64, Option<f64>)> {
    let &x0 = values.first().ok_or_else(|| Error::invalid("empty ensemble"))?;
    let n = values.len() as f64;
    let shift = values.iter().map(|x| x - x0).sum::<f64>() / n;
    let mean = x0 + shift;
    if values.len() < 2 {
        return Ok((mean, None));
    }
    let var = values.iter().map(|x| (x - x0 - shift).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, Some((var / n).sqrt())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleStat {
    pub t: f64,
    pub mean: f64,
    /// `None` when only one path is available.
    pub se: Option<f64>,
}

impl MartingaleStat {
    /// `|mean| ≤ bands·SE`; fails when the SE is undefined.
    pub fn within(&self, bands: f64) -> bool {
        self.se.is_some_and(|se| self.mean.abs() <= bands * se)
    }
}

/// Mean and SE of `μ_n(t)` across paths. `t` must lie on the common grid.
pub fn martingale_stat(records: &[TrajectoryRecord], t: f64) -> Result<MartingaleStat> {
    let first = records.first().ok_or_else(|| Error::invalid("empty ensemble"))?;
    let dt = first.increments.dt();
    let idx = (t / dt).round() as usize;
    if idx >= first.len() || (first.times[idx] - t).abs() > 1e-9 * dt.max(t) {
        return Err(Error::invalid(format!("t = {t} is not on the time grid")));
    }
    let values = records
        .iter()
        .map(|r| {
            if r.times != first.times {
                Err(Error::invalid("records use different time grids"))
            } else {
                Ok(r.mu_series[idx])
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean, se) = mean_se(&values)?;
    Ok(MartingaleStat { t, mean, se })
}

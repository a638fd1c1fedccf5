//! Time stepping for the Galerkin system in Stratonovich form,
//!
//! ```text
//! du = (−Au − B(u) + ‖u‖²_V u) dt + Σ_j C_j u ∘ dW_j,   |u(0)|_H = 1.
//! ```
//!
//! Two schemes are provided. `Splitting` composes the exact noise flow (a
//! random translation, since the `c_j` are constant) with a classical RK4
//! step of the deterministic drift in Strang order. `Heun` is the standard
//! Stratonovich predictor-corrector.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::brownian::BrownianIncrements;
use crate::error::{Error, Result};
use crate::operators::{constrained_drift, dissipation, stokes, NoiseModel};
use crate::spectral::{
    build_space, h_norm, inner_h, norms, normalize_to_sphere, random_field, GalerkinSpace,
    ModeIndex, NormTriple, SpectralVelocity,
};

/// Any norm above this aborts the path.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Largest admissible number of time steps.
pub const MAX_STEPS: usize = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Splitting,
    Heun,
}

/// Initial datum, normalized onto the unit sphere before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialCondition {
    /// [`random_field`] with the given spectral decay.
    Random { decay: f64, seed: u64 },
    /// A single normalized eigenmode pair `±k`.
    Eigenmode { k: [i32; 2] },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Random {
            decay: 3.0,
            seed: 0,
        }
    }
}

impl InitialCondition {
    pub fn build(&self, space: &Arc<GalerkinSpace>) -> Result<SpectralVelocity> {
        match *self {
            InitialCondition::Random { decay, seed } => {
                if !(decay > 2.0 && decay.is_finite()) {
                    return Err(Error::invalid(format!(
                        "initial decay must exceed 2, got {decay}"
                    )));
                }
                Ok(random_field(seed, space, decay))
            }
            InitialCondition::Eigenmode { k } => {
                SpectralVelocity::eigenmode(space, ModeIndex::new(k[0], k[1])?)
            }
        }
    }
}

/// Fully resolved simulation parameters. Viscosity is fixed to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_max: usize,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub project_each_step: bool,
    pub seed: u64,
    /// Store a field snapshot every `snapshot_stride` steps; 0 disables.
    pub snapshot_stride: usize,
    pub noise: NoiseModel,
    pub initial: InitialCondition,
}

impl SimConfig {
    /// Reference configuration with the given noise and time step.
    pub fn new(n_max: usize, dt: f64, t_end: f64, noise: NoiseModel) -> Self {
        Self {
            n_max,
            dt,
            t_end,
            scheme: Scheme::Splitting,
            project_each_step: true,
            seed: 0,
            snapshot_stride: 0,
            noise,
            initial: InitialCondition::default(),
        }
    }

    /// Number of steps `t_end / dt`, which must be (numerically) an integer.
    pub fn steps(&self) -> Result<usize> {
        if self.n_max == 0 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.dt > self.t_end {
            return Err(Error::invalid("dt must not exceed t_end"));
        }
        let ratio = self.t_end / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio {
            return Err(Error::invalid(format!(
                "t_end / dt = {ratio} is not an integer step count"
            )));
        }
        if steps > MAX_STEPS as f64 {
            return Err(Error::invalid(format!("{steps} steps exceed the budget {MAX_STEPS}")));
        }
        Ok(steps as usize)
    }

    pub fn space(&self) -> Result<Arc<GalerkinSpace>> {
        build_space(self.n_max)
    }

    pub fn initial_field(&self) -> Result<SpectralVelocity> {
        self.initial.build(&self.space()?)
    }

    /// Same configuration with the time step halved `times` times.
    pub fn with_refined_dt(&self, times: u32) -> Self {
        Self {
            dt: self.dt / 2f64.powi(times as i32),
            ..self.clone()
        }
    }
}

/// Diagnostics recorded at every time level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub norms: NormTriple,
    /// `|Au − ‖u‖²_V u|²_H`.
    pub dissipation: f64,
    /// `||u|_H − 1|`.
    pub constraint_err: f64,
}

impl StepDiagnostics {
    pub fn of(u: &SpectralVelocity) -> Self {
        let n = norms(u);
        Self {
            norms: n,
            dissipation: dissipation(u),
            constraint_err: (n.h - 1.0).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub field: SpectralVelocity,
}

/// Output of [`run_path`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub diag: Vec<StepDiagnostics>,
    pub increments: BrownianIncrements,
    /// `μ_n(t_i) = Σ_{l<i} Σ_j ⟨Au(t_l), C_j u(t_l)⟩_H ΔW_j(t_l)`.
    pub mu_series: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// State at the last recorded time level.
    pub last: SpectralVelocity,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Snapshot field at `step`, if recorded.
    pub fn snapshot_at(&self, step: usize) -> Option<&SpectralVelocity> {
        self.snapshots
            .binary_search_by_key(&step, |s| s.step)
            .ok()
            .map(|i| &self.snapshots[i].field)
    }
}

/// `Σ_j C_j u ΔW_j`: a single transport with vector `Σ_j c_j ΔW_j`.
fn noise_increment(model: &NoiseModel, u: &SpectralVelocity, dw: &[f64]) -> SpectralVelocity {
    let c = effective_shift(model, dw);
    u.map_imag_symbol(|k| k.dot(c))
}

fn effective_shift(model: &NoiseModel, dw: &[f64]) -> [f64; 2] {
    model
        .vectors()
        .iter()
        .zip(dw)
        .fold([0.0, 0.0], |acc, (c, w)| [acc[0] + c[0] * w, acc[1] + c[1] * w])
}

/// Exact flow of `du = Σ_j C_j u ∘ dW_j` over one step:
/// `ψ̂_k ↦ e^{i k·s} ψ̂_k` with `s = Σ_j c_j ΔW_j`, i.e. `u(x) ↦ u(x + s)`.
pub fn noise_flow_exact(model: &NoiseModel, u: &SpectralVelocity, dw: &[f64]) -> Result<SpectralVelocity> {
    if dw.len() != model.m() {
        return Err(Error::invalid(format!(
            "expected {} increments, got {}",
            model.m(),
            dw.len()
        )));
    }
    let s = effective_shift(model, dw);
    if s == [0.0, 0.0] {
        return Ok(u.clone());
    }
    let space = u.space();
    let psi = u.coeffs();
    Ok(SpectralVelocity::from_canonical(space, |k| {
        let (sin, cos) = k.dot(s).sin_cos();
        psi[space.index_of(k).expect("canonical mode")] * Complex64::new(cos, sin)
    }))
}

fn blowup(u: &SpectralVelocity) -> Error {
    Error::Blowup {
        t: f64::NAN,
        last: norms(u),
        partial: Box::new(TrajectoryRecord {
            times: Vec::new(),
            diag: Vec::new(),
            increments: BrownianIncrements::zeros(0, 1.0, 0),
            mu_series: Vec::new(),
            snapshots: Vec::new(),
            last: u.clone(),
        }),
    }
}

fn checked(v: SpectralVelocity, from: &SpectralVelocity) -> Result<SpectralVelocity> {
    let n = norms(&v);
    if !v.is_finite()
        || !n.is_finite()
        || n.h > BLOWUP_THRESHOLD
        || n.v_sq > BLOWUP_THRESHOLD
        || n.da_sq > BLOWUP_THRESHOLD
    {
        return Err(blowup(from));
    }
    Ok(v)
}

/// Sphere tolerance for the initial datum of a path.
pub const INITIAL_SPHERE_TOL: f64 = 1e-8;

/// Sphere tolerance for the input of a single step. Unprojected runs drift
/// off the sphere at the scheme's order, so this is much looser.
pub const STEP_SPHERE_TOL: f64 = 1e-2;

fn check_start(u: &SpectralVelocity, cfg: &SimConfig, tol: f64) -> Result<()> {
    if u.n_max() != cfg.n_max {
        return Err(Error::SpaceMismatch {
            left: u.n_max(),
            right: cfg.n_max,
        });
    }
    let h = h_norm(u);
    if (h - 1.0).abs() > tol {
        return Err(Error::invalid(format!("state is off the unit sphere: |u|_H = {h}")));
    }
    Ok(())
}

fn rk4_drift(u: &SpectralVelocity, dt: f64) -> Result<SpectralVelocity> {
    let k1 = checked(constrained_drift(u), u)?;
    let k2 = checked(constrained_drift(&u.axpy(0.5 * dt, &k1)?), u)?;
    let k3 = checked(constrained_drift(&u.axpy(0.5 * dt, &k2)?), u)?;
    let k4 = checked(constrained_drift(&u.axpy(dt, &k3)?), u)?;
    let incr = k1.add(&k4)?.axpy(2.0, &k2.add(&k3)?)?;
    checked(u.axpy(dt / 6.0, &incr)?, u)
}

fn finish(cfg: &SimConfig, v: SpectralVelocity) -> Result<SpectralVelocity> {
    if cfg.project_each_step {
        normalize_to_sphere(&v)
    } else {
        Ok(v)
    }
}

/// One Strang step: half noise flow, RK4 drift step, half noise flow.
pub fn step_splitting(cfg: &SimConfig, u: &SpectralVelocity, dw: &[f64]) -> Result<SpectralVelocity> {
    check_start(u, cfg, STEP_SPHERE_TOL)?;
    let half: Vec<f64> = dw.iter().map(|w| 0.5 * w).collect();
    let a = noise_flow_exact(&cfg.noise, u, &half)?;
    let b = rk4_drift(&a, cfg.dt)?;
    let c = noise_flow_exact(&cfg.noise, &b, &half)?;
    finish(cfg, c)
}

/// One Stratonovich Heun (predictor-corrector) step.
pub fn step_heun(cfg: &SimConfig, u: &SpectralVelocity, dw: &[f64]) -> Result<SpectralVelocity> {
    check_start(u, cfg, STEP_SPHERE_TOL)?;
    if dw.len() != cfg.noise.m() {
        return Err(Error::invalid(format!(
            "expected {} increments, got {}",
            cfg.noise.m(),
            dw.len()
        )));
    }
    let dt = cfg.dt;
    let a0 = checked(constrained_drift(u), u)?;
    let n0 = noise_increment(&cfg.noise, u, dw);
    let pred = checked(u.axpy(dt, &a0)?.add(&n0)?, u)?;
    let a1 = checked(constrained_drift(&pred), u)?;
    let n1 = noise_increment(&cfg.noise, &pred, dw);
    let next = u.axpy(0.5 * dt, &a0.add(&a1)?)?.axpy(0.5, &n0.add(&n1)?)?;
    finish(cfg, checked(next, u)?)
}

pub fn step(cfg: &SimConfig, u: &SpectralVelocity, dw: &[f64]) -> Result<SpectralVelocity> {
    match cfg.scheme {
        Scheme::Splitting => step_splitting(cfg, u, dw),
        Scheme::Heun => step_heun(cfg, u, dw),
    }
}

/// Integrate one path over the full increment sequence, recording
/// diagnostics at every time level.
pub fn run_path(
    cfg: &SimConfig,
    u0: &SpectralVelocity,
    inc: &BrownianIncrements,
) -> Result<TrajectoryRecord> {
    let steps = cfg.steps()?;
    if inc.steps() != steps || inc.m() != cfg.noise.m() || inc.dt() != cfg.dt {
        return Err(Error::invalid(format!(
            "increments ({} steps, m = {}, dt = {}) do not match config ({steps} steps, m = {}, dt = {})",
            inc.steps(),
            inc.m(),
            inc.dt(),
            cfg.noise.m(),
            cfg.dt
        )));
    }
    check_start(u0, cfg, INITIAL_SPHERE_TOL)?;

    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(steps + 1),
        diag: Vec::with_capacity(steps + 1),
        increments: inc.clone(),
        mu_series: Vec::with_capacity(steps + 1),
        snapshots: Vec::new(),
        last: u0.clone(),
    };
    let mut u = u0.clone();
    let mut mu = 0.0;
    for i in 0..=steps {
        rec.times.push(i as f64 * cfg.dt);
        rec.diag.push(StepDiagnostics::of(&u));
        rec.mu_series.push(mu);
        if cfg.snapshot_stride > 0 && i % cfg.snapshot_stride == 0 {
            rec.snapshots.push(Snapshot {
                step: i,
                t: i as f64 * cfg.dt,
                field: u.clone(),
            });
        }
        if i == steps {
            rec.last = u;
            break;
        }
        let dw = inc.step(i);
        if cfg.noise.m() > 0 {
            let au = stokes(&u);
            mu += inner_h(&au, &noise_increment(&cfg.noise, &u, dw))?;
        }
        u = match step(cfg, &u, dw) {
            Ok(v) => v,
            Err(Error::Blowup { last, .. }) => {
                rec.last = u;
                return Err(Error::Blowup {
                    t: rec.times[i],
                    last,
                    partial: Box::new(rec),
                })
            }
            Err(e) => return Err(e),
        };
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::sample_increments;
    use crate::spectral::SpectralGrid;
    use std::f64::consts::PI;

    fn noise() -> NoiseModel {
        NoiseModel::new(vec![[0.6, 0.0], [0.0, 0.6]]).unwrap()
    }

    fn cfg(n: usize, dt: f64, t_end: f64, noise: NoiseModel) -> SimConfig {
        SimConfig::new(n, dt, t_end, noise)
    }

    fn dist(a: &SpectralVelocity, b: &SpectralVelocity) -> f64 {
        h_norm(&a.sub(b).unwrap())
    }

    #[test]
    fn step_count_validation() {
        let m = NoiseModel::none();
        assert_eq!(cfg(4, 1e-3, 0.5, m.clone()).steps().unwrap(), 500);
        assert!(cfg(4, 0.3, 0.5, m.clone()).steps().is_err());
        assert!(cfg(4, 1.0, 0.5, m.clone()).steps().is_err());
        assert!(cfg(4, -1e-3, 0.5, m).steps().is_err());
    }

    #[test]
    fn noise_flow_preserves_norms() {
        let s = build_space(8).unwrap();
        let u = random_field(1, &s, 2.0);
        let m = noise();
        let v = noise_flow_exact(&m, &u, &[0.37, -1.21]).unwrap();
        let (a, b) = (norms(&u), norms(&v));
        assert!((a.h - b.h).abs() < 1e-13 * a.h);
        assert!((a.v_sq - b.v_sq).abs() < 1e-13 * a.v_sq);
        assert!((a.da_sq - b.da_sq).abs() < 1e-13 * a.da_sq);
        assert_eq!(noise_flow_exact(&m, &u, &[0.0, 0.0]).unwrap(), u);
        assert!(noise_flow_exact(&m, &u, &[0.0]).is_err());
    }

    #[test]
    fn noise_flow_half_turn() {
        let s = build_space(2).unwrap();
        let m = NoiseModel::new(vec![[0.5, 0.0]]).unwrap();
        let u = random_field(3, &s, 1.0);
        // c·ΔW = π along x1
        let v = noise_flow_exact(&m, &u, &[2.0 * PI]).unwrap();
        let k = ModeIndex::new(1, 0).unwrap();
        let want = -u.coeff(k).unwrap();
        assert!((v.coeff(k).unwrap() - want).norm() < 1e-15);
    }

    #[test]
    fn noise_flow_is_a_translation() {
        // u(x) ↦ u(x + s), s = Σ c_j ΔW_j, checked on grid points
        let s = build_space(3).unwrap();
        let m = NoiseModel::new(vec![[0.5, 0.0], [0.0, 0.25]]).unwrap();
        let u = random_field(8, &s, 1.0);
        let n = 16;
        // shift by exactly two grid cells in x1 and one in x2
        let h = 2.0 * PI / n as f64;
        let dw = [2.0 * h / 0.5, 1.0 * h / 0.25];
        let v = noise_flow_exact(&m, &u, &dw).unwrap();
        let (pu, pv) = (u.to_physical(n).unwrap(), v.to_physical(n).unwrap());
        for i in 0..n {
            for j in 0..n {
                let shifted = ((i + 2) % n) * n + (j + 1) % n;
                assert!((pv.u1[i * n + j] - pu.u1[shifted]).abs() < 1e-13);
                assert!((pv.u2[i * n + j] - pu.u2[shifted]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn eigenmode_is_an_equilibrium() {
        let s = build_space(4).unwrap();
        let u = SpectralVelocity::eigenmode(&s, ModeIndex::new(2, 1).unwrap()).unwrap();
        for scheme in [Scheme::Splitting, Scheme::Heun] {
            let mut c = cfg(4, 1e-3, 1e-3, NoiseModel::none());
            c.scheme = scheme;
            let v = step(&c, &u, &[]).unwrap();
            assert!(dist(&u, &v) < 1e-12, "{scheme:?}");
        }
        // dt = 0, dw = 0 is the identity for Heun
        let mut c = cfg(4, 0.0, 1.0, noise());
        c.scheme = Scheme::Heun;
        let g = random_field(2, &s, 3.0);
        c.project_each_step = false;
        assert_eq!(step_heun(&c, &g, &[0.0, 0.0]).unwrap(), g);
    }

    #[test]
    fn projection_keeps_unit_norm() {
        let s = build_space(8).unwrap();
        let u = random_field(4, &s, 3.0);
        let c = cfg(8, 1e-3, 1e-3, noise());
        let v = step_splitting(&c, &u, &[0.03, -0.02]).unwrap();
        assert!((h_norm(&v) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn local_constraint_error_order() {
        // one unprojected splitting step, dt vs dt/2; at least third order
        // locally (the RK4 substep gives ~32x here)
        let s = build_space(8).unwrap();
        let u = random_field(5, &s, 3.0);
        let err = |dt: f64| {
            let mut c = cfg(8, dt, 1.0, NoiseModel::none());
            c.project_each_step = false;
            (h_norm(&step_splitting(&c, &u, &[]).unwrap()) - 1.0).abs()
        };
        let (a, b) = (err(4e-3), err(2e-3));
        assert!(a / b >= 8.0, "local ratio {}", a / b);
    }

    #[test]
    fn heun_matches_splitting_without_noise() {
        // m = 0: both schemes converge to the same deterministic trajectory
        let s = build_space(6).unwrap();
        let u0 = random_field(6, &s, 3.0);
        let t_end = 0.048;
        let run = |scheme: Scheme, dt: f64| {
            let mut c = cfg(6, dt, t_end, NoiseModel::none());
            c.scheme = scheme;
            let steps = c.steps().unwrap();
            (0..steps).fold(u0.clone(), |u, _| step(&c, &u, &[]).unwrap())
        };
        let errs: Vec<f64> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|&dt| dist(&run(Scheme::Heun, dt), &run(Scheme::Splitting, dt)))
            .collect();
        assert!(errs[0] / errs[1] >= 1.8 && errs[1] / errs[2] >= 1.8, "{errs:?}");
    }

    #[test]
    fn heun_uses_noise() {
        let s = build_space(4).unwrap();
        let u = random_field(2, &s, 3.0);
        let mut c = cfg(4, 1e-3, 1.0, noise());
        c.scheme = Scheme::Heun;
        let a = step(&c, &u, &[0.0, 0.0]).unwrap();
        let b = step(&c, &u, &[0.05, 0.0]).unwrap();
        assert!(dist(&a, &b) > 1e-3);
    }

    #[test]
    fn run_path_records_and_is_deterministic() {
        let mut c = cfg(6, 1e-3, 0.05, noise());
        c.snapshot_stride = 10;
        let u0 = c.initial_field().unwrap();
        let inc = sample_increments(3, 50, 1e-3, 2).unwrap();
        let a = run_path(&c, &u0, &inc).unwrap();
        let b = run_path(&c, &u0, &inc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 51);
        assert_eq!(a.times[0], 0.0);
        assert!(a.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(a.snapshots.len(), 6);
        assert_eq!(a.snapshot_at(10).map(|f| f.n_max()), Some(6));
        assert_eq!(a.mu_series[0], 0.0);
        let bad = sample_increments(3, 49, 1e-3, 2).unwrap();
        assert!(run_path(&c, &u0, &bad).is_err());
    }

    #[test]
    fn deterministic_enstrophy_decays() {
        let c = cfg(8, 1e-3, 0.2, NoiseModel::none());
        let u0 = c.initial_field().unwrap();
        let rec = run_path(&c, &u0, &BrownianIncrements::zeros(200, 1e-3, 0)).unwrap();
        for w in rec.diag.windows(2) {
            assert!(w[1].norms.v_sq <= w[0].norms.v_sq);
        }
        assert!(rec.mu_series.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn blowup_is_reported_with_partial_record() {
        // far outside the RK4 stability region for the top modes
        let c = cfg(16, 0.05, 1.0, NoiseModel::none());
        let u0 = random_field(1, &build_space(16).unwrap(), 2.1);
        let err = run_path(&c, &u0, &BrownianIncrements::zeros(20, 0.05, 0)).unwrap_err();
        match err {
            Error::Blowup { t, partial, .. } => {
                assert!((0.0..1.0).contains(&t));
                assert!(!partial.times.is_empty());
                assert_eq!(*partial.times.last().unwrap(), t);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_is_shared_across_threads() {
        let s = build_space(4).unwrap();
        let u = random_field(1, &s, 2.0);
        let base = crate::operators::nonlinear(&u);
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let u = u.clone();
                std::thread::spawn(move || crate::operators::nonlinear(&u))
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), base);
        }
        assert_eq!(SpectralGrid::dealiased(&s).size(), 16);
    }
}

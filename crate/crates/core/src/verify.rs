//! Operator identity suite behind `scnse verify`.
//!
//! Every identity is evaluated on seeded random fields for `n_max ∈ {2, 4, 6}`
//! and reported as the largest normalized residual.

use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::operators::{
    directional_quadrature, nonlinear, nonlinear_direct, stokes, transport, trilinear_b,
    FourierMultiplier, NoiseModel,
};
use crate::spectral::{build_space, h_norm, inner_h, norms, random_field, SpectralVelocity};

pub const VERIFY_N_MAX: [usize; 3] = [2, 4, 6];
pub const VERIFY_SAMPLES: usize = 50;

/// Signature of [`transport`]; the suite takes it as a parameter so that a
/// deliberately broken operator can be fed through it.
pub type TransportFn = fn(&NoiseModel, usize, &SpectralVelocity) -> Result<SpectralVelocity>;

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl IdentityCheck {
    pub fn pass(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

impl fmt::Display for IdentityCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<34} max residual {:.3e}  tol {:.0e}  {}",
            self.name,
            self.max_residual,
            self.tolerance,
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<IdentityCheck>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(IdentityCheck::pass)
    }

    pub fn check(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn suite_noise() -> NoiseModel {
    NoiseModel::new(vec![[0.6, 0.0], [0.0, 0.6], [0.3, -0.45]]).expect("admissible")
}

struct Tracker(Vec<IdentityCheck>);

impl Tracker {
    fn record(&mut self, name: &'static str, tolerance: f64, residual: f64) {
        let r = if residual.is_nan() { f64::INFINITY } else { residual };
        match self.0.iter_mut().find(|c| c.name == name) {
            Some(c) => c.max_residual = c.max_residual.max(r),
            None => self.0.push(IdentityCheck {
                name,
                max_residual: r,
                tolerance,
            }),
        }
    }
}

/// The full suite with the library transport operator.
pub fn cmd_verify() -> Result<VerifyReport> {
    verify_with(transport)
}

pub fn verify_with(transport_op: TransportFn) -> Result<VerifyReport> {
    let noise = suite_noise();
    let mut t = Tracker(Vec::new());
    for &n in &VERIFY_N_MAX {
        let space = build_space(n)?;
        let a = FourierMultiplier::stokes(&space);
        for j in 0..noise.m() {
            let c = FourierMultiplier::transport(&noise, j, &space)?;
            let ac = a.compose(&c)?;
            let ca = c.compose(&a)?;
            let diff = ac
                .symbol()
                .iter()
                .zip(ca.symbol())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            t.record("AC - CA (symbol, exact)", 0.0, diff);
        }
        for s in 0..VERIFY_SAMPLES as u64 {
            let seed = 1000 * n as u64 + s;
            let u = random_field(seed, &space, 1.0);
            let v = random_field(seed ^ 0x5555, &space, 1.5);
            let w = random_field(seed ^ 0xaaaa, &space, 0.5);
            let nu = norms(&u);
            let (vu, vv, vw) = (nu.v_sq.sqrt(), norms(&v).v_sq.sqrt(), norms(&w).v_sq.sqrt());
            let da = nu.graph_da_sq().sqrt();

            t.record("b(u,u,u)", 1e-12, trilinear_b(&u, &u, &u)?.abs() / vu.powi(3));
            let bu = nonlinear(&u);
            t.record("<B(u),u>", 1e-12, inner_h(&bu, &u)?.abs() / vu.powi(3));
            t.record(
                "<B(u),Au>",
                1e-12,
                inner_h(&bu, &stokes(&u))?.abs() / (nu.v_sq * da),
            );
            let skew = trilinear_b(&u, &v, &w)? + trilinear_b(&u, &w, &v)?;
            t.record("skew-symmetry b(u,v,w)+b(u,w,v)", 1e-12, skew.abs() / (vu * vv * vw));
            let direct = nonlinear_direct(&u);
            t.record(
                "B(u) pseudo-spectral vs direct",
                1e-11,
                h_norm(&bu.sub(&direct)?) / h_norm(&direct),
            );

            for (j, &cj) in noise.vectors().iter().enumerate() {
                let scale = cj[0].hypot(cj[1]) * vv * h_norm(&w);
                let cv = transport_op(&noise, j, &v)?;
                let cw = transport_op(&noise, j, &w)?;
                let s = inner_h(&cv, &w)? + inner_h(&v, &cw)?;
                t.record("skew-symmetry <C v,w>+<v,C w>", 1e-12, s.abs() / scale);
                let quad = directional_quadrature(cj, &v, &w)?;
                t.record(
                    "C_j vs directional quadrature",
                    1e-11,
                    (inner_h(&cv, &w)? - quad).abs() / scale,
                );
                let acu = stokes(&transport_op(&noise, j, &u)?);
                let cau = transport_op(&noise, j, &stokes(&u))?;
                t.record(
                    "AC - CA (applied)",
                    1e-14,
                    h_norm(&acu.sub(&cau)?) / h_norm(&acu),
                );
            }
        }
    }
    Ok(VerifyReport { checks: t.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flipped(model: &NoiseModel, j: usize, u: &SpectralVelocity) -> Result<SpectralVelocity> {
        Ok(transport(model, j, u)?.scale(-1.0))
    }

    #[test]
    fn suite_passes() {
        let report = cmd_verify().unwrap();
        for c in &report.checks {
            assert!(c.pass(), "{c}");
            assert!(c.max_residual <= 1e-11, "{c}");
        }
        assert_eq!(report.checks.len(), 9);
        assert_eq!(report.check("AC - CA (symbol, exact)").unwrap().max_residual, 0.0);
    }

    #[test]
    fn sign_error_in_transport_is_caught() {
        let report = verify_with(flipped).unwrap();
        assert!(!report.pass());
        let c = report.check("C_j vs directional quadrature").unwrap();
        assert!(!c.pass(), "{c}");
    }
}

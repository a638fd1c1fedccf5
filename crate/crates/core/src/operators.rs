//! Spatial operators of the constrained Galerkin system.
//!
//! All operators act on streamfunction coefficients and return fields in the
//! same space. `A`, `C_j` and the Itô correction are diagonal Fourier
//! multipliers; the nonlinearity is evaluated pseudo-spectrally on a
//! dealiased grid, with an explicit convolution sum kept as an oracle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    h_norm, inner_h, norms, GalerkinSpace, ModeIndex, SpectralGrid, SpectralVelocity,
    DOMAIN_MEASURE,
};

/// Constant transport-noise vectors `c_1, …, c_m` with `K_c = max |c_j| < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct NoiseModel {
    c: Vec<[f64; 2]>,
    k_c: f64,
}

impl NoiseModel {
    pub fn new(c: Vec<[f64; 2]>) -> Result<Self> {
        if c.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("noise vectors must be finite"));
        }
        let k_c = c.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        if k_c >= 1.0 {
            return Err(Error::NoiseTooStrong { k_c });
        }
        Ok(Self { c, k_c })
    }

    /// No noise (`m = 0`).
    pub fn none() -> Self {
        Self {
            c: Vec::new(),
            k_c: 0.0,
        }
    }

    pub fn m(&self) -> usize {
        self.c.len()
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.c
    }

    pub fn k_c(&self) -> f64 {
        self.k_c
    }

    /// Upper end of the admissible moment range `[1, 1 + 1/K_c²)`.
    pub fn moment_bound(&self) -> f64 {
        if self.k_c == 0.0 {
            f64::INFINITY
        } else {
            1.0 + 1.0 / (self.k_c * self.k_c)
        }
    }

    fn vector(&self, j: usize) -> Result<[f64; 2]> {
        self.c.get(j).copied().ok_or_else(|| {
            Error::invalid(format!("noise index {j} out of range (m = {})", self.m()))
        })
    }
}

impl TryFrom<Vec<[f64; 2]>> for NoiseModel {
    type Error = Error;

    fn try_from(c: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(c)
    }
}

impl From<NoiseModel> for Vec<[f64; 2]> {
    fn from(m: NoiseModel) -> Self {
        m.c
    }
}

/// A diagonal operator `ψ̂_k ↦ σ_k ψ̂_k` with `σ_{−k} = conj(σ_k)`.
///
/// Composition multiplies symbols, so commuting multipliers compose to
/// bitwise identical symbols in either order.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMultiplier {
    n_max: usize,
    symbol: Vec<Complex64>,
}

impl FourierMultiplier {
    pub fn from_symbol(space: &GalerkinSpace, f: impl Fn(ModeIndex) -> Complex64) -> Self {
        Self {
            n_max: space.n_max(),
            symbol: space.modes().iter().map(|&k| f(k)).collect(),
        }
    }

    pub fn stokes(space: &GalerkinSpace) -> Self {
        Self::from_symbol(space, |k| Complex64::new(k.norm_sq(), 0.0))
    }

    pub fn transport(model: &NoiseModel, j: usize, space: &GalerkinSpace) -> Result<Self> {
        let c = model.vector(j)?;
        Ok(Self::from_symbol(space, |k| Complex64::new(0.0, k.dot(c))))
    }

    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.n_max != other.n_max {
            return Err(Error::SpaceMismatch {
                left: self.n_max,
                right: other.n_max,
            });
        }
        Ok(Self {
            n_max: self.n_max,
            symbol: self.symbol.iter().zip(&other.symbol).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn apply(&self, u: &SpectralVelocity) -> Result<SpectralVelocity> {
        if u.n_max() != self.n_max {
            return Err(Error::SpaceMismatch {
                left: u.n_max(),
                right: self.n_max,
            });
        }
        let mut out = u.clone();
        for (c, s) in out.coeffs_mut().iter_mut().zip(&self.symbol) {
            *c = s * *c;
        }
        Ok(out)
    }
}

/// Stokes operator, `ψ̂_k ↦ |k|² ψ̂_k`.
pub fn stokes(u: &SpectralVelocity) -> SpectralVelocity {
    u.map_real_symbol(|k| k.norm_sq())
}

/// `P_n Π[(u·∇)u]`, computed through the vorticity: the curl of `(u·∇)u` is
/// `u·∇ω` for divergence-free `u`, so the streamfunction of the projected
/// term is `−(u·∇ω)^ / |k|²`.
pub fn nonlinear(u: &SpectralVelocity) -> SpectralVelocity {
    let grid = SpectralGrid::dealiased(u.space());
    let vel = grid.velocity(u);
    // ω̂ = −|k|² ψ̂, ∇ω packed as ∂1ω + i∂2ω
    let grad_w = grid.packed_pair(
        u,
        |k| Complex64::new(0.0, -k.k1 as f64 * k.norm_sq()),
        |k| Complex64::new(0.0, -k.k2 as f64 * k.norm_sq()),
    );
    let mut prod: Vec<Complex64> = vel
        .iter()
        .zip(&grad_w)
        .map(|(v, g)| Complex64::new(v.re * g.re + v.im * g.im, 0.0))
        .collect();
    grid.forward(&mut prod);
    SpectralVelocity::from_canonical(u.space(), |k| -prod[grid.slot(k)] / k.norm_sq())
}

/// `P_n Π[(u·∇)v]` from the velocity form of the product.
pub fn nonlinear_pair(u: &SpectralVelocity, v: &SpectralVelocity) -> Result<SpectralVelocity> {
    u.check_same_space(v)?;
    let grid = SpectralGrid::dealiased(u.space());
    let f = advect_on_grid(&grid, u, v);
    Ok(grid.project_packed(u.space(), f))
}

/// `(u·∇)v` sampled on `grid`, packed as `f1 + i·f2`.
fn advect_on_grid(
    grid: &SpectralGrid,
    u: &SpectralVelocity,
    v: &SpectralVelocity,
) -> Vec<Complex64> {
    let vel = grid.velocity(u);
    let d1 = grid.velocity_derivative(v, 0);
    let d2 = grid.velocity_derivative(v, 1);
    vel.iter()
        .zip(d1.iter().zip(&d2))
        .map(|(a, (p, q))| *p * a.re + *q * a.im)
        .collect()
}

/// Independent `O(N²)` convolution evaluation of [`nonlinear`]; intended for
/// small `n_max` only.
///
/// `(u·∇)u` has coefficients `f̂_k = Σ_{p+q=k} (û_p · iq) û_q` with
/// `û_p = i p^⊥ ψ̂_p`; the projection keeps `−i (k^⊥·f̂_k)/|k|²`.
pub fn nonlinear_direct(u: &SpectralVelocity) -> SpectralVelocity {
    let space = u.space();
    let modes = space.modes();
    let vel: Vec<[Complex64; 2]> = modes
        .iter()
        .zip(u.coeffs())
        .map(|(k, &c)| {
            [
                Complex64::new(0.0, -(k.k2 as f64)) * c,
                Complex64::new(0.0, k.k1 as f64) * c,
            ]
        })
        .collect();
    SpectralVelocity::from_canonical(space, |k| {
        let mut f = [Complex64::new(0.0, 0.0); 2];
        for (ip, p) in modes.iter().enumerate() {
            let Some(iq) = space.index_of(ModeIndex {
                k1: k.k1 - p.k1,
                k2: k.k2 - p.k2,
            }) else {
                continue;
            };
            let q = modes[iq];
            let up = vel[ip];
            let adv = Complex64::new(0.0, 1.0) * (up[0] * q.k1 as f64 + up[1] * q.k2 as f64);
            f[0] += adv * vel[iq][0];
            f[1] += adv * vel[iq][1];
        }
        let kperp_f = f[1] * k.k1 as f64 - f[0] * k.k2 as f64;
        Complex64::new(kperp_f.im, -kperp_f.re) / k.norm_sq()
    })
}

/// `b(u, v, w) = Σ_{i,j} ∫ uⁱ ∂ᵢvʲ wʲ dx` by alias-free quadrature.
pub fn trilinear_b(
    u: &SpectralVelocity,
    v: &SpectralVelocity,
    w: &SpectralVelocity,
) -> Result<f64> {
    u.check_same_space(v)?;
    u.check_same_space(w)?;
    // cubic products need a grid of at least 3·n_max + 1 points
    let grid = SpectralGrid::dealiased(u.space());
    let f = advect_on_grid(&grid, u, v);
    let wg = grid.velocity(w);
    Ok(quadrature(&grid, &f, &wg))
}

/// `∫ f·w dx` for packed real pairs sampled on `grid`.
pub(crate) fn quadrature(grid: &SpectralGrid, f: &[Complex64], w: &[Complex64]) -> f64 {
    let n = grid.size();
    let s: f64 = f.iter().zip(w).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
    s * DOMAIN_MEASURE / (n * n) as f64
}

/// `∫ ((c·∇)v)·w dx` by physical-space quadrature of velocity derivatives.
/// Shares no code with [`transport`]; used to check its symbol.
pub fn directional_quadrature(c: [f64; 2], v: &SpectralVelocity, w: &SpectralVelocity) -> Result<f64> {
    v.check_same_space(w)?;
    let grid = SpectralGrid::dealiased(v.space());
    let d1 = grid.velocity_derivative(v, 0);
    let d2 = grid.velocity_derivative(v, 1);
    let f: Vec<Complex64> = d1.iter().zip(&d2).map(|(p, q)| *p * c[0] + *q * c[1]).collect();
    let wg = grid.velocity(w);
    Ok(quadrature(&grid, &f, &wg))
}

/// Transport operator `C_j u = Π[(c_j·∇)u]`, the multiplier `i (c_j·k)`.
/// `j` is zero-based.
pub fn transport(model: &NoiseModel, j: usize, u: &SpectralVelocity) -> Result<SpectralVelocity> {
    let c = model.vector(j)?;
    Ok(u.map_imag_symbol(|k| k.dot(c)))
}

/// Itô correction `½ Σ_j C_j² u`, the multiplier `−½ Σ_j (c_j·k)²`.
pub fn ito_correction(model: &NoiseModel, u: &SpectralVelocity) -> SpectralVelocity {
    u.map_real_symbol(|k| {
        -0.5 * model
            .vectors()
            .iter()
            .map(|&c| {
                let s = k.dot(c);
                s * s
            })
            .sum::<f64>()
    })
}

/// Orthogonal projection onto the tangent space of the unit sphere at `u`,
/// `π_u(v) = v − ⟨v, u⟩_H u`.
pub fn tangent_project(u: &SpectralVelocity, v: &SpectralVelocity) -> Result<SpectralVelocity> {
    let h = h_norm(u);
    if (h - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!(
            "tangent projection needs |u|_H = 1, got {h}"
        )));
    }
    let a = inner_h(v, u)?;
    v.axpy(-a, u)
}

/// Deterministic part of the constrained Stratonovich drift,
/// `−Au − B(u) + ‖u‖²_V u` (viscosity 1).
pub fn constrained_drift(u: &SpectralVelocity) -> SpectralVelocity {
    let v_sq = norms(u).v_sq;
    let b = nonlinear(u);
    let mut out = SpectralVelocity::zeros(u.space());
    let modes = u.space().modes();
    for (i, o) in out.coeffs_mut().iter_mut().enumerate() {
        let c = u.coeffs()[i];
        *o = c * (v_sq - modes[i].norm_sq()) - b.coeffs()[i];
    }
    out
}

/// `|Au − ‖u‖²_V u|²_H`, the dissipation rate in the enstrophy balance.
pub fn dissipation(u: &SpectralVelocity) -> f64 {
    let v_sq = norms(u).v_sq;
    let s: f64 = u
        .space()
        .modes()
        .iter()
        .zip(u.coeffs())
        .map(|(k, c)| {
            let l = k.norm_sq();
            let d = l - v_sq;
            l * d * d * c.norm_sqr()
        })
        .sum();
    DOMAIN_MEASURE * s
}

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{GalerkinSpace, ModeIndex, SpectralVelocity};
use crate::error::{Error, Result};

/// Smallest power of two `≥ 3·n_max + 1`. Quadratic products of fields
/// truncated at `n_max` are alias-free on this grid for all retained modes.
pub fn dealiased_grid_size(n_max: usize) -> usize {
    (3 * n_max + 1).next_power_of_two()
}

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Uniform `n × n` grid on `[0, 2π)²` with cached FFT plans.
///
/// Arrays are row-major `[i·n + j]`, with `i` indexing `x1` and `j`
/// indexing `x2`. The inverse transform is unnormalized (a plain Fourier
/// sum); the forward transform divides by `n²`.
#[derive(Clone)]
pub struct SpectralGrid {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("n", &self.n).finish()
    }
}

impl SpectralGrid {
    pub fn new(n: usize) -> Self {
        let (fwd, inv) = plans(n);
        Self { n, fwd, inv }
    }

    /// Grid that resolves quadratic products of fields in `space` exactly.
    pub fn dealiased(space: &GalerkinSpace) -> Self {
        Self::new(dealiased_grid_size(space.n_max()))
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn slot(&self, k: ModeIndex) -> usize {
        let n = self.n as i64;
        let a = (k.k1 as i64).rem_euclid(n) as usize;
        let b = (k.k2 as i64).rem_euclid(n) as usize;
        a * self.n + b
    }

    fn transform(&self, fft: &dyn Fft<f64>, buf: &mut [Complex64]) {
        let n = self.n;
        debug_assert_eq!(buf.len(), n * n);
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(buf, &mut scratch);
        transpose(buf, n);
        fft.process_with_scratch(buf, &mut scratch);
        transpose(buf, n);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(self.inv.as_ref(), buf);
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(self.fwd.as_ref(), buf);
        let s = 1.0 / (self.n * self.n) as f64;
        buf.iter_mut().for_each(|c| *c *= s);
    }

    /// Grid array holding `f(index, k)` at each retained mode, zero elsewhere.
    pub fn scatter(
        &self,
        space: &GalerkinSpace,
        mut f: impl FnMut(usize, ModeIndex) -> Complex64,
    ) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        for (i, &k) in space.modes().iter().enumerate() {
            buf[self.slot(k)] = f(i, k);
        }
        buf
    }

    /// Physical samples of `u1 + i·u2` where `û_j,k = g_j(k)·ψ̂_k`.
    ///
    /// Packing two real fields into one complex transform halves the FFT
    /// count; the real and imaginary parts of the result are the two fields.
    pub(crate) fn packed_pair(
        &self,
        u: &SpectralVelocity,
        g1: impl Fn(ModeIndex) -> Complex64,
        g2: impl Fn(ModeIndex) -> Complex64,
    ) -> Vec<Complex64> {
        let psi = u.coeffs();
        let mut buf = self.scatter(u.space(), |i, k| {
            let c = psi[i];
            g1(k) * c + Complex64::new(0.0, 1.0) * g2(k) * c
        });
        self.inverse(&mut buf);
        buf
    }

    /// Samples of both velocity components.
    pub(crate) fn velocity(&self, u: &SpectralVelocity) -> Vec<Complex64> {
        // û = i k^⊥ ψ̂,  k^⊥ = (−k2, k1)
        self.packed_pair(
            u,
            |k| Complex64::new(0.0, -(k.k2 as f64)),
            |k| Complex64::new(0.0, k.k1 as f64),
        )
    }

    /// Samples of `∂_d u` (both components) for direction `d ∈ {0, 1}`.
    pub(crate) fn velocity_derivative(&self, u: &SpectralVelocity, d: usize) -> Vec<Complex64> {
        let kd = |k: ModeIndex| if d == 0 { k.k1 as f64 } else { k.k2 as f64 };
        // ∂_d û = i k_d · i k^⊥ ψ̂ = −k_d k^⊥ ψ̂
        self.packed_pair(
            u,
            |k| Complex64::new(kd(k) * k.k2 as f64, 0.0),
            |k| Complex64::new(-kd(k) * k.k1 as f64, 0.0),
        )
    }

    /// Leray-project the packed physical field `f1 + i·f2` onto `space`,
    /// returning streamfunction coefficients. Consumes `buf` as scratch.
    pub(crate) fn project_packed(
        &self,
        space: &Arc<GalerkinSpace>,
        mut buf: Vec<Complex64>,
    ) -> SpectralVelocity {
        self.forward(&mut buf);
        SpectralVelocity::from_canonical(space, |k| {
            let p = buf[self.slot(k)];
            let q = buf[self.slot(k.neg())].conj();
            let f1 = (p + q) * 0.5;
            let f2 = (p - q) * Complex64::new(0.0, -0.5);
            // ψ̂ = −i (k^⊥·f̂) / |k|²
            let kperp_f = f2 * k.k1 as f64 - f1 * k.k2 as f64;
            Complex64::new(kperp_f.im, -kperp_f.re) / k.norm_sq()
        })
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Velocity samples on a uniform `n × n` grid, `x = 2π(i, j)/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalVelocity {
    pub n: usize,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl PhysicalVelocity {
    /// `∫ |u|² dx` by the rectangle rule (spectrally exact for
    /// trigonometric polynomials resolved by the grid).
    pub fn l2_sq(&self) -> f64 {
        let s: f64 = self.u1.iter().zip(&self.u2).map(|(a, b)| a * a + b * b).sum();
        s * super::DOMAIN_MEASURE / (self.n * self.n) as f64
    }
}

impl SpectralVelocity {
    /// Sample the velocity on an `n × n` grid; `n ≥ 2·n_max + 1`.
    pub fn to_physical(&self, grid_size: usize) -> Result<PhysicalVelocity> {
        if grid_size < 2 * self.n_max() + 1 {
            return Err(Error::invalid(format!(
                "grid size {grid_size} cannot resolve n_max {} (need ≥ {})",
                self.n_max(),
                2 * self.n_max() + 1
            )));
        }
        let grid = SpectralGrid::new(grid_size);
        let buf = grid.velocity(self);
        Ok(PhysicalVelocity {
            n: grid_size,
            u1: buf.iter().map(|c| c.re).collect(),
            u2: buf.iter().map(|c| c.im).collect(),
        })
    }

    /// Recover coefficients on `space` from grid samples (Leray projection
    /// followed by truncation).
    pub fn from_physical(field: &PhysicalVelocity, space: &Arc<GalerkinSpace>) -> Result<Self> {
        if field.n < 2 * space.n_max() + 1 {
            return Err(Error::invalid(format!(
                "grid size {} cannot resolve n_max {}",
                field.n,
                space.n_max()
            )));
        }
        if field.u1.len() != field.n * field.n || field.u2.len() != field.n * field.n {
            return Err(Error::invalid("sample arrays do not match grid size"));
        }
        let grid = SpectralGrid::new(field.n);
        let buf = field
            .u1
            .iter()
            .zip(&field.u2)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        Ok(grid.project_packed(space, buf))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_space, norms, random_field};
    use std::f64::consts::PI;

    #[test]
    fn round_trip() {
        let s = build_space(6).unwrap();
        let u = random_field(9, &s, 2.0);
        for n in [13, 16, 19, 32] {
            let p = u.to_physical(n).unwrap();
            let back = SpectralVelocity::from_physical(&p, &s).unwrap();
            let err = back.sub(&u).unwrap();
            assert!(norms(&err).h < 1e-12, "n = {n}");
        }
        assert!(u.to_physical(12).is_err());
    }

    #[test]
    fn single_mode_by_hand() {
        // ψ̂_(1,0) = ψ̂_(−1,0) = 1/2  ⇒  ψ = cos x1,  u = (−∂2ψ, ∂1ψ) = (0, −sin x1)
        let s = build_space(1).unwrap();
        let u = SpectralVelocity::from_canonical(&s, |k| {
            if k == ModeIndex::new(1, 0).unwrap() {
                Complex64::new(0.5, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let n = 8;
        let p = u.to_physical(n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let x1 = 2.0 * PI * i as f64 / n as f64;
                assert!(p.u1[i * n + j].abs() < 1e-15);
                assert!((p.u2[i * n + j] + x1.sin()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sampled_field_is_divergence_free() {
        let s = build_space(5).unwrap();
        let u = random_field(4, &s, 1.0);
        let p = u.to_physical(16).unwrap();
        let grid = SpectralGrid::new(16);
        let mut buf: Vec<Complex64> =
            p.u1.iter().zip(&p.u2).map(|(&a, &b)| Complex64::new(a, b)).collect();
        grid.forward(&mut buf);
        let mut max_div: f64 = 0.0;
        for k1 in -8i32..8 {
            for k2 in -8i32..8 {
                let k = ModeIndex { k1, k2 };
                let pk = buf[grid.slot(k)];
                let qk = buf[grid.slot(k.neg())].conj();
                let f1 = (pk + qk) * 0.5;
                let f2 = (pk - qk) * Complex64::new(0.0, -0.5);
                max_div = max_div.max((f1 * k1 as f64 + f2 * k2 as f64).norm());
            }
        }
        assert!(max_div < 1e-15, "{max_div}");
    }

    #[test]
    fn parseval_matches_quadrature() {
        let s = build_space(7).unwrap();
        let u = random_field(11, &s, 2.5);
        let t = norms(&u);
        let p = u.to_physical(16).unwrap();
        assert!((p.l2_sq() - t.h * t.h).abs() < 1e-10 * t.h * t.h);
        // |∇u|² by quadrature of spectral derivatives
        let g = SpectralGrid::new(16);
        let mut grad = 0.0;
        for d in 0..2 {
            let du = g.velocity_derivative(&u, d);
            grad += du.iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        grad *= crate::spectral::DOMAIN_MEASURE / 256.0;
        assert!((grad - t.v_sq).abs() < 1e-10 * t.v_sq);
    }

    #[test]
    fn dealiased_sizes() {
        assert_eq!(dealiased_grid_size(16), 64);
        assert_eq!(dealiased_grid_size(2), 8);
        assert_eq!(dealiased_grid_size(32), 128);
    }
}

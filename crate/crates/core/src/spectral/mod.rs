//! Fourier representation of divergence-free, mean-zero velocity fields on
//! the torus `[0, 2π]²`.
//!
//! A field is stored through its streamfunction coefficients `ψ̂_k`; the
//! velocity is `u(x) = Σ_k i k^⊥ ψ̂_k e^{ik·x}` with `k^⊥ = (−k2, k1)`. The
//! Leray projection is therefore the identity on every stored field.
//!
//! Norms use Parseval with the domain measure `(2π)²`:
//!
//! ```text
//! |u|²_H     = (2π)² Σ |k|² |ψ̂_k|²
//! ‖u‖²_V     = (2π)² Σ |k|⁴ |ψ̂_k|²
//! |Au|²_L²   = (2π)² Σ |k|⁶ |ψ̂_k|²
//! ```

mod transform;

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use transform::{dealiased_grid_size, PhysicalVelocity, SpectralGrid};

/// `(2π)²`, the area of the periodic box.
pub const DOMAIN_MEASURE: f64 = 4.0 * PI * PI;

/// A nonzero integer wavevector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub k1: i32,
    pub k2: i32,
}

impl ModeIndex {
    pub fn new(k1: i32, k2: i32) -> Result<Self> {
        if k1 == 0 && k2 == 0 {
            return Err(Error::invalid("the zero mode is excluded from mean-zero fields"));
        }
        Ok(Self { k1, k2 })
    }

    /// `|k|²`, the Stokes eigenvalue of this mode.
    #[inline]
    pub fn norm_sq(self) -> f64 {
        let (a, b) = (self.k1 as f64, self.k2 as f64);
        a * a + b * b
    }

    #[inline]
    pub fn neg(self) -> Self {
        Self {
            k1: -self.k1,
            k2: -self.k2,
        }
    }

    /// `max(|k1|, |k2|)`, the square-cutoff level this mode first appears at.
    #[inline]
    pub fn level(self) -> usize {
        self.k1.unsigned_abs().max(self.k2.unsigned_abs()) as usize
    }

    /// One representative per `{k, −k}` pair: upper half plane plus the
    /// positive `k1` axis.
    #[inline]
    pub fn is_canonical(self) -> bool {
        self.k2 > 0 || (self.k2 == 0 && self.k1 > 0)
    }

    /// `c·k` for a real vector `c`.
    #[inline]
    pub fn dot(self, c: [f64; 2]) -> f64 {
        c[0] * self.k1 as f64 + c[1] * self.k2 as f64
    }

    fn eigen_order(&self, other: &Self) -> Ordering {
        let a = self.k1 as i64 * self.k1 as i64 + self.k2 as i64 * self.k2 as i64;
        let b = other.k1 as i64 * other.k1 as i64 + other.k2 as i64 * other.k2 as i64;
        a.cmp(&b)
            .then(self.k1.cmp(&other.k1))
            .then(self.k2.cmp(&other.k2))
    }
}

/// Truncated mode set `max(|k1|, |k2|) ≤ n_max` without the zero mode,
/// ordered by `(|k|², k1, k2)`.
#[derive(Debug)]
pub struct GalerkinSpace {
    n_max: usize,
    modes: Vec<ModeIndex>,
    // dense (2n+1)² lookup, usize::MAX marks the zero mode
    lookup: Vec<usize>,
    neg: Vec<usize>,
    canonical: Vec<usize>,
}

impl GalerkinSpace {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Position of `k` in the ordering, if retained.
    pub fn index_of(&self, k: ModeIndex) -> Option<usize> {
        let n = self.n_max as i64;
        let (a, b) = (k.k1 as i64, k.k2 as i64);
        if a.abs() > n || b.abs() > n {
            return None;
        }
        let side = 2 * self.n_max + 1;
        let idx = self.lookup[(a + n) as usize * side + (b + n) as usize];
        (idx != usize::MAX).then_some(idx)
    }

    /// Index of `−k` for the mode stored at `i`.
    #[inline]
    pub fn neg_index(&self, i: usize) -> usize {
        self.neg[i]
    }

    /// Indices of the canonical half of the mode set.
    pub fn canonical_indices(&self) -> &[usize] {
        &self.canonical
    }
}

/// Build the square-cutoff Galerkin space of level `n_max`.
pub fn build_space(n_max: usize) -> Result<Arc<GalerkinSpace>> {
    if n_max == 0 {
        return Err(Error::invalid("n_max must be at least 1"));
    }
    if n_max > 1 << 14 {
        return Err(Error::invalid(format!("n_max = {n_max} is too large")));
    }
    let n = n_max as i32;
    let mut modes: Vec<ModeIndex> = (-n..=n)
        .flat_map(|k1| (-n..=n).map(move |k2| ModeIndex { k1, k2 }))
        .filter(|k| k.k1 != 0 || k.k2 != 0)
        .collect();
    modes.sort_by(ModeIndex::eigen_order);

    let side = 2 * n_max + 1;
    let mut lookup = vec![usize::MAX; side * side];
    for (i, k) in modes.iter().enumerate() {
        lookup[(k.k1 + n) as usize * side + (k.k2 + n) as usize] = i;
    }
    let neg = modes
        .iter()
        .map(|k| {
            let m = k.neg();
            lookup[(m.k1 + n) as usize * side + (m.k2 + n) as usize]
        })
        .collect();
    let canonical = modes
        .iter()
        .enumerate()
        .filter(|(_, k)| k.is_canonical())
        .map(|(i, _)| i)
        .collect();

    Ok(Arc::new(GalerkinSpace {
        n_max,
        modes,
        lookup,
        neg,
        canonical,
    }))
}

/// `(|u|_H, ‖u‖²_V, |Au|²_L²)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormTriple {
    pub h: f64,
    pub v_sq: f64,
    pub da_sq: f64,
}

impl NormTriple {
    /// Graph norm `|u|²_{D(A)} = |u|²_H + |Au|²_L²`.
    pub fn graph_da_sq(&self) -> f64 {
        self.h * self.h + self.da_sq
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite() && self.v_sq.is_finite() && self.da_sq.is_finite()
    }
}

/// A real, divergence-free, mean-zero velocity field in a Galerkin space.
///
/// Coefficients always satisfy `ψ̂_{−k} = conj(ψ̂_k)` exactly: every
/// operation computes the canonical half and mirrors it.
#[derive(Debug, Clone)]
pub struct SpectralVelocity {
    space: Arc<GalerkinSpace>,
    psi: Vec<Complex64>,
}

impl PartialEq for SpectralVelocity {
    fn eq(&self, other: &Self) -> bool {
        self.space.n_max == other.space.n_max && self.psi == other.psi
    }
}

impl SpectralVelocity {
    pub fn zeros(space: &Arc<GalerkinSpace>) -> Self {
        Self {
            space: Arc::clone(space),
            psi: vec![Complex64::new(0.0, 0.0); space.len()],
        }
    }

    /// Wrap raw coefficients given in space ordering. Rejects vectors of the
    /// wrong length or without exact Hermitian symmetry.
    pub fn from_coeffs(space: &Arc<GalerkinSpace>, psi: Vec<Complex64>) -> Result<Self> {
        if psi.len() != space.len() {
            return Err(Error::invalid(format!(
                "expected {} coefficients, got {}",
                space.len(),
                psi.len()
            )));
        }
        let u = Self {
            space: Arc::clone(space),
            psi,
        };
        if let Some(k) = u.hermitian_defect() {
            return Err(Error::NotHermitian { k1: k.k1, k2: k.k2 });
        }
        Ok(u)
    }

    /// Build a field by evaluating `f` on canonical modes and mirroring.
    pub fn from_canonical(
        space: &Arc<GalerkinSpace>,
        mut f: impl FnMut(ModeIndex) -> Complex64,
    ) -> Self {
        let mut u = Self::zeros(space);
        for &i in space.canonical_indices() {
            let v = f(space.modes[i]);
            u.psi[i] = v;
            u.psi[space.neg[i]] = v.conj();
        }
        u
    }

    /// Normalized single eigenmode pair `ψ̂_k = conj(ψ̂_{−k}) = a` with
    /// `|u|_H = 1`.
    pub fn eigenmode(space: &Arc<GalerkinSpace>, k: ModeIndex) -> Result<Self> {
        space
            .index_of(k)
            .ok_or_else(|| Error::invalid(format!("mode ({}, {}) not in space", k.k1, k.k2)))?;
        let target = if k.is_canonical() { k } else { k.neg() };
        let u = Self::from_canonical(space, |q| {
            if q == target {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        normalize_to_sphere(&u)
    }

    pub fn space(&self) -> &Arc<GalerkinSpace> {
        &self.space
    }

    pub fn n_max(&self) -> usize {
        self.space.n_max
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn coeff(&self, k: ModeIndex) -> Option<Complex64> {
        self.space.index_of(k).map(|i| self.psi[i])
    }

    /// First mode (in space ordering) breaking Hermitian symmetry.
    pub fn hermitian_defect(&self) -> Option<ModeIndex> {
        self.psi
            .iter()
            .enumerate()
            .find(|&(i, c)| self.psi[self.space.neg[i]] != c.conj())
            .map(|(i, _)| self.space.modes[i])
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect().is_none()
    }

    pub fn is_finite(&self) -> bool {
        self.psi.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub(crate) fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.space.n_max != other.space.n_max {
            return Err(Error::SpaceMismatch {
                left: self.space.n_max,
                right: other.space.n_max,
            });
        }
        Ok(())
    }

    /// Multiply every coefficient by the real symbol `f(k)`.
    pub fn map_real_symbol(&self, f: impl Fn(ModeIndex) -> f64) -> Self {
        let psi = self
            .space
            .modes
            .iter()
            .zip(&self.psi)
            .map(|(&k, &c)| c * f(k))
            .collect();
        Self {
            space: Arc::clone(&self.space),
            psi,
        }
    }

    /// Multiply by the imaginary symbol `i·f(k)` where `f` is odd in `k`.
    pub fn map_imag_symbol(&self, f: impl Fn(ModeIndex) -> f64) -> Self {
        Self::from_canonical(&self.space, |k| {
            let c = self.psi[self.space.index_of(k).expect("canonical mode")];
            let s = f(k);
            Complex64::new(-s * c.im, s * c.re)
        })
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            space: Arc::clone(&self.space),
            psi: self.psi.iter().map(|&c| c * a).collect(),
        }
    }

    /// `self + a·x`.
    pub fn axpy(&self, a: f64, x: &Self) -> Result<Self> {
        self.check_same_space(x)?;
        Ok(Self {
            space: Arc::clone(&self.space),
            psi: self.psi.iter().zip(&x.psi).map(|(&s, &c)| s + c * a).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.psi
    }

    /// Embed into a finer space by zero padding. `target.n_max` must not be
    /// smaller than the current cutoff.
    pub fn embed(&self, target: &Arc<GalerkinSpace>) -> Result<Self> {
        if target.n_max < self.space.n_max {
            return Err(Error::invalid(format!(
                "cannot embed n_max {} into smaller space {}",
                self.space.n_max, target.n_max
            )));
        }
        let mut out = Self::zeros(target);
        for (k, &c) in self.space.modes.iter().zip(&self.psi) {
            let j = target.index_of(*k).expect("finer space contains coarse modes");
            out.psi[j] = c;
        }
        Ok(out)
    }
}

/// Orthogonal projection `P_n` onto a smaller (or equal) square cutoff.
pub fn project(target: &Arc<GalerkinSpace>, u: &SpectralVelocity) -> Result<SpectralVelocity> {
    if target.n_max > u.space.n_max {
        return Err(Error::invalid(format!(
            "projection target n_max {} exceeds source n_max {}",
            target.n_max, u.space.n_max
        )));
    }
    let psi = target
        .modes
        .iter()
        .map(|&k| u.psi[u.space.index_of(k).expect("source contains target modes")])
        .collect();
    Ok(SpectralVelocity {
        space: Arc::clone(target),
        psi,
    })
}

pub fn norms(u: &SpectralVelocity) -> NormTriple {
    let (mut h, mut v, mut d) = (0.0, 0.0, 0.0);
    for (k, c) in u.space.modes.iter().zip(&u.psi) {
        let l = k.norm_sq();
        let w = l * c.norm_sqr();
        h += w;
        v += l * w;
        d += l * l * w;
    }
    NormTriple {
        h: (DOMAIN_MEASURE * h).sqrt(),
        v_sq: DOMAIN_MEASURE * v,
        da_sq: DOMAIN_MEASURE * d,
    }
}

/// `|u|_H` alone.
pub fn h_norm(u: &SpectralVelocity) -> f64 {
    inner_h_unchecked(u, u).sqrt()
}

/// `⟨u, v⟩_H = (2π)² Σ |k|² Re(ψ̂_k(u) conj(ψ̂_k(v)))`.
pub fn inner_h(u: &SpectralVelocity, v: &SpectralVelocity) -> Result<f64> {
    u.check_same_space(v)?;
    Ok(inner_h_unchecked(u, v))
}

fn inner_h_unchecked(u: &SpectralVelocity, v: &SpectralVelocity) -> f64 {
    let s: f64 = u
        .space
        .modes
        .iter()
        .zip(u.psi.iter().zip(&v.psi))
        .map(|(k, (a, b))| k.norm_sq() * (a.re * b.re + a.im * b.im))
        .sum();
    DOMAIN_MEASURE * s
}

pub fn normalize_to_sphere(u: &SpectralVelocity) -> Result<SpectralVelocity> {
    let h = h_norm(u);
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("cannot normalize field with |u|_H = {h}")));
    }
    Ok(u.scale(1.0 / h))
}

/// Random field with `|ψ̂_k| ∝ |k|^{−decay}` and uniform random phases,
/// normalized to the unit sphere of H. Deterministic in `seed`.
pub fn random_field(seed: u64, space: &Arc<GalerkinSpace>, decay: f64) -> SpectralVelocity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = SpectralVelocity::from_canonical(space, |k| {
        let amp = k.norm_sq().powf(-0.5 * decay) * rng.random_range(0.5..1.5);
        let phase = rng.random_range(0.0..2.0 * PI);
        Complex64::from_polar(amp, phase)
    });
    normalize_to_sphere(&u).expect("random field is nonzero")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k(k1: i32, k2: i32) -> ModeIndex {
        ModeIndex::new(k1, k2).unwrap()
    }

    #[test]
    fn space_sizes() {
        assert_eq!(build_space(1).unwrap().len(), 8);
        assert_eq!(build_space(2).unwrap().len(), 24);
        assert_eq!(build_space(16).unwrap().len(), 1088);
        assert!(build_space(0).is_err());
    }

    #[test]
    fn space_ordering_and_closure() {
        let s = build_space(3).unwrap();
        let m = s.modes();
        assert_eq!(m[0], k(-1, 0));
        assert_eq!(m[3], k(1, 0));
        for w in m.windows(2) {
            assert_eq!(w[0].eigen_order(&w[1]), Ordering::Less);
        }
        for (i, q) in m.iter().enumerate() {
            assert_eq!(m[s.neg_index(i)], q.neg());
            assert_eq!(s.index_of(*q), Some(i));
        }
        assert_eq!(s.index_of(ModeIndex { k1: 0, k2: 0 }), None);
        assert_eq!(s.index_of(k(4, 0)), None);
        assert_eq!(s.canonical_indices().len() * 2, s.len());
    }

    #[test]
    fn eigenmode_norms() {
        let s = build_space(2).unwrap();
        let u = SpectralVelocity::eigenmode(&s, k(1, 0)).unwrap();
        let n = norms(&u);
        assert!((n.h - 1.0).abs() < 1e-15);
        assert!((n.v_sq - 1.0).abs() < 1e-15);
        assert!((n.da_sq - 1.0).abs() < 1e-15);
        assert_eq!(norms(&SpectralVelocity::zeros(&s)), NormTriple::default());
    }

    #[test]
    fn two_mode_parseval_sum() {
        let s = build_space(2).unwrap();
        let (a, b) = (0.3, 0.7);
        let u = SpectralVelocity::from_canonical(&s, |q| {
            if q == k(1, 0) {
                Complex64::new(a, 0.0)
            } else if q == k(1, 1) {
                Complex64::from_polar(b, 1.1)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let expected = DOMAIN_MEASURE * 2.0 * (a * a + 2.0 * b * b);
        let h2 = norms(&u).h.powi(2);
        assert!((h2 - expected).abs() < 1e-13 * expected);
        assert!((inner_h(&u, &u).unwrap() - h2).abs() < 1e-13 * h2);
    }

    #[test]
    fn from_coeffs_rejects_asymmetric() {
        let s = build_space(1).unwrap();
        let mut psi = vec![Complex64::new(0.0, 0.0); s.len()];
        psi[0] = Complex64::new(1.0, 0.5);
        assert!(matches!(
            SpectralVelocity::from_coeffs(&s, psi),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn projection_drops_high_modes() {
        let s2 = build_space(2).unwrap();
        let s1 = build_space(1).unwrap();
        let u = random_field(3, &s2, 3.0);
        let p = project(&s1, &u).unwrap();
        assert_eq!(p.coeff(k(2, 0)), None);
        assert_eq!(p.coeff(k(1, 1)), u.coeff(k(1, 1)));
        assert!(p.is_hermitian());
        // identity on H_n
        assert_eq!(project(&s2, &u).unwrap(), u);
        assert!(project(&s2, &p).is_err());
        // embedding then projecting is the identity on the coarse space
        assert_eq!(project(&s1, &p.embed(&s2).unwrap()).unwrap(), p);
    }

    #[test]
    fn normalization() {
        let s = build_space(2).unwrap();
        let u = random_field(1, &s, 3.0);
        let u2 = u.scale(2.0);
        let back = normalize_to_sphere(&u2).unwrap();
        for (a, b) in back.coeffs().iter().zip(u.coeffs()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(normalize_to_sphere(&SpectralVelocity::zeros(&s)).is_err());
    }

    #[test]
    fn random_field_deterministic_and_unit() {
        let s = build_space(16).unwrap();
        let a = random_field(42, &s, 3.0);
        let b = random_field(42, &s, 3.0);
        assert_eq!(a, b);
        assert!(a.is_hermitian());
        let n = norms(&a);
        assert!((n.h - 1.0).abs() < 1e-12);
        // decay 3: the V-norm sum is finite and dominated by the low modes
        assert!(n.v_sq.is_finite() && n.v_sq > 1.0 && n.v_sq < 20.0, "{n:?}");
        assert_ne!(a, random_field(43, &s, 3.0));
    }

    proptest! {
        #[test]
        fn poincare_chain(seed in any::<u64>(), n in 1usize..6, decay in 0.0f64..4.0) {
            let s = build_space(n).unwrap();
            let u = random_field(seed, &s, decay);
            let t = norms(&u);
            prop_assert!(t.v_sq >= t.h * t.h * (1.0 - 1e-14));
            prop_assert!(t.da_sq >= t.v_sq * (1.0 - 1e-14));
        }

        #[test]
        fn projection_is_orthogonal(seed in any::<u64>(), n in 2usize..6) {
            let s = build_space(n).unwrap();
            let small = build_space(n - 1).unwrap();
            let u = random_field(seed, &s, 2.5);
            let v = random_field(seed ^ 0xabcdef, &small, 1.5).embed(&s).unwrap();
            let p = project(&small, &u).unwrap().embed(&s).unwrap();
            let r = inner_h(&u.sub(&p).unwrap(), &v).unwrap();
            prop_assert!(r.abs() < 1e-14);
            prop_assert!(norms(&p).v_sq <= norms(&u).v_sq);
        }
    }
}

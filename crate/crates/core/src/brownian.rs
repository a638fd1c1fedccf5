//! Brownian increments with exact dyadic refinement.
//!
//! Refinement rule (version 1). Level-0 increments are drawn from a ChaCha8
//! stream seeded with `(seed, level)` in `(step, j)` order and quantized to a
//! multiple of `q(dt) = 2^(⌊log2 √dt⌋ − 40)`. A coarse increment `ΔW` over
//! `dt` is split into `(a, ΔW − a)` with
//! `a = ΔW/2 + √(dt/4)·Z`, `Z ~ N(0,1)` from the stream of the next level,
//! and `a` quantized to `q(dt/2)`. Since both halves are multiples of
//! `q(dt/2)`, the subtraction is exact and every fine pair sums to its coarse
//! parent bit for bit. Quantization perturbs samples by ~1e-12 relative.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REFINEMENT_RULE_VERSION: u32 = 1;

/// Increments `ΔW_j` on a uniform time grid, stored step-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrownianIncrements {
    dt: f64,
    m: usize,
    steps: usize,
    seed: u64,
    level: u32,
    dw: Vec<f64>,
}

fn quantum(dt: f64) -> f64 {
    let e = dt.sqrt().log2().floor() as i32;
    2f64.powi(e - 40)
}

fn quantize(x: f64, q: f64) -> f64 {
    (x / q).round() * q
}

fn level_rng(seed: u64, level: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(level as u64);
    rng
}

/// Draw `steps × m` independent `N(0, dt)` increments.
pub fn sample_increments(seed: u64, steps: usize, dt: f64, m: usize) -> Result<BrownianIncrements> {
    if steps == 0 {
        return Err(Error::invalid("at least one step is required"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let mut rng = level_rng(seed, 0);
    let (s, q) = (dt.sqrt(), quantum(dt));
    let dw = (0..steps * m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            quantize(s * z, q)
        })
        .collect();
    Ok(BrownianIncrements {
        dt,
        m,
        steps,
        seed,
        level: 0,
        dw,
    })
}

impl BrownianIncrements {
    /// Zero increments, for noise-free runs with `m > 0` or for tests.
    pub fn zeros(steps: usize, dt: f64, m: usize) -> Self {
        Self {
            dt,
            m,
            steps,
            seed: 0,
            level: 0,
            dw: vec![0.0; steps * m],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of halvings applied to the level-0 path.
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Increments of step `i` for all `m` directions.
    pub fn step(&self, i: usize) -> &[f64] {
        &self.dw[i * self.m..(i + 1) * self.m]
    }

    /// Conditional (Brownian bridge) refinement to `dt/2`.
    pub fn refine(&self) -> Self {
        let level = self.level + 1;
        let mut rng = level_rng(self.seed, level);
        let fine_dt = 0.5 * self.dt;
        let (s, q) = ((0.25 * self.dt).sqrt(), quantum(fine_dt));
        let mut dw = vec![0.0; 2 * self.dw.len()];
        for i in 0..self.steps {
            for j in 0..self.m {
                let coarse = self.dw[i * self.m + j];
                let z: f64 = StandardNormal.sample(&mut rng);
                let a = quantize(0.5 * coarse + s * z, q);
                dw[2 * i * self.m + j] = a;
                dw[(2 * i + 1) * self.m + j] = coarse - a;
            }
        }
        Self {
            dt: fine_dt,
            m: self.m,
            steps: 2 * self.steps,
            seed: self.seed,
            level,
            dw,
        }
    }

    /// Refine `times` times.
    pub fn refine_to(&self, times: u32) -> Self {
        (0..times).fold(self.clone(), |p, _| p.refine())
    }
}

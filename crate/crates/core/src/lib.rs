//! Spectral Galerkin simulator for the stochastic constrained Navier-Stokes
//! equations on the 2D torus `[0, 2π]²`.
//!
//! The velocity is kept on the unit sphere of `L²` and is driven by
//! Stratonovich transport noise `Σ_j (c_j·∇)u ∘ dW_j` with constant vectors
//! `c_j`. Fields are stored as Fourier streamfunction coefficients, which
//! makes every represented field divergence-free and mean-zero.
//!
//! Module map:
//! - [`spectral`]: Galerkin mode sets, fields, norms, FFT transforms.
//! - [`operators`]: Stokes operator, nonlinearity, transport noise operators.
//! - [`brownian`] and [`integrator`]: Brownian drivers and time stepping.
//! - [`diagnostics`]: constraint drift, enstrophy balance, stability functional.
//! - [`ensemble`]: parallel Monte Carlo moment estimation.
//! - [`io`]: configuration, file formats, run manifests.
//! - [`verify`], [`converge`], [`workflow`]: the commands behind the `scnse`
//!   binary.

pub mod brownian;
pub mod converge;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod integrator;
pub mod io;
pub mod operators;
pub mod spectral;
pub mod verify;
pub mod workflow;

pub use error::{Error, Result};
pub use num_complex::Complex64;

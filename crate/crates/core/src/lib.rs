//! Pseudo-spectral engine for the dilute active-suspension kinetic model.
//!
//! The perturbation `ψ(t, x, p)` of the isotropic state lives on the periodic
//! box `T³ = (R/Z)³` times the orientation sphere `S²`. It is discretized by a
//! truncated Fourier lattice in `x` and orthonormal complex spherical harmonics
//! in `p`. The crate is organized bottom-up:
//!
//! * [`sphere`]: spherical-harmonic transforms, quadrature and surface calculus.
//! * [`state`]: parameters, kinetic state, flow field, norms and checkpoints.
//! * [`operators`]: right-hand-side terms of the kinetic/Stokes system.
//! * [`integrator`]: exponential (integrating-factor) time stepping.
//! * [`hypo`]: hypocoercive energy functionals, vector fields and mixing.
//! * [`volterra`]: mode-by-mode kernels, Volterra solves and threshold scans.
//! * [`exec`]: data-parallel execution with a sequential fallback.

pub mod error;
pub mod exec;
pub mod fit;
pub mod hypo;
pub mod integrator;
pub mod operators;
pub mod sphere;
pub mod state;
pub mod volterra;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Imaginary unit.
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub(crate) const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

//! Spherical-harmonic engine on the unit sphere.
//!
//! Convention: orthonormal complex harmonics with the Condon–Shortley phase,
//!
//! ```text
//! Y_lm(θ, φ) = Θ_lm(θ) e^{imφ},   ∫ Y_lm conj(Y_l'm') dp = δ_ll' δ_mm',
//! Y_l,-m = (-1)^m conj(Y_lm).
//! ```
//!
//! Fields are stored as coefficient vectors ([`SphField`]); grid values live on
//! a Gauss–Legendre × uniform-longitude grid ([`SphGrid`]) that has no node at
//! either pole, so `1/sin θ` factors in the surface gradient are regular.

mod calculus;
mod field;
mod quadrature;
mod transform;

pub use calculus::{
    cartesian_to_tangent, commutator_residual, grad_axis, gradient_cartesian, interpolation_gap,
    rough_laplacian,
    tangent_to_cartesian, CommutatorReport,
};
pub use field::{check_unit_axis, lm_index, SphField};
pub use quadrature::{gauss_legendre, SphGrid};
pub use transform::{SphTransform, TangentField};

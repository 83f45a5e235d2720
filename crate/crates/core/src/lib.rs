//! Abelian integrals, first-order Melnikov functions and limit-cycle
//! analysis for two piecewise-smooth perturbed planar systems: the reduced
//! generic Lotka–Volterra system and the Bogdanov–Takens system, with the
//! switching line y = 0.
//!
//! The crate has three layers:
//! - numeric: level-oval geometry and adaptive quadrature of the Abelian
//!   integrals, plus the direct line-integral Melnikov oracle
//!   ([`systems`], [`quad`]);
//! - exact: the rational recurrence engine reducing any I_{i,j} to the basis
//!   integrals, the Picard–Fuchs tables, and the annihilating-operator
//!   construction ([`reduction`], [`picard_fuchs`]);
//! - dynamic: zero isolation against the theoretical bounds and an
//!   event-driven piecewise integrator whose return map cross-validates the
//!   predicted limit cycles ([`zeros`], [`sim`]).

pub mod error;
pub mod gauss;
pub mod picard_fuchs;
pub mod quad;
pub mod rational;
pub mod reduction;
pub mod sim;
pub mod systems;
pub mod zeros;

pub use error::{Error, Result};
pub use systems::{
    hamiltonian, oval_endpoints, upper_branch, vector_field, CoeffKind, OvalEndpoints,
    Perturbation, PlanarState, Side, SystemId,
};

//! Numerical laboratory for the 2D parabolic-elliptic Keller-Segel model and
//! the 2D Navier-Stokes equations in vorticity form, with measure-valued
//! initial data.
//!
//! The crate computes the self-similar spreading profiles `G_alpha` for every
//! mass below the critical value `8*pi`, discretizes the linear operators that
//! govern relaxation toward them (Fokker-Planck, its chemotactic perturbation,
//! the per-angular-mode restrictions), and evolves mild solutions from
//! atom-plus-density initial measures on doubly-periodic grids with an exact
//! free-space velocity law.  Everything the underlying well-posedness theory
//! makes checkable at desk scale — mass laws, the virial identity, tail
//! exponents, symmetry-forced eigenvalues, spectral gaps, energy dissipation,
//! hypercontractive decay, the critical-mass dichotomy, Lipschitz dependence
//! on the data — is wired into experiments and an acceptance suite.

pub mod energies;
pub mod evolve;
pub mod fields;
pub mod harness;
pub mod linops;
pub mod measures;
pub mod numerics;
pub mod profiles;
pub mod velocity;

pub use fields::{Field2D, GridSpec, RadialField, WeightedNormSpec};

/// Critical mass for the 2D Keller-Segel model.
pub const CRITICAL_MASS: f64 = 8.0 * std::f64::consts::PI;

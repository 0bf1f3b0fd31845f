//! Spectral and threshold analysis of one- and two-particle lattice
//! Schrödinger operators in momentum representation.
//!
//! The crate works with operators `ĥ = ĥ⁰ + v̂` on `ℓ²(Z³)` whose hopping
//! part has finite support, through their momentum-space picture on the
//! torus T³: multiplication by the dispersion relation `ε(p)` plus
//! convolution by the potential kernel `v(p)`.  On top of that picture it
//! provides
//!
//! * dispersion analysis — minima, non-degeneracy, conditional negative
//!   definiteness, positivity of the generated semigroup
//!   ([`lattice_model`]);
//! * singularity-avoiding quadrature and Nyström convolution matrices on
//!   the torus ([`torus_grid`]);
//! * the Birman–Schwinger operator at a spectral parameter, its eigenpairs
//!   near −1, eigenfunction extension to off-grid points, and the
//!   classification of the threshold into eigenvalue/virtual-level cases
//!   ([`birman_schwinger`]);
//! * two-particle fiber Hamiltonians over quasi-momentum, their discrete
//!   spectra, band-edge geometry, gap profiles, and the variational
//!   Γ-witness ([`two_particle`]);
//! * a worked example with a seven-site potential whose threshold exhibits
//!   coexistence of a virtual level and threshold eigenvalues, reproduced
//!   end to end from lattice Green-function constants ([`appendix_b`]).
//!
//! Dense Hermitian eigenproblems are delegated to the system LAPACK
//! ([`linalg`]); everything else is plain Rust.

pub mod error;
pub mod linalg;
pub mod torus_grid;
pub mod lattice_model;
pub mod birman_schwinger;

pub use error::{Error, Result};

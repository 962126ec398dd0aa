//! Numerical pipeline for deciding whether a uniformly accelerated observer
//! can tell a two-mode squeezed field state from a product of thermal states
//! when one of the two wave packets sits mostly behind the Rindler horizon.
//!
//! Units are `c = L = 1` throughout; accelerations, cut-offs and packet
//! frequencies are the dimensionless groups `aL/c²`, `ΛL/c` and `N`.
//!
//! The crate is layered bottom-up:
//!
//! | module | contents |
//! |--------|----------|
//! | [`specfun`] | complex log-gamma, Bose–Einstein occupation, Rindler squeezing |
//! | [`quadrature`] | adaptive Gauss–Kronrod, semi-infinite maps, log-chirp oscillatory integrals |
//! | [`modes`] | packet/plane-wave overlaps and Minkowski→Rindler coefficients |
//! | [`overlap`] | Rindler spectra, normalisations and the five scenario scalars |
//! | [`gaussian`] | covariance matrices, fidelity, error-probability bounds |
//! | [`fock`] | truncated Fock-space oracle for the covariance blocks |
//! | [`sweep`] | acceleration/squeezing sweeps, minimum search, power-law fit |
//! | [`output`] | CSV, JSON-lines and SVG emitters |

pub mod fock;
pub mod gaussian;
pub mod modes;
pub mod output;
pub mod overlap;
pub mod quadrature;
pub mod specfun;
pub mod sweep;

pub use num_complex::Complex64;

/// Complex scalar used across the crate.
pub type ComplexValue = Complex64;

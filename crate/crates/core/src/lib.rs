//! Exact p-divisibility of additive character sums and Newton polygons of
//! Artin-Schreier curves over small finite fields.
//!
//! The crate is organized around five pieces of machinery:
//!
//! - [`ff`]: dense exact arithmetic in F_{p^m} with Frobenius, trace and norm;
//! - [`cyclotomic`]: the ring Z\[ζ_p\] with its π-adic and q-adic valuations;
//! - [`modeq`]: solutions of the modular equation Σ d·u_d ≡ 0 mod p^ℓ − 1,
//!   their supports, minimal weights and p-densities (closed forms, generators
//!   for the minimal irreducible solutions, and brute-force oracles);
//! - [`lfun`]: character sums S_r(f), the L-polynomial of y^p − y = f(x), its
//!   q-adic Newton polygon and the curve polygon, genus, supersingularity;
//! - [`hasse`]: semi-linear (Frobenius-twisted) endomorphisms, their
//!   stable-image decomposition, and the predicted generic first vertex of the
//!   curve polygon together with its Hasse polynomial, per degree range.
//!
//! [`scan`] adds reproducible sweep drivers (CSV output, deterministic
//! ordering, worker pool) used by the CLI and the acceptance suite.

pub mod cyclotomic;
pub mod error;
pub mod ff;
pub mod hasse;
pub mod lfun;
pub mod modeq;
pub mod scan;

pub mod book;

pub use error::{Error, Result};

/// Exact rational used for valuations, densities and polygon ordinates.
pub type Rat = num_rational::Ratio<i64>;

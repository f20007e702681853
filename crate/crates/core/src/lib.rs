//! Discrete spectra of Laplacians perturbed by several distant, localized
//! operators.
//!
//! The crate computes the negative eigenvalues of `-Δ + Σ 𝓛ᵢ(· - Xᵢ)` in
//! one to three dimensions in two independent ways:
//!
//! * directly, by a second-order finite-difference discretization on a
//!   truncated Dirichlet box ([`grid`]);
//! * asymptotically, from the single-well spectra ([`singlewell`]) combined
//!   through the cross-well coupling matrix and the resolvent-mediated
//!   second-order shift ([`asympt`]).
//!
//! The free resolvent kernel used by all separation-dependent estimates lives
//! in [`greens`]; the catalog of localized operators and the runtime checks
//! of their symmetry and form bounds live in [`perturb`]; [`rates`] fits the
//! decay laws of deviations as the wells move apart.
//!
//! The crate is `no_std` and only needs an allocator. File formats, sweeps and
//! the command line live in the `multiwell` companion crate.

#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` rejects NaN along with the rest
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod asympt;
pub mod error;
pub mod expr;
pub mod greens;
pub mod grid;
pub mod linalg;
pub(crate) mod math;
pub mod perturb;
pub mod rates;
pub mod singlewell;

pub use error::{Error, Result};
pub use greens::SpectralPoint;
pub use grid::{DiscreteOperator, EigenPair, Grid, Point};
pub use perturb::{Perturbation, PerturbationKind};

//! Structured sparse PCA with joint ℓ1 and ℓ2,1 penalties under an
//! orthogonality constraint.
//!
//! The crate provides the numerical pieces of the method and nothing that
//! touches the file system:
//!
//! * [`linalg`]: a dense row-major [`Matrix`], norms, a deterministic thin SVD
//!   and the objective.
//! * [`prox`]: soft-thresholding, row-group soft-thresholding and projection
//!   onto the Stiefel manifold.
//! * [`admm`]: the fixed-parameter linearized ADMM solver.
//! * [`unfolding`]: the same iteration unrolled into `K` stages with learnable
//!   per-stage parameters, its loss, and an SPSA trainer.
//! * [`ufs`]: feature scoring, k-means, ACC/NMI and the evaluation protocol.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. All transcendental functions go through `libm` so results are
//! bit-identical regardless of that feature.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod admm;
mod error;
mod float;
pub mod linalg;
pub mod prox;
pub mod ufs;
pub mod unfolding;

pub use error::{Error, Result};
pub use linalg::{Matrix, ThinSvd};

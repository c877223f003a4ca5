//! Minimal deterministic numerics core.
//!
//! Dense row-major matrices, activations, losses, Adam, seeded sampling, and
//! the finite-difference oracle used to verify every analytic gradient. All
//! kernels are generic over [`Scalar`]; the crate root exposes `f64` aliases.
//! Everything here is pure given an explicit [`SplitMix64`] — there is no
//! hidden global randomness.

mod activation;
mod adam;
mod gradcheck;
mod loss;
mod matrix;
mod rng;
mod scalar;

pub use activation::{sigmoid, Activation};
pub use adam::AdamState;
pub use gradcheck::{finite_diff_grad, finite_diff_scalar_field, grad_rel_error};
pub use loss::{bce_loss, BCE_CLAMP};
pub use matrix::DenseMatrix;
pub use rng::SplitMix64;
pub use scalar::Scalar;

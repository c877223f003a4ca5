//! Training, attacking, and explaining tabular fraud classifiers.
//!
//! The crate is organised as a pipeline: [`data`] ingests and encodes claim
//! records, [`models`] trains five classifier families on the encoded matrix,
//! [`attacks`] perturbs encoded rows against a trained model, [`ganrl`]
//! learns a generator that synthesises adversarial records from noise, and
//! [`attribution`] explains individual scores. Everything below sits on
//! [`numkit`], a small deterministic numerics layer with no global state.
//!
//! All numeric code is generic over [`numkit::Scalar`] so the same routines
//! run at f32 or f64. The concrete aliases [`Real`] and [`Matrix`] fix f64
//! as the precision used by the shipped tooling.

pub mod attacks;
pub mod attribution;
pub mod data;
pub mod error;
pub mod ganrl;
pub mod metrics;
pub mod models;
pub mod numkit;
pub mod parallel;

pub use error::{Error, Result};

/// Scalar precision used by the command-line tooling and report formats.
pub type Real = f64;

/// Dense row-major matrix at the shipped precision.
pub type Matrix = numkit::DenseMatrix<Real>;

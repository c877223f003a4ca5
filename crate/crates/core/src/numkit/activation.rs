use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Elementwise activation kinds used across the detector and the generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Sigmoid,
    Tanh,
    /// Negative-side slope must lie in (0, 1).
    LeakyRelu {
        slope: f64,
    },
}

pub fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

impl Activation {
    pub fn validate(self) -> Result<()> {
        if let Activation::LeakyRelu { slope } = self {
            if !(0.0 < slope && slope < 1.0) {
                return Err(Error::Config(format!(
                    "leaky_relu slope must lie in (0, 1), got {slope}"
                )));
            }
        }
        Ok(())
    }

    pub fn apply_scalar<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::LeakyRelu { slope } => {
                if x >= S::zero() {
                    x
                } else {
                    S::from_f64_lossy(slope) * x
                }
            }
        }
    }

    /// Derivative as a function of the pre-activation input.
    pub fn derivative_scalar<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (S::one() - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                S::one() - t * t
            }
            Activation::LeakyRelu { slope } => {
                if x >= S::zero() {
                    S::one()
                } else {
                    S::from_f64_lossy(slope)
                }
            }
        }
    }

    pub fn apply<S: Scalar>(self, x: &DenseMatrix<S>) -> Result<DenseMatrix<S>> {
        self.validate()?;
        x.ensure_finite("activation input")?;
        Ok(x.map(|v| self.apply_scalar(v)))
    }
}

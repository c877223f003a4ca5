//! Evasion attacks against trained detectors.
//!
//! Gradient attacks (signed single step, iterated signed steps, projected
//! descent with optional random start) require a differentiable model and
//! propagate [`Error::NotDifferentiable`] otherwise. The random-noise
//! attack needs score access only and works against every family.
//!
//! Every attack obeys the same budget contract: each adversarial row stays
//! inside the infinity-norm ball of radius `epsilon` around its clean row
//! and inside the unit feature cube.

mod gradient;
mod noise;
mod sweep;

pub use gradient::{bim, fgsm, pgd};
pub use noise::{random_noise_attack, NoiseAcceptance};
pub use sweep::{sweep, sweep_csv, AttackKind, SweepFailure, SweepPoint, SweepResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{labels_from_scores, Classifier};
use crate::numkit::{DenseMatrix, Scalar};

/// Shared knobs for all attacks.
///
/// `epsilon` is an infinity-norm budget in normalized feature units, so it
/// must lie in [0, 1]. `steps` and `step_size` drive the iterative
/// gradient attacks; `max_iters` bounds the noise attack's candidate
/// draws; `random_start` only affects projected descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub steps: usize,
    /// Per-iteration step length; `None` resolves to `epsilon / 4`.
    pub step_size: Option<f64>,
    pub random_start: bool,
    pub max_iters: usize,
    pub acceptance: NoiseAcceptance,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 0.25,
            steps: 10,
            step_size: None,
            random_start: false,
            max_iters: 100,
            acceptance: NoiseAcceptance::PerSample,
            seed: 0,
        }
    }
}

impl AttackConfig {
    /// Step length actually used by the iterative attacks.
    pub fn resolved_step_size(&self) -> f64 {
        self.step_size.unwrap_or(self.epsilon / 4.0)
    }

    pub(crate) fn validate_common(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && (0.0..=1.0).contains(&self.epsilon)) {
            return Err(Error::Config(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub(crate) fn validate_iterative(&self) -> Result<()> {
        self.validate_common()?;
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".to_owned()));
        }
        if let Some(s) = self.step_size {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!(
                    "step_size must be positive, got {s}"
                )));
            }
        }
        let reach = self.steps as f64 * self.resolved_step_size();
        if reach < self.epsilon {
            return Err(Error::Config(format!(
                "budget {} is unreachable: {} steps of size {} cover only {}",
                self.epsilon,
                self.steps,
                self.resolved_step_size(),
                reach
            )));
        }
        Ok(())
    }

    pub(crate) fn validate_noise(&self) -> Result<()> {
        self.validate_common()?;
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".to_owned()));
        }
        Ok(())
    }
}

/// Result of one attack on one batch.
///
/// `per_sample_flipped` marks rows whose hard label changed relative to
/// the model's own clean prediction; both accuracies are measured against
/// the true labels.
#[derive(Debug, Clone)]
pub struct AttackOutcome<S: Scalar> {
    pub attack_name: &'static str,
    pub epsilon: f64,
    pub adversarial: DenseMatrix<S>,
    pub per_sample_flipped: Vec<bool>,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
}

impl<S: Scalar> AttackOutcome<S> {
    /// Fraction of rows whose prediction the attack changed.
    pub fn flip_rate(&self) -> f64 {
        if self.per_sample_flipped.is_empty() {
            return 0.0;
        }
        self.per_sample_flipped.iter().filter(|&&f| f).count() as f64
            / self.per_sample_flipped.len() as f64
    }
}

/// Clamps into the closed interval, preserving in-range values bit-exactly.
pub(crate) fn clamp_interval<S: Scalar>(v: S, lo: S, hi: S) -> S {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

/// Clamps into the unit feature domain.
pub(crate) fn clamp_unit<S: Scalar>(v: S) -> S {
    clamp_interval(v, S::zero(), S::one())
}

/// Signed direction with sign(0) = 0, so a flat coordinate is untouched.
pub(crate) fn step_sign<S: Scalar>(g: S) -> S {
    if g > S::zero() {
        S::one()
    } else if g < S::zero() {
        -S::one()
    } else {
        S::zero()
    }
}

pub(crate) fn check_attack_inputs<S: Scalar>(
    model: &dyn Classifier<S>,
    x: &DenseMatrix<S>,
    y: &[u8],
) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::shape(
            "attack batch",
            format!("{} rows", x.rows()),
            format!("{} labels", y.len()),
        ));
    }
    if x.cols() != model.n_features() {
        return Err(Error::shape(
            "attack batch",
            format!("{} features", model.n_features()),
            format!("{} columns", x.cols()),
        ));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::Config(format!("labels must be 0 or 1, got {bad}")));
    }
    Ok(())
}

pub(crate) fn label_accuracy(predictions: &[u8], truth: &[u8]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count() as f64
        / truth.len() as f64
}

/// Scores clean and adversarial batches and packages the outcome.
///
/// Debug builds re-check the budget invariant here; release builds rely on
/// the per-step projection.
pub(crate) fn assemble_outcome<S: Scalar>(
    model: &dyn Classifier<S>,
    attack_name: &'static str,
    clean: &DenseMatrix<S>,
    y: &[u8],
    adversarial: DenseMatrix<S>,
    epsilon: f64,
) -> Result<AttackOutcome<S>> {
    debug_assert!(
        clean
            .data()
            .iter()
            .zip(adversarial.data())
            .all(|(&c, &a)| (a - c).abs().to_f64_lossy() <= epsilon + 1e-9
                && a >= S::zero()
                && a <= S::one()),
        "projection must keep {attack_name} inside the budget"
    );
    let before = labels_from_scores(&model.predict_proba(clean)?);
    let after = labels_from_scores(&model.predict_proba(&adversarial)?);
    let per_sample_flipped = before.iter().zip(&after).map(|(b, a)| b != a).collect();
    Ok(AttackOutcome {
        attack_name,
        epsilon,
        adversarial,
        per_sample_flipped,
        accuracy_before: label_accuracy(&before, y),
        accuracy_after: label_accuracy(&after, y),
    })
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::numkit::sigmoid;

    /// Logistic scorer with a hand-checkable input gradient; the mean BCE
    /// gradient for a row is (p - y) * w.
    pub struct LogisticToy {
        pub w: Vec<f64>,
        pub b: f64,
    }

    impl Classifier<f64> for LogisticToy {
        fn family(&self) -> &'static str {
            "logistic_toy"
        }

        fn n_features(&self) -> usize {
            self.w.len()
        }

        fn predict_proba(&self, x: &DenseMatrix<f64>) -> Result<Vec<f64>> {
            Ok((0..x.rows())
                .map(|r| {
                    let z: f64 = x.row(r).iter().zip(&self.w).map(|(v, w)| v * w).sum();
                    sigmoid(z + self.b)
                })
                .collect())
        }

        fn input_gradient(&self, x: &DenseMatrix<f64>, y: &[u8]) -> Result<DenseMatrix<f64>> {
            let probs = self.predict_proba(x)?;
            let scale = 1.0 / x.rows() as f64;
            let mut grad = DenseMatrix::zeros(x.rows(), x.cols());
            for r in 0..x.rows() {
                let residual = (probs[r] - f64::from(y[r])) * scale;
                for (g, &w) in grad.row_mut(r).iter_mut().zip(&self.w) {
                    *g = residual * w;
                }
            }
            Ok(grad)
        }
    }
}

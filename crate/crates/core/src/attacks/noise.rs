//! Iterative random-noise attack.
//!
//! Works against every model family because it only reads scores. Each
//! candidate adds Gaussian noise scaled by the budget, projects the
//! perturbation into the epsilon ball, and clamps to the unit cube, so the
//! shared budget invariant holds no matter how large a noise draw is.
//!
//! Noise for sample `i` always comes from substream `i` of the configured
//! seed and is consumed in iteration order, so results are independent of
//! the worker-thread count and of which other samples share the batch.

use serde::{Deserialize, Serialize};

use crate::attacks::{
    assemble_outcome, check_attack_inputs, clamp_interval, clamp_unit, label_accuracy,
    AttackConfig, AttackOutcome,
};
use crate::error::Result;
use crate::models::{labels_from_scores, Classifier, LABEL_THRESHOLD};
use crate::numkit::{DenseMatrix, Scalar, SplitMix64};
use crate::parallel;

/// When a noise candidate replaces the current adversarial sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseAcceptance {
    /// A candidate row is kept when it flips that row's own prediction;
    /// accepted rows are frozen, so the flip count never decreases.
    PerSample,
    /// The whole candidate batch replaces the current one when its
    /// accuracy against the true labels drops below the incumbent's.
    BatchAll,
}

pub fn random_noise_attack<S: Scalar>(
    model: &dyn Classifier<S>,
    x: &DenseMatrix<S>,
    y: &[u8],
    cfg: &AttackConfig,
) -> Result<AttackOutcome<S>> {
    cfg.validate_noise()?;
    check_attack_inputs(model, x, y)?;
    let adversarial = match cfg.acceptance {
        NoiseAcceptance::PerSample => per_sample_search(model, x, cfg)?,
        NoiseAcceptance::BatchAll => batch_search(model, x, y, cfg)?,
    };
    assemble_outcome(model, "random_noise", x, y, adversarial, cfg.epsilon)
}

/// Draws the next candidate row into `buf`.
fn candidate_row<S: Scalar>(clean: &[S], epsilon: f64, rng: &mut SplitMix64, buf: &mut [S]) {
    let eps = S::from_f64_lossy(epsilon);
    for (slot, &c) in buf.iter_mut().zip(clean) {
        let noise = S::from_f64_lossy(rng.next_normal() * epsilon);
        *slot = clamp_unit(clamp_interval(c + noise, c - eps, c + eps));
    }
}

fn per_sample_search<S: Scalar>(
    model: &dyn Classifier<S>,
    x: &DenseMatrix<S>,
    cfg: &AttackConfig,
) -> Result<DenseMatrix<S>> {
    let clean_labels = labels_from_scores(&model.predict_proba(x)?);
    let threshold = S::from_f64_lossy(LABEL_THRESHOLD);
    let cols = x.cols();

    let rows: Vec<Result<Vec<S>>> = parallel::map_indexed(x.rows(), |i| {
        let clean = x.row(i);
        let mut rng = SplitMix64::substream(cfg.seed, i as u64);
        let mut buf = clean.to_vec();
        for _ in 0..cfg.max_iters {
            candidate_row(clean, cfg.epsilon, &mut rng, &mut buf);
            let probe = DenseMatrix::from_rows(&[buf.clone()])?;
            let score = model.predict_proba(&probe)?[0];
            if u8::from(score > threshold) != clean_labels[i] {
                return Ok(buf);
            }
        }
        Ok(clean.to_vec())
    });

    let mut flat = Vec::with_capacity(x.rows() * cols);
    for row in rows {
        flat.extend(row?);
    }
    DenseMatrix::from_vec(x.rows(), cols, flat)
}

fn batch_search<S: Scalar>(
    model: &dyn Classifier<S>,
    x: &DenseMatrix<S>,
    y: &[u8],
    cfg: &AttackConfig,
) -> Result<DenseMatrix<S>> {
    let mut streams: Vec<SplitMix64> = (0..x.rows())
        .map(|i| SplitMix64::substream(cfg.seed, i as u64))
        .collect();
    let mut incumbent = x.clone();
    let mut incumbent_accuracy = {
        let labels = labels_from_scores(&model.predict_proba(x)?);
        label_accuracy(&labels, y)
    };

    let mut candidate = x.clone();
    for _ in 0..cfg.max_iters {
        for (i, rng) in streams.iter_mut().enumerate() {
            let mut buf = vec![S::zero(); x.cols()];
            candidate_row(x.row(i), cfg.epsilon, rng, &mut buf);
            candidate.row_mut(i).copy_from_slice(&buf);
        }
        let labels = labels_from_scores(&model.predict_proba(&candidate)?);
        let accuracy = label_accuracy(&labels, y);
        if accuracy < incumbent_accuracy {
            incumbent = candidate.clone();
            incumbent_accuracy = accuracy;
        }
    }
    Ok(incumbent)
}

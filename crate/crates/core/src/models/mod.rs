//! The five detector families behind one classifier contract.
//!
//! Every family scores a batch of encoded rows with a fraud probability.
//! Hard labels always come from the shared [`predict_labels`] rule, so the
//! threshold and its tie handling cannot drift between families. Only the
//! recurrent network exposes input gradients; the other families answer
//! gradient requests with a `NotDifferentiable` error that attack drivers
//! are expected to surface rather than work around.

mod birecurrent;
mod knn;
mod margin;
mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{DenseMatrix, Scalar};
use crate::Real;

pub use birecurrent::{train_birecurrent, BiRecurrent, RecurrentConfig};
pub use knn::{train_knn, KnnConfig, KnnModel};
pub use margin::{train_margin, MarginConfig, MarginModel};
pub use tree::{train_gbt, GbtConfig, Growth, Tree, TreeEnsemble, TreeNode};

/// Decision threshold shared by every family. A score exactly on the
/// threshold maps to label 0.
pub const LABEL_THRESHOLD: f64 = 0.5;

/// A trained fraud detector.
///
/// `predict_proba` must be pure, deterministic, and per-row independent:
/// scoring a row must not depend on which other rows share the batch.
pub trait Classifier<S: Scalar = Real>: Send + Sync {
    /// Stable family name used in reports and error messages.
    fn family(&self) -> &'static str;

    fn n_features(&self) -> usize;

    /// Fraud probabilities in [0,1], one per input row.
    fn predict_proba(&self, x: &DenseMatrix<S>) -> Result<Vec<S>>;

    /// Gradient of the mean BCE loss over the batch with respect to the
    /// inputs, for families where that derivative exists.
    fn input_gradient(&self, _x: &DenseMatrix<S>, _y: &[u8]) -> Result<DenseMatrix<S>> {
        Err(Error::NotDifferentiable {
            family: self.family(),
        })
    }
}

/// Shared width check for every `predict_proba` implementation.
pub(crate) fn check_width<S: Scalar>(
    family: &str,
    expected: usize,
    x: &DenseMatrix<S>,
) -> Result<()> {
    if x.cols() != expected {
        return Err(Error::shape(
            format!("{family} input"),
            format!("{} features", expected),
            format!("{}x{} batch", x.rows(), x.cols()),
        ));
    }
    Ok(())
}

/// Thresholds scores into hard labels: 1 iff score > [`LABEL_THRESHOLD`].
pub fn labels_from_scores<S: Scalar>(scores: &[S]) -> Vec<u8> {
    let threshold = S::from_f64_lossy(LABEL_THRESHOLD);
    scores.iter().map(|&p| u8::from(p > threshold)).collect()
}

/// Scores a batch and thresholds it with the shared rule.
pub fn predict_labels<S: Scalar>(
    model: &dyn Classifier<S>,
    x: &DenseMatrix<S>,
) -> Result<Vec<u8>> {
    Ok(labels_from_scores(&model.predict_proba(x)?))
}

/// Identifiers of the five shipped model variants.
pub const MODEL_IDS: [&str; 5] = [
    "bi_recurrent",
    "boosted_level_wise",
    "boosted_leaf_wise",
    "knn",
    "margin",
];

/// Trained parameters of any family, tagged for self-describing storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelPayload {
    BiRecurrent(BiRecurrent<Real>),
    Boosted(TreeEnsemble<Real>),
    Knn(KnnModel<Real>),
    Margin(MarginModel<Real>),
}

impl ModelPayload {
    pub fn classifier(&self) -> &dyn Classifier<Real> {
        match self {
            ModelPayload::BiRecurrent(m) => m,
            ModelPayload::Boosted(m) => m,
            ModelPayload::Knn(m) => m,
            ModelPayload::Margin(m) => m,
        }
    }
}

/// On-disk form of one trained model, bound to the exact dataset snapshot
/// it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub model_id: String,
    pub dataset_hash: String,
    pub seed: u64,
    pub payload: ModelPayload,
}

pub fn save_model(path: impl AsRef<Path>, document: &ModelDocument) -> Result<()> {
    crate::metrics::write_json(path, document)
}

/// Loads a model and verifies it was trained on the snapshot identified by
/// `expected_hash`. A mismatch is an error unless `allow_mismatch`, in
/// which case it is returned as a warning string instead.
pub fn load_model(
    path: impl AsRef<Path>,
    expected_hash: &str,
    allow_mismatch: bool,
) -> Result<(ModelDocument, Vec<String>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let document: ModelDocument = serde_json::from_slice(&bytes)?;
    let mut warnings = Vec::new();
    if document.dataset_hash != expected_hash {
        if !allow_mismatch {
            return Err(Error::HashMismatch {
                expected: document.dataset_hash,
                found: expected_hash.to_owned(),
            });
        }
        warnings.push(format!(
            "model {} was trained on snapshot {} but is being used with {}",
            document.model_id, document.dataset_hash, expected_hash
        ));
    }
    Ok((document, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(f64);

    impl Classifier for Constant {
        fn family(&self) -> &'static str {
            "constant"
        }
        fn n_features(&self) -> usize {
            1
        }
        fn predict_proba(&self, x: &DenseMatrix<f64>) -> Result<Vec<f64>> {
            Ok(vec![self.0; x.rows()])
        }
    }

    #[test]
    fn threshold_is_strict_so_ties_stay_legitimate() {
        assert_eq!(labels_from_scores(&[0.2, 0.5, 0.51, 0.9]), vec![0, 0, 1, 1]);
    }

    #[test]
    fn default_input_gradient_names_the_family() {
        let model = Constant(0.5);
        let x = DenseMatrix::zeros(1, 1);
        let err = model.input_gradient(&x, &[0]).unwrap_err();
        assert!(err.to_string().contains("constant"), "got: {err}");
    }
}

//! Confusion accounting and attack-outcome rates.
//!
//! Every rate is computed as an exact integer ratio first and only turned
//! into a float at the report boundary, so identities such as
//! accuracy + error_rate = 1 hold exactly rather than to rounding error.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact count ratio with a positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Result<Self> {
        if denominator == 0 {
            return Err(Error::UndefinedMetric(
                "ratio with zero denominator".to_owned(),
            ));
        }
        Ok(Ratio {
            numerator,
            denominator,
        })
    }

    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// 1 − self, exactly. Callers only form complements of rates, where
    /// the numerator can never exceed the denominator.
    pub fn complement(&self) -> Ratio {
        Ratio {
            numerator: self.denominator - self.numerator,
            denominator: self.denominator,
        }
    }

    /// Exact equality by cross-multiplication, immune to overflow via
    /// 128-bit products and to rounding because no division happens.
    pub fn eq_exact(&self, other: &Ratio) -> bool {
        (self.numerator as u128) * (other.denominator as u128)
            == (other.numerator as u128) * (self.denominator as u128)
    }

    /// Exact `self <= other` by cross-multiplication.
    pub fn le_exact(&self, other: &Ratio) -> bool {
        (self.numerator as u128) * (other.denominator as u128)
            <= (other.numerator as u128) * (self.denominator as u128)
    }
}

/// Binary confusion counts with fraud as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positive: u64,
    pub false_positive: u64,
    pub true_negative: u64,
    pub false_negative: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }
}

/// Tallies predictions against labels. Both slices must be equal-length
/// vectors over {0,1}.
pub fn confusion(labels: &[u8], preds: &[u8]) -> Result<ConfusionCounts> {
    if labels.len() != preds.len() {
        return Err(Error::shape(
            "confusion",
            format!("{} labels", labels.len()),
            format!("{} predictions", preds.len()),
        ));
    }
    let mut counts = ConfusionCounts::default();
    for (i, (&y, &p)) in labels.iter().zip(preds).enumerate() {
        match (y, p) {
            (1, 1) => counts.true_positive += 1,
            (0, 1) => counts.false_positive += 1,
            (0, 0) => counts.true_negative += 1,
            (1, 0) => counts.false_negative += 1,
            _ => {
                return Err(Error::Config(format!(
                    "non-binary value at index {i}: label {y}, prediction {p}"
                )))
            }
        }
    }
    Ok(counts)
}

/// (TP + TN) / (TP + FP + TN + FN).
pub fn accuracy(counts: &ConfusionCounts) -> Result<Ratio> {
    if counts.total() == 0 {
        return Err(Error::UndefinedMetric(
            "accuracy of zero evaluated samples".to_owned(),
        ));
    }
    Ratio::new(counts.true_positive + counts.true_negative, counts.total())
}

/// Misclassification rate; the exact complement of [`accuracy`].
pub fn error_rate(counts: &ConfusionCounts) -> Result<Ratio> {
    Ok(accuracy(counts)?.complement())
}

/// 2TP / (2TP + FP + FN). Undefined when no sample is positive in either
/// labels or predictions; that case is an error so reports can show "n/a"
/// instead of a misleading 0.
pub fn f1(counts: &ConfusionCounts) -> Result<Ratio> {
    let denominator =
        2 * counts.true_positive + counts.false_positive + counts.false_negative;
    if denominator == 0 {
        return Err(Error::UndefinedMetric(
            "f1 with no positive labels or predictions".to_owned(),
        ));
    }
    Ratio::new(2 * counts.true_positive, denominator)
}

/// Outcome of scoring one generated batch against a target model:
/// `hits` of `total` samples were classified as the attacker intended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchOutcome {
    pub hits: u64,
    pub total: u64,
}

/// The two readings of attack success over a run of batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsrMode {
    /// Fraction of all generated samples classified as intended. The
    /// default: it is the reading under which success and detector
    /// accuracy are exact complements.
    SampleRate,
    /// Fraction of batches in which every sample was classified as
    /// intended. With a uniform batch size this never exceeds the
    /// sample rate; ragged batch sizes void that ordering.
    BatchAll,
}

/// Attack success rate over at least one non-empty batch.
pub fn asr(batches: &[BatchOutcome], mode: AsrMode) -> Result<Ratio> {
    if batches.is_empty() {
        return Err(Error::UndefinedMetric("asr of zero batches".to_owned()));
    }
    for (i, batch) in batches.iter().enumerate() {
        if batch.total == 0 {
            return Err(Error::UndefinedMetric(format!("asr with empty batch {i}")));
        }
        if batch.hits > batch.total {
            return Err(Error::Config(format!(
                "batch {i} reports {} hits out of {} samples",
                batch.hits, batch.total
            )));
        }
    }
    match mode {
        AsrMode::SampleRate => Ratio::new(
            batches.iter().map(|b| b.hits).sum(),
            batches.iter().map(|b| b.total).sum(),
        ),
        AsrMode::BatchAll => Ratio::new(
            batches.iter().filter(|b| b.hits == b.total).count() as u64,
            batches.len() as u64,
        ),
    }
}

/// One attack evaluation row of a model report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub attack: String,
    pub epsilon: f64,
    pub accuracy_after: f64,
    pub attack_success_rate: f64,
    pub seed: u64,
}

/// Per-model evaluation summary. Serialization is field-ordered, so equal
/// inputs produce byte-identical files; anything wall-clock lives in the
/// run log beside the report, never inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_id: String,
    pub dataset_hash: String,
    pub seeds: Vec<u64>,
    pub accuracy: f64,
    pub f1: Option<f64>,
    pub confusion: ConfusionCounts,
    pub attacks: Vec<AttackRow>,
}

/// Writes any report as deterministic pretty JSON.
pub fn write_json(path: impl AsRef<Path>, report: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    std::fs::write(path, &bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

/// One line of the cross-model comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub accuracy: f64,
    pub f1: Option<f64>,
}

/// Renders the model comparison as CSV, spelling undefined F1 as "n/a".
pub fn model_table_csv(rows: &[ModelRow]) -> String {
    let mut out = String::from("model,accuracy,f1\n");
    for row in rows {
        let f1 = match row.f1 {
            Some(v) => format!("{v}"),
            None => "n/a".to_owned(),
        };
        out.push_str(&format!("{},{},{}\n", row.model, row.accuracy, f1));
    }
    out
}

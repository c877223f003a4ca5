//! Epsilon-sweep orchestration and its CSV export.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::attacks::{
    bim, fgsm, label_accuracy, pgd, random_noise_attack, AttackConfig, AttackOutcome,
};
use crate::error::{Error, Result};
use crate::models::{labels_from_scores, Classifier};
use crate::numkit::{DenseMatrix, Scalar};

/// Attack selector used by sweeps and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Fgsm,
    Bim,
    Pgd,
    RandomNoise,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [
        AttackKind::Fgsm,
        AttackKind::Bim,
        AttackKind::Pgd,
        AttackKind::RandomNoise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Fgsm => "fgsm",
            AttackKind::Bim => "bim",
            AttackKind::Pgd => "pgd",
            AttackKind::RandomNoise => "random_noise",
        }
    }

    /// True for the attacks that need input gradients.
    pub fn needs_gradient(self) -> bool {
        !matches!(self, AttackKind::RandomNoise)
    }

    pub fn run<S: Scalar>(
        self,
        model: &dyn Classifier<S>,
        x: &DenseMatrix<S>,
        y: &[u8],
        cfg: &AttackConfig,
    ) -> Result<AttackOutcome<S>> {
        match self {
            AttackKind::Fgsm => fgsm(model, x, y, cfg),
            AttackKind::Bim => bim(model, x, y, cfg),
            AttackKind::Pgd => pgd(model, x, y, cfg),
            AttackKind::RandomNoise => random_noise_attack(model, x, y, cfg),
        }
    }
}

/// One successful grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub accuracy_after: f64,
    pub flip_rate: f64,
}

/// One grid point that failed; the sweep keeps going past it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub epsilon: f64,
    pub message: String,
}

/// Accuracy-versus-epsilon series for one attack on one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub attack: AttackKind,
    pub seed: u64,
    pub clean_accuracy: f64,
    pub points: Vec<SweepPoint>,
    pub failures: Vec<SweepFailure>,
}

/// Runs `attack` once per grid epsilon with a shared seed.
///
/// The grid must be non-empty and strictly ascending. A failing point is
/// recorded and skipped; every other point still runs.
pub fn sweep<S: Scalar>(
    model: &dyn Classifier<S>,
    x: &DenseMatrix<S>,
    y: &[u8],
    attack: AttackKind,
    grid: &[f64],
    cfg: &AttackConfig,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Config("epsilon grid is empty".to_owned()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "epsilon grid must be strictly ascending, got {grid:?}"
        )));
    }

    let clean_labels = labels_from_scores(&model.predict_proba(x)?);
    let mut result = SweepResult {
        attack,
        seed: cfg.seed,
        clean_accuracy: label_accuracy(&clean_labels, y),
        points: Vec::with_capacity(grid.len()),
        failures: Vec::new(),
    };
    for &epsilon in grid {
        let point_cfg = AttackConfig {
            epsilon,
            ..cfg.clone()
        };
        match attack.run(model, x, y, &point_cfg) {
            Ok(outcome) => result.points.push(SweepPoint {
                epsilon,
                accuracy_after: outcome.accuracy_after,
                flip_rate: outcome.flip_rate(),
            }),
            Err(err) => result.failures.push(SweepFailure {
                epsilon,
                message: err.to_string(),
            }),
        }
    }
    Ok(result)
}

/// Renders sweep series as `attack,epsilon,accuracy,flip_rate,seed` rows.
pub fn sweep_csv(results: &[SweepResult]) -> String {
    let mut out = String::from("attack,epsilon,accuracy,flip_rate,seed\n");
    for series in results {
        for point in &series.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                series.attack.name(),
                point.epsilon,
                point.accuracy_after,
                point.flip_rate,
                series.seed
            );
        }
    }
    out
}

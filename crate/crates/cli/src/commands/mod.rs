//! Command implementations behind the `advclaim` subcommands.
//!
//! Every command follows the same contract: read inputs through
//! [`Context`], write artifacts only under the run directory, finish with a
//! manifest listing what was written, and report per-item failures without
//! aborting the rest of the run. A command returns `Ok(outcome)` even when
//! some items failed; only errors that invalidate the whole run (missing
//! snapshot, unreadable config) surface as `Err`.

mod attack;
mod eval;
mod explain;
mod gan_attack;
mod prepare;
mod train;

pub use attack::cmd_attack;
pub use eval::cmd_eval;
pub use explain::cmd_explain;
pub use gan_attack::cmd_gan_attack;
pub use prepare::cmd_prepare;
pub use train::cmd_train;

use std::path::Path;

use advclaim_core::data::{load_snapshot, Dataset, Snapshot};
use advclaim_core::error::{Error, Result};
use advclaim_core::metrics::{accuracy, confusion, f1, write_json, MetricsReport};
use advclaim_core::models::{load_model, predict_labels, Classifier, ModelDocument};
use advclaim_core::Real;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::layout::Layout;

/// Stage index for the feature-attribution RNG stream.
///
/// Trainers and the data pipeline substream their seeds internally at small
/// indices, so handing two stages the same raw seed would replay identical
/// draws. Each consumer of randomness that does not receive the global seed
/// verbatim gets its own stage index here; GAN targets use
/// `GAN_TARGET_STAGE_BASE + target_index`.
pub const EXPLAIN_STAGE: u64 = 7;
pub const GAN_TARGET_STAGE_BASE: u64 = 100;

/// Everything a command needs: the parsed config, the run directory, and
/// the flags that modify loading behavior.
pub struct Context {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub layout: Layout,
    pub allow_mismatch: bool,
    pub verify: bool,
    pub top_k: Option<usize>,
}

/// What a finished command reports back to the dispatcher.
pub struct Outcome {
    /// True when at least one per-item step failed and was skipped.
    pub partial: bool,
    /// Human-readable lines printed to stdout at the end of the run.
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn clean(summary: Vec<String>) -> Self {
        Outcome {
            partial: false,
            summary,
        }
    }
}

/// One per-item failure recorded in a report instead of aborting the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    /// Model id, attack name, or GAN target the failure belongs to.
    pub stage: String,
    pub message: String,
}

/// Index of artifacts one command invocation wrote, used by downstream
/// commands and by re-run verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Hash of the snapshot the command consumed or produced, when any.
    pub dataset_hash: Option<String>,
    /// Paths relative to the run directory, sorted for stable output.
    pub artifacts: Vec<String>,
}

impl Context {
    /// Writes `reports/{command}_manifest.json` from relative artifact paths.
    pub fn write_manifest(
        &self,
        command: &str,
        dataset_hash: Option<&str>,
        mut artifacts: Vec<String>,
    ) -> Result<()> {
        artifacts.sort();
        let manifest = RunManifest {
            command: command.to_owned(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            dataset_hash: dataset_hash.map(str::to_owned),
            artifacts,
        };
        let stem = command.replace('-', "_");
        write_json(
            self.layout.report(&format!("{stem}_manifest.json")),
            &manifest,
        )
    }

    /// Loads the snapshot this run directory was prepared with.
    ///
    /// Returns the reconstructed dataset together with the snapshot hash
    /// that trained models must match.
    pub fn load_dataset(&self) -> Result<(Dataset, Snapshot, String)> {
        let path = self.layout.snapshot_file();
        if !path.exists() {
            return Err(Error::Config(format!(
                "no dataset snapshot at {}; run `advclaim prepare` first",
                path.display()
            )));
        }
        let (snapshot, hash) = load_snapshot(&path)?;
        let dataset = snapshot.clone().into_dataset()?;
        Ok((dataset, snapshot, hash))
    }

    /// Loads one trained model, enforcing the snapshot hash unless the run
    /// was started with `--allow-mismatch`. Warnings go straight to stderr.
    pub fn load_model_checked(
        &self,
        model_id: &str,
        snapshot_hash: &str,
    ) -> Result<ModelDocument> {
        let path = self.layout.model_file(model_id);
        if !path.exists() {
            return Err(Error::Config(format!(
                "no trained model at {}; run `advclaim train` first",
                path.display()
            )));
        }
        let (document, warnings) = load_model(&path, snapshot_hash, self.allow_mismatch)?;
        for warning in &warnings {
            eprintln!("warning: {warning}");
        }
        Ok(document)
    }

    /// Cross-checks this invocation against the manifest `prepare` wrote.
    ///
    /// Active only under `--verify`. Catches a config file that changed
    /// since the snapshot was built, which would silently mix artifacts
    /// from two different experiments.
    pub fn verify_against_prepare(&self) -> Result<()> {
        if !self.verify {
            return Ok(());
        }
        let path = self.layout.report("prepare_manifest.json");
        let bytes = std::fs::read(&path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let manifest: RunManifest = serde_json::from_slice(&bytes)?;
        if manifest.config_hash != self.config_hash {
            return Err(Error::HashMismatch {
                expected: manifest.config_hash,
                found: self.config_hash.clone(),
            });
        }
        if manifest.seed != self.seed {
            return Err(Error::Config(format!(
                "run directory was prepared with seed {} but this invocation uses seed {}",
                manifest.seed, self.seed
            )));
        }
        Ok(())
    }
}

/// Test-split metrics for one trained model, with no attack rows attached.
pub fn clean_report(
    model: &dyn Classifier<Real>,
    model_id: &str,
    dataset: &Dataset,
    dataset_hash: &str,
    seed: u64,
) -> Result<MetricsReport> {
    let (x, y) = dataset.test_xy();
    let predicted = predict_labels(model, &x)?;
    let counts = confusion(&y, &predicted)?;
    let acc = accuracy(&counts)?.value();
    let f1_value = match f1(&counts) {
        Ok(ratio) => Some(ratio.value()),
        Err(Error::UndefinedMetric(_)) => None,
        Err(other) => return Err(other),
    };
    Ok(MetricsReport {
        model_id: model_id.to_owned(),
        dataset_hash: dataset_hash.to_owned(),
        seeds: vec![seed],
        accuracy: acc,
        f1: f1_value,
        confusion: counts,
        attacks: Vec::new(),
    })
}

/// Writes a string artifact, mapping IO failure onto the crate error type.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

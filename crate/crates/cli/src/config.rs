//! Experiment configuration: one TOML file describes the dataset, the model
//! zoo, the attack suite, and the generative attack. Every section rejects
//! unknown keys so a typo fails the run before any work starts, and every
//! stage's randomness is derived from the one global seed, so the file plus
//! that seed reproduce a run byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use advclaim_core::attacks::{AttackConfig, AttackKind, NoiseAcceptance};
use advclaim_core::data::SynthConfig;
use advclaim_core::error::{Error, Result};
use advclaim_core::ganrl::{GanConfig, GanLossMode, RlConfig};
use advclaim_core::metrics::AsrMode;
use advclaim_core::models::{
    GbtConfig, KnnConfig, MarginConfig, RecurrentConfig, MODEL_IDS,
};
use advclaim_core::numkit::SplitMix64;

pub const DEFAULT_LABEL_COLUMN: &str = "fraud_reported";

/// Derives an independent seed for one pipeline stage. Stages substream
/// their own seeds internally from small indices, so handing the same raw
/// seed to two stages would replay identical draws; one mixing step keeps
/// every stage on its own stream while staying a pure function of the
/// global seed.
pub fn derive_seed(global: u64, stage: u64) -> u64 {
    SplitMix64::substream(global, stage).next_u64()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    /// Output directory; the command line `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub models: ModelsSection,
    /// Attack suite; an empty list means all four attacks with defaults.
    #[serde(default)]
    pub attacks: Vec<AttackSection>,
    #[serde(default)]
    pub ganrl: GanrlSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub explain: ExplainSection,
}

fn default_label_column() -> String {
    DEFAULT_LABEL_COLUMN.to_owned()
}

/// Exactly one source: a claims CSV on disk or the synthetic benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub synth: Option<SynthSection>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_samples: usize,
    pub n_features: usize,
    pub class_separation: f64,
    pub fraud_fraction: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            n_samples: 1000,
            n_features: 12,
            class_separation: 2.0,
            fraud_fraction: 0.25,
        }
    }
}

impl SynthSection {
    pub fn to_synth_config(self, seed: u64) -> SynthConfig {
        SynthConfig {
            n_samples: self.n_samples,
            n_features: self.n_features,
            class_separation: self.class_separation,
            fraud_fraction: self.fraud_fraction,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsSection {
    /// Families to train, in training order.
    pub families: Vec<String>,
    pub recurrent: RecurrentConfig,
    /// Shared by both boosted variants; the growth field is overridden per
    /// family id.
    pub boosted: GbtConfig,
    pub knn: KnnConfig,
    pub margin: MarginConfig,
}

impl Default for ModelsSection {
    fn default() -> Self {
        ModelsSection {
            families: MODEL_IDS.iter().map(|id| (*id).to_owned()).collect(),
            recurrent: RecurrentConfig::default(),
            boosted: GbtConfig::default(),
            knn: KnnConfig::default(),
            margin: MarginConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub name: AttackKind,
    /// Strictly ascending budget grid.
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Per-iteration step for the iterative attacks; `None` means a quarter
    /// of each grid point's budget.
    #[serde(default)]
    pub step_size: Option<f64>,
    #[serde(default)]
    pub random_start: bool,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_acceptance")]
    pub acceptance: NoiseAcceptance,
}

pub fn default_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}

fn default_steps() -> usize {
    10
}

fn default_max_iters() -> usize {
    100
}

fn default_acceptance() -> NoiseAcceptance {
    NoiseAcceptance::PerSample
}

impl AttackSection {
    fn with_defaults(name: AttackKind) -> Self {
        AttackSection {
            name,
            grid: default_grid(),
            steps: default_steps(),
            step_size: None,
            random_start: false,
            max_iters: default_max_iters(),
            acceptance: default_acceptance(),
        }
    }

    /// Base attack configuration; the sweep overrides epsilon per grid
    /// point, so the placeholder budget here never runs.
    pub fn to_attack_config(&self, seed: u64) -> AttackConfig {
        AttackConfig {
            epsilon: self.grid.first().copied().unwrap_or(0.25),
            steps: self.steps,
            step_size: self.step_size,
            random_start: self.random_start,
            max_iters: self.max_iters,
            acceptance: self.acceptance,
            seed,
        }
    }
}

/// The four attacks with default budgets, used when the config lists none.
pub fn default_attack_suite() -> Vec<AttackSection> {
    AttackKind::ALL
        .iter()
        .map(|kind| AttackSection::with_defaults(*kind))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanrlSection {
    /// Model ids the generative attack is aimed at, each attacked with its
    /// own independently seeded run.
    pub targets: Vec<String>,
    /// Generated batches scored against the target after refinement.
    pub eval_batches: usize,
    pub pretrain: PretrainSection,
    pub refine: RefineSection,
}

impl Default for GanrlSection {
    fn default() -> Self {
        GanrlSection {
            targets: vec!["boosted_level_wise".to_owned(), "bi_recurrent".to_owned()],
            eval_batches: 100,
            pretrain: PretrainSection::default(),
            refine: RefineSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub latent_width: usize,
    pub generator_lr: f64,
    pub discriminator_lr: f64,
    pub loss_mode: GanLossMode,
}

impl Default for PretrainSection {
    fn default() -> Self {
        let base = GanConfig::default();
        PretrainSection {
            epochs: base.epochs,
            batch_size: base.batch_size,
            latent_width: base.latent_width,
            generator_lr: base.generator_lr,
            discriminator_lr: base.discriminator_lr,
            loss_mode: base.loss_mode,
        }
    }
}

impl PretrainSection {
    pub fn to_gan_config(self, seed: u64) -> GanConfig {
        GanConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            latent_width: self.latent_width,
            generator_lr: self.generator_lr,
            discriminator_lr: self.discriminator_lr,
            loss_mode: self.loss_mode,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineSection {
    pub batch: usize,
    pub horizon: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub episodes: usize,
    pub y_target: u8,
    pub generator_lr: f64,
    pub es_samples: usize,
    pub es_sigma: f64,
}

impl Default for RefineSection {
    fn default() -> Self {
        let base = RlConfig::default();
        RefineSection {
            batch: base.batch,
            horizon: base.horizon,
            alpha: base.alpha,
            gamma: base.gamma,
            episodes: base.episodes,
            y_target: base.y_target,
            generator_lr: base.generator_lr,
            es_samples: base.es_samples,
            es_sigma: base.es_sigma,
        }
    }
}

impl RefineSection {
    /// The latent width comes from the pretraining section so the refined
    /// generator and the refinement loop can never disagree on it.
    pub fn to_rl_config(self, latent_width: usize, seed: u64) -> RlConfig {
        RlConfig {
            batch: self.batch,
            horizon: self.horizon,
            latent_width,
            alpha: self.alpha,
            gamma: self.gamma,
            episodes: self.episodes,
            y_target: self.y_target,
            generator_lr: self.generator_lr,
            es_samples: self.es_samples,
            es_sigma: self.es_sigma,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub asr_mode: AsrMode,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            asr_mode: AsrMode::SampleRate,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub model: String,
    /// Test rows averaged into the global importance ranking.
    pub n_explained: usize,
    pub n_permutations: usize,
    /// Truncates the importance table; `None` keeps every feature.
    pub top_k: Option<usize>,
}

impl Default for ExplainSection {
    fn default() -> Self {
        ExplainSection {
            model: "boosted_level_wise".to_owned(),
            n_explained: 20,
            n_permutations: 500,
            top_k: None,
        }
    }
}

fn check_known_families(context: &str, ids: &[String]) -> Result<()> {
    for id in ids {
        if !MODEL_IDS.contains(&id.as_str()) {
            return Err(Error::Config(format!(
                "{context} names unknown model family {id:?}; known families: {}",
                MODEL_IDS.join(", ")
            )));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.dataset.csv, &self.dataset.synth) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "dataset section sets both csv and synth; pick one".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "dataset section needs either csv or synth".into(),
                ))
            }
            _ => {}
        }
        if self.label_column.trim().is_empty() {
            return Err(Error::Config("label_column must not be empty".into()));
        }
        if self.models.families.is_empty() {
            return Err(Error::Config("models.families must not be empty".into()));
        }
        check_known_families("models.families", &self.models.families)?;
        for (i, family) in self.models.families.iter().enumerate() {
            // Duplicate ids would silently overwrite each other's files.
            if self.models.families[..i].contains(family) {
                return Err(Error::Config(format!(
                    "models.families lists {family:?} more than once"
                )));
            }
        }
        check_known_families("ganrl.targets", &self.ganrl.targets)?;
        if self.ganrl.eval_batches == 0 {
            return Err(Error::Config("ganrl.eval_batches must be positive".into()));
        }
        check_known_families("explain.model", std::slice::from_ref(&self.explain.model))?;
        if self.explain.n_explained == 0 || self.explain.n_permutations == 0 {
            return Err(Error::Config(
                "explain.n_explained and explain.n_permutations must be positive".into(),
            ));
        }
        if self.explain.top_k == Some(0) {
            return Err(Error::Config("explain.top_k must be positive when set".into()));
        }
        Ok(())
    }

    /// The attack suite to run: the configured sections, or all four
    /// attacks with defaults when the config lists none.
    pub fn attack_suite(&self) -> Vec<AttackSection> {
        if self.attacks.is_empty() {
            default_attack_suite()
        } else {
            self.attacks.clone()
        }
    }
}

/// Parses and validates a config file, returning it with the hex SHA-256 of
/// the exact file bytes. Reports embed that hash, which ties every artifact
/// back to the configuration text that produced it.
pub fn load_config(path: impl AsRef<Path>) -> Result<(ExperimentConfig, String)> {
    let path = path.as_ref();
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        Error::Config(format!("{} is not UTF-8: {e}", path.display()))
    })?;
    let config: ExperimentConfig = toml::from_str(text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    let mut hash = String::with_capacity(64);
    for byte in Sha256::digest(&bytes) {
        hash.push_str(&format!("{byte:02x}"));
    }
    Ok((config, hash))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &tempfile::TempDir, body: &str) -> PathBuf {
        let path = dir.path().join("experiment.toml");
        std::fs::write(&path, body).expect("write config");
        path
    }

    #[test]
    fn minimal_synth_config_fills_every_default() {
        let dir = tempfile::tempdir().expect("tempdir");
        let path = write_config(&dir, "seed = 7\n[dataset.synth]\n");
        let (config, hash) = load_config(&path).expect("load");
        assert_eq!(config.seed, 7);
        assert_eq!(config.label_column, DEFAULT_LABEL_COLUMN);
        assert_eq!(config.models.families.len(), 5);
        assert_eq!(config.dataset.synth.unwrap().n_features, 12);
        assert_eq!(config.attack_suite().len(), 4);
        assert_eq!(config.ganrl.targets.len(), 2);
        assert_eq!(hash.len(), 64);
    }

    #[test]
    fn unknown_keys_fail_at_every_level() {
        let dir = tempfile::tempdir().expect("tempdir");
        let bodies = [
            "seed = 1\nbanana = 2\n[dataset.synth]\n",
            "seed = 1\n[dataset.synth]\nbanana = 2\n",
            "seed = 1\n[dataset.synth]\n[models.recurrent]\nbanana = 2\n",
            "seed = 1\n[dataset.synth]\n[[attacks]]\nname = \"fgsm\"\nbanana = 2\n",
            "seed = 1\n[dataset.synth]\n[ganrl.refine]\nbanana = 2\n",
        ];
        for body in bodies {
            let path = write_config(&dir, body);
            assert!(
                matches!(load_config(&path), Err(Error::Config(_))),
                "accepted: {body}"
            );
        }
    }

    #[test]
    fn dataset_source_must_be_exactly_one() {
        let dir = tempfile::tempdir().expect("tempdir");
        let none = write_config(&dir, "seed = 1\n[dataset]\n");
        assert!(load_config(&none).is_err());
        let both = write_config(
            &dir,
            "seed = 1\n[dataset]\ncsv = \"claims.csv\"\n[dataset.synth]\n",
        );
        assert!(load_config(&both).is_err());
    }

    #[test]
    fn family_names_are_checked_everywhere() {
        let dir = tempfile::tempdir().expect("tempdir");
        let bodies = [
            "seed = 1\n[dataset.synth]\n[models]\nfamilies = [\"xgboost\"]\n",
            "seed = 1\n[dataset.synth]\n[ganrl]\ntargets = [\"lstm\"]\n",
            "seed = 1\n[dataset.synth]\n[explain]\nmodel = \"svm\"\n",
            "seed = 1\n[dataset.synth]\n[models]\nfamilies = [\"knn\", \"knn\"]\n",
        ];
        for body in bodies {
            let path = write_config(&dir, body);
            assert!(load_config(&path).is_err(), "accepted: {body}");
        }
    }

    #[test]
    fn config_hash_tracks_the_bytes() {
        let dir = tempfile::tempdir().expect("tempdir");
        let a = write_config(&dir, "seed = 1\n[dataset.synth]\n");
        let (_, hash_a) = load_config(&a).expect("load");
        let (_, hash_again) = load_config(&a).expect("load");
        assert_eq!(hash_a, hash_again);
        let b = write_config(&dir, "seed = 2\n[dataset.synth]\n");
        let (_, hash_b) = load_config(&b).expect("load");
        assert_ne!(hash_a, hash_b);
    }

    #[test]
    fn derived_stage_seeds_differ_from_the_global_and_each_other() {
        let global = 7;
        let stages: Vec<u64> = (1..6).map(|s| derive_seed(global, s)).collect();
        for (i, seed) in stages.iter().enumerate() {
            assert_ne!(*seed, global);
            for other in &stages[i + 1..] {
                assert_ne!(seed, other);
            }
        }
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn attack_sections_carry_the_sweep_defaults() {
        let section = AttackSection::with_defaults(AttackKind::Pgd);
        assert_eq!(section.grid.len(), 10);
        assert!((section.grid[0] - 0.05).abs() < 1e-12);
        assert!((section.grid[9] - 0.50).abs() < 1e-12);
        let cfg = section.to_attack_config(9);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.steps, 10);
    }
}

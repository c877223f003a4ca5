//! Pretrains a record generator and refines it against trained detectors.
//!
//! The refinement loop sees each target only through a score-only
//! surrogate handle, so it exercises exactly the gray-box protocol: no
//! parameters, no gradients, every query metered. Evaluation afterwards
//! asks the detector directly, which keeps the handle's query count equal
//! to what the attack itself consumed.

use std::fmt::Write as _;

use advclaim_core::error::Result;
use advclaim_core::ganrl::{
    attach_target_as_surrogate, decoded_batch_csv, generate_batch, pretrain_gan, rl_refine,
    traces_jsonl, DiscriminatorNet, EpisodeTrace, GeneratorNet, PretrainReport,
};
use advclaim_core::metrics::{asr, write_json, AsrMode, BatchOutcome, Ratio};
use advclaim_core::models::labels_from_scores;
use advclaim_core::numkit::SplitMix64;
use advclaim_core::{Matrix, Real};
use serde::{Deserialize, Serialize};

use crate::config::derive_seed;

use super::{write_text, Context, FailureRecord, Outcome, GAN_TARGET_STAGE_BASE};

/// Substream indices under one target's base seed, one per random stage.
const STREAM_GEN_INIT: u64 = 1;
const STREAM_DISC_INIT: u64 = 2;
const STREAM_PRETRAIN: u64 = 3;
const STREAM_REFINE: u64 = 4;
const STREAM_EVAL: u64 = 5;
const STREAM_SAMPLE: u64 = 6;

/// Outcome of one target's generate-and-detect evaluation.
///
/// Rates are stored as exact count ratios alongside their float values, so
/// the complement identity between evasion rate and detector accuracy can
/// be checked without rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TargetReport {
    target: String,
    episodes_completed: usize,
    /// Rows scored through the surrogate handle during refinement. The
    /// attack's whole information budget; evaluation queries bypass the
    /// handle and are not included.
    surrogate_queries: u64,
    differentiable_surrogate: bool,
    y_target: u8,
    generated_rows: u64,
    rows_scored_as_target: u64,
    asr_sample_rate: Ratio,
    asr_sample_rate_value: f64,
    asr_batch_all: Ratio,
    asr_batch_all_value: f64,
    detector_accuracy: Ratio,
    detector_accuracy_value: f64,
    mean_reward_first_episode: f64,
    mean_reward_last_episode: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    interrupted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GanAttackReport {
    config_hash: String,
    seed: u64,
    dataset_hash: String,
    asr_mode: AsrMode,
    targets: Vec<TargetReport>,
    failures: Vec<FailureRecord>,
}

/// Persisted refined generator, bound to its target and snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GeneratorDocument {
    target: String,
    dataset_hash: String,
    config_hash: String,
    generator: GeneratorNet<Real>,
}

pub fn cmd_gan_attack(ctx: &Context) -> Result<Outcome> {
    ctx.verify_against_prepare()?;
    let (dataset, snapshot, dataset_hash) = ctx.load_dataset()?;
    let (x_train, _) = dataset.train_xy();
    let section = &ctx.config.ganrl;

    let mut targets = Vec::new();
    let mut failures = Vec::new();
    let mut artifacts = vec!["reports/gan_attack_report.json".to_owned()];
    let mut summary = Vec::new();

    for (idx, target) in section.targets.iter().enumerate() {
        let base_seed = derive_seed(ctx.seed, GAN_TARGET_STAGE_BASE + idx as u64);
        match attack_one_target(ctx, target, base_seed, &x_train, &snapshot.schema, &dataset_hash)
        {
            Ok(report) => {
                summary.push(format!(
                    "{target}: evasion rate {}/{} ({:.4}), {} queries",
                    report.asr_sample_rate.numerator,
                    report.asr_sample_rate.denominator,
                    report.asr_sample_rate_value,
                    report.surrogate_queries
                ));
                for name in [
                    "pretrain_losses.csv",
                    "generator.json",
                    "traces.jsonl",
                    "generated_sample.csv",
                ] {
                    artifacts.push(format!("ganrl/{target}/{name}"));
                }
                targets.push(report);
            }
            Err(err) => {
                eprintln!("error: gan attack on {target} failed: {err}");
                failures.push(FailureRecord {
                    stage: target.clone(),
                    message: err.to_string(),
                });
            }
        }
    }

    let partial = !failures.is_empty();
    let report = GanAttackReport {
        config_hash: ctx.config_hash.clone(),
        seed: ctx.seed,
        dataset_hash: dataset_hash.clone(),
        asr_mode: ctx.config.metrics.asr_mode,
        targets,
        failures,
    };
    write_json(ctx.layout.report("gan_attack_report.json"), &report)?;
    ctx.write_manifest("gan-attack", Some(&dataset_hash), artifacts)?;

    Ok(Outcome { partial, summary })
}

fn attack_one_target(
    ctx: &Context,
    target: &str,
    base_seed: u64,
    x_train: &Matrix,
    schema: &[advclaim_core::data::FeatureMeta],
    dataset_hash: &str,
) -> Result<TargetReport> {
    let document = ctx.load_model_checked(target, dataset_hash)?;
    let model = document.payload.classifier();
    let section = &ctx.config.ganrl;
    let dir = ctx.layout.ganrl_dir(target);
    std::fs::create_dir_all(&dir)
        .map_err(|e| advclaim_core::Error::io(dir.display().to_string(), e))?;

    let latent_width = section.pretrain.latent_width;
    let mut gen = GeneratorNet::init(
        latent_width,
        x_train.cols(),
        derive_seed(base_seed, STREAM_GEN_INIT),
    )?;
    let mut disc =
        DiscriminatorNet::init(x_train.cols(), derive_seed(base_seed, STREAM_DISC_INIT))?;

    let gan_cfg = section
        .pretrain
        .clone()
        .to_gan_config(derive_seed(base_seed, STREAM_PRETRAIN));
    let pretrain_report = pretrain_gan(&mut gen, &mut disc, x_train, &gan_cfg)?;
    write_text(
        &dir.join("pretrain_losses.csv"),
        &pretrain_csv(&pretrain_report),
    )?;

    // Score-only attachment: the refinement loop cannot name the model
    // type, read parameters, or request gradients through this handle.
    let handle = attach_target_as_surrogate(model);
    let rl_cfg = section
        .refine
        .clone()
        .to_rl_config(latent_width, derive_seed(base_seed, STREAM_REFINE));
    let (traces, interrupted) = match rl_refine(&mut gen, &handle, &rl_cfg) {
        Ok(traces) => (traces, None),
        Err(stop) => {
            let message = stop.to_string();
            (stop.traces, Some(message))
        }
    };
    // Captured before evaluation, which queries the model directly.
    let surrogate_queries = handle.queries();

    write_text(&dir.join("traces.jsonl"), &traces_jsonl(&traces)?)?;
    write_json(
        dir.join("generator.json"),
        &GeneratorDocument {
            target: target.to_owned(),
            dataset_hash: dataset_hash.to_owned(),
            config_hash: ctx.config_hash.clone(),
            generator: gen.clone(),
        },
    )?;

    let mut sample_rng = SplitMix64::new(derive_seed(base_seed, STREAM_SAMPLE));
    let sample: Matrix = generate_batch(&gen, &mut sample_rng, section.refine.batch)?;
    write_text(
        &dir.join("generated_sample.csv"),
        &decoded_batch_csv(&sample, schema)?,
    )?;

    let mut eval_rng = SplitMix64::new(derive_seed(base_seed, STREAM_EVAL));
    let mut outcomes = Vec::with_capacity(section.eval_batches);
    for _ in 0..section.eval_batches {
        let batch: Matrix = generate_batch(&gen, &mut eval_rng, section.refine.batch)?;
        let scores = model.predict_proba(&batch)?;
        let labels = labels_from_scores(&scores);
        let hits = labels
            .iter()
            .filter(|&&label| label == section.refine.y_target)
            .count() as u64;
        outcomes.push(BatchOutcome {
            hits,
            total: labels.len() as u64,
        });
    }
    let sample_rate = asr(&outcomes, AsrMode::SampleRate)?;
    let batch_all = asr(&outcomes, AsrMode::BatchAll)?;
    // A generated row evades exactly when the detector mislabels it, so
    // detector accuracy is the exact complement of the per-row rate.
    let detector_accuracy = sample_rate.complement();

    Ok(TargetReport {
        target: target.to_owned(),
        episodes_completed: traces.len(),
        surrogate_queries,
        differentiable_surrogate: handle.is_differentiable(),
        y_target: section.refine.y_target,
        generated_rows: sample_rate.denominator,
        rows_scored_as_target: sample_rate.numerator,
        asr_sample_rate: sample_rate,
        asr_sample_rate_value: sample_rate.value(),
        asr_batch_all: batch_all,
        asr_batch_all_value: batch_all.value(),
        detector_accuracy,
        detector_accuracy_value: detector_accuracy.value(),
        mean_reward_first_episode: mean_episode_reward(traces.first()),
        mean_reward_last_episode: mean_episode_reward(traces.last()),
        interrupted,
    })
}

fn mean_episode_reward(trace: Option<&EpisodeTrace>) -> f64 {
    match trace {
        Some(t) if !t.steps.is_empty() => {
            t.steps.iter().map(|s| s.reward).sum::<f64>() / t.steps.len() as f64
        }
        _ => f64::NAN,
    }
}

fn pretrain_csv(report: &PretrainReport) -> String {
    let mut out = String::from("step,discriminator_loss,generator_loss\n");
    for (i, (d, g)) in report
        .discriminator_losses
        .iter()
        .zip(&report.generator_losses)
        .enumerate()
    {
        let _ = writeln!(out, "{i},{d},{g}");
    }
    out
}

//! Runs the perturbation-attack sweeps against every trained model.

use advclaim_core::attacks::{sweep, sweep_csv, SweepFailure, SweepResult};
use advclaim_core::error::{Error, Result};
use advclaim_core::numkit::DenseMatrix;
use advclaim_core::metrics::{write_json, AttackRow};
use advclaim_core::models::Classifier;
use advclaim_core::Real;
use serde::{Deserialize, Serialize};

use super::{write_text, Context, FailureRecord, Outcome};
use crate::config::AttackSection;

/// One attack family's result against one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AttackEntry {
    attack: String,
    /// "ok" when the sweep ran, "not_applicable" when the model cannot
    /// provide what the attack needs (gradient attacks on tree or
    /// neighbor families).
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    rows: Vec<AttackRow>,
    /// Grid points that errored while the rest of the sweep continued.
    errors: Vec<SweepFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelAttackReport {
    model_id: String,
    clean_accuracy: f64,
    entries: Vec<AttackEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AttackReport {
    config_hash: String,
    seed: u64,
    dataset_hash: String,
    models: Vec<ModelAttackReport>,
    failures: Vec<FailureRecord>,
}

pub fn cmd_attack(ctx: &Context) -> Result<Outcome> {
    ctx.verify_against_prepare()?;
    let (dataset, _, dataset_hash) = ctx.load_dataset()?;
    let (x_test, y_test) = dataset.test_xy();
    let suite = ctx.config.attack_suite();

    let mut models = Vec::new();
    let mut failures = Vec::new();
    let mut artifacts = vec!["reports/attack_report.json".to_owned()];
    let mut summary = Vec::new();

    for family in &ctx.config.models.families {
        let document = match ctx.load_model_checked(family, &dataset_hash) {
            Ok(doc) => doc,
            Err(err) => {
                eprintln!("error: skipping {family}: {err}");
                failures.push(FailureRecord {
                    stage: family.clone(),
                    message: err.to_string(),
                });
                continue;
            }
        };
        let model = document.payload.classifier();
        let differentiable = probe_differentiable(model)?;

        let mut entries = Vec::new();
        let mut sweeps = Vec::new();
        let mut clean_accuracy = f64::NAN;
        for section in &suite {
            if section.name.needs_gradient() && !differentiable {
                let reason = Error::NotDifferentiable {
                    family: model.family(),
                }
                .to_string();
                summary.push(format!("{family} / {}: not applicable", section.name.name()));
                entries.push(AttackEntry {
                    attack: section.name.name().to_owned(),
                    status: "not_applicable".to_owned(),
                    reason: Some(reason),
                    rows: Vec::new(),
                    errors: Vec::new(),
                });
                continue;
            }
            match run_sweep(ctx, model, &x_test, &y_test, section) {
                Ok(result) => {
                    clean_accuracy = result.clean_accuracy;
                    summary.push(format!(
                        "{family} / {}: {} grid points, final accuracy {:.4}",
                        section.name.name(),
                        result.points.len(),
                        result.points.last().map_or(f64::NAN, |p| p.accuracy_after)
                    ));
                    entries.push(entry_from_sweep(ctx, &result));
                    sweeps.push(result);
                }
                Err(err) => {
                    eprintln!(
                        "error: {family} / {} sweep failed: {err}",
                        section.name.name()
                    );
                    failures.push(FailureRecord {
                        stage: format!("{family}/{}", section.name.name()),
                        message: err.to_string(),
                    });
                }
            }
        }

        for result in &sweeps {
            let path = ctx.layout.attack_csv(family, result.attack.name());
            write_text(&path, &sweep_csv(std::slice::from_ref(result)))?;
            artifacts.push(format!("attacks/{family}__{}.csv", result.attack.name()));
        }
        models.push(ModelAttackReport {
            model_id: family.clone(),
            clean_accuracy,
            entries,
        });
    }

    let partial = !failures.is_empty();
    let report = AttackReport {
        config_hash: ctx.config_hash.clone(),
        seed: ctx.seed,
        dataset_hash: dataset_hash.clone(),
        models,
        failures,
    };
    write_json(ctx.layout.report("attack_report.json"), &report)?;
    ctx.write_manifest("attack", Some(&dataset_hash), artifacts)?;

    Ok(Outcome { partial, summary })
}

/// Asks the model for a gradient once, on an in-domain zero row, to decide
/// whether gradient attacks apply. Avoids string-matching sweep failures.
fn probe_differentiable(model: &dyn Classifier<Real>) -> Result<bool> {
    let x = DenseMatrix::zeros(1, model.n_features());
    match model.input_gradient(&x, &[0]) {
        Ok(_) => Ok(true),
        Err(Error::NotDifferentiable { .. }) => Ok(false),
        Err(other) => Err(other),
    }
}

fn run_sweep(
    ctx: &Context,
    model: &dyn Classifier<Real>,
    x: &DenseMatrix<Real>,
    y: &[u8],
    section: &AttackSection,
) -> Result<SweepResult> {
    let cfg = section.to_attack_config(ctx.seed);
    sweep(model, x, y, section.name, &section.grid, &cfg)
}

/// Success rate per grid point is the complement of post-attack accuracy:
/// every misclassified sample counts as a successful perturbation.
fn entry_from_sweep(ctx: &Context, result: &SweepResult) -> AttackEntry {
    let rows = result
        .points
        .iter()
        .map(|p| AttackRow {
            attack: result.attack.name().to_owned(),
            epsilon: p.epsilon,
            accuracy_after: p.accuracy_after,
            attack_success_rate: 1.0 - p.accuracy_after,
            seed: ctx.seed,
        })
        .collect();
    AttackEntry {
        attack: result.attack.name().to_owned(),
        status: "ok".to_owned(),
        reason: None,
        rows,
        errors: result.failures.clone(),
    }
}

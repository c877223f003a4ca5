//! Recomputes clean test metrics for every trained model.

use advclaim_core::error::Result;
use advclaim_core::metrics::{model_table_csv, write_json, MetricsReport, ModelRow};
use serde::{Deserialize, Serialize};

use super::{clean_report, write_text, Context, FailureRecord, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EvalReport {
    config_hash: String,
    seed: u64,
    dataset_hash: String,
    models: Vec<MetricsReport>,
    failures: Vec<FailureRecord>,
}

pub fn cmd_eval(ctx: &Context) -> Result<Outcome> {
    ctx.verify_against_prepare()?;
    let (dataset, _, dataset_hash) = ctx.load_dataset()?;

    let mut models = Vec::new();
    let mut failures = Vec::new();
    let mut summary = Vec::new();

    for family in &ctx.config.models.families {
        let result = ctx
            .load_model_checked(family, &dataset_hash)
            .and_then(|document| {
                clean_report(
                    document.payload.classifier(),
                    family,
                    &dataset,
                    &dataset_hash,
                    document.seed,
                )
            });
        match result {
            Ok(report) => {
                summary.push(format!(
                    "{family}: accuracy {:.4}, f1 {}",
                    report.accuracy,
                    report
                        .f1
                        .map_or_else(|| "n/a".to_owned(), |v| format!("{v:.4}"))
                ));
                models.push(report);
            }
            Err(err) => {
                eprintln!("error: evaluating {family} failed: {err}");
                failures.push(FailureRecord {
                    stage: family.clone(),
                    message: err.to_string(),
                });
            }
        }
    }

    let rows: Vec<ModelRow> = models
        .iter()
        .map(|r| ModelRow {
            model: r.model_id.clone(),
            accuracy: r.accuracy,
            f1: r.f1,
        })
        .collect();
    write_text(
        &ctx.layout.report("model_table.csv"),
        &model_table_csv(&rows),
    )?;

    let partial = !failures.is_empty();
    let report = EvalReport {
        config_hash: ctx.config_hash.clone(),
        seed: ctx.seed,
        dataset_hash: dataset_hash.clone(),
        models,
        failures,
    };
    write_json(ctx.layout.report("eval_report.json"), &report)?;
    ctx.write_manifest(
        "eval",
        Some(&dataset_hash),
        vec![
            "reports/eval_report.json".to_owned(),
            "reports/model_table.csv".to_owned(),
        ],
    )?;

    Ok(Outcome { partial, summary })
}

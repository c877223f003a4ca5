//! Trains the configured model families against the prepared snapshot.

use advclaim_core::data::Dataset;
use advclaim_core::error::Result;
use advclaim_core::metrics::{model_table_csv, write_json, MetricsReport, ModelRow};
use advclaim_core::models::{
    save_model, train_birecurrent, train_gbt, train_knn, train_margin, GbtConfig, Growth,
    KnnConfig, MarginConfig, ModelDocument, ModelPayload, RecurrentConfig,
};
use serde::{Deserialize, Serialize};

use super::{clean_report, write_text, Context, FailureRecord, Outcome};

/// Hyperparameters as resolved for this run, embedded in the report so a
/// trained model never has to be re-derived from a config file that may
/// have changed since.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ResolvedHyperparameters {
    recurrent: RecurrentConfig,
    boosted_level_wise: GbtConfig,
    boosted_leaf_wise: GbtConfig,
    knn: KnnConfig,
    margin: MarginConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrainReport {
    config_hash: String,
    seed: u64,
    dataset_hash: String,
    hyperparameters: ResolvedHyperparameters,
    models: Vec<MetricsReport>,
    failures: Vec<FailureRecord>,
}

pub fn cmd_train(ctx: &Context) -> Result<Outcome> {
    ctx.verify_against_prepare()?;
    let (dataset, _, dataset_hash) = ctx.load_dataset()?;

    let mut models = Vec::new();
    let mut failures = Vec::new();
    let mut artifacts = vec![
        "reports/train_report.json".to_owned(),
        "reports/model_table.csv".to_owned(),
    ];
    let mut summary = Vec::new();

    for family in &ctx.config.models.families {
        match train_one(ctx, family, &dataset) {
            Ok(payload) => {
                let document = ModelDocument {
                    model_id: family.clone(),
                    dataset_hash: dataset_hash.clone(),
                    seed: ctx.seed,
                    payload,
                };
                save_model(ctx.layout.model_file(family), &document)?;
                let report = clean_report(
                    document.payload.classifier(),
                    family,
                    &dataset,
                    &dataset_hash,
                    ctx.seed,
                )?;
                summary.push(format!(
                    "{family}: accuracy {:.4}, f1 {}",
                    report.accuracy,
                    report
                        .f1
                        .map_or_else(|| "n/a".to_owned(), |v| format!("{v:.4}"))
                ));
                models.push(report);
                artifacts.push(format!("models/{family}.json"));
            }
            Err(err) => {
                eprintln!("error: training {family} failed: {err}");
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
    let report = TrainReport {
        config_hash: ctx.config_hash.clone(),
        seed: ctx.seed,
        dataset_hash: dataset_hash.clone(),
        hyperparameters: ResolvedHyperparameters {
            recurrent: ctx.config.models.recurrent,
            boosted_level_wise: GbtConfig {
                growth: Growth::LevelWise,
                ..ctx.config.models.boosted
            },
            boosted_leaf_wise: GbtConfig {
                growth: Growth::LeafWise,
                ..ctx.config.models.boosted
            },
            knn: ctx.config.models.knn,
            margin: ctx.config.models.margin,
        },
        models,
        failures,
    };
    write_json(ctx.layout.report("train_report.json"), &report)?;
    ctx.write_manifest("train", Some(&dataset_hash), artifacts)?;

    Ok(Outcome { partial, summary })
}

/// Dispatches one family id onto its trainer.
fn train_one(ctx: &Context, family: &str, dataset: &Dataset) -> Result<ModelPayload> {
    let models = &ctx.config.models;
    match family {
        "bi_recurrent" => {
            train_birecurrent(dataset, &models.recurrent, ctx.seed).map(ModelPayload::BiRecurrent)
        }
        "boosted_level_wise" => {
            let cfg = GbtConfig {
                growth: Growth::LevelWise,
                ..models.boosted
            };
            train_gbt(dataset, &cfg).map(ModelPayload::Boosted)
        }
        "boosted_leaf_wise" => {
            let cfg = GbtConfig {
                growth: Growth::LeafWise,
                ..models.boosted
            };
            train_gbt(dataset, &cfg).map(ModelPayload::Boosted)
        }
        "knn" => train_knn(dataset, &models.knn).map(ModelPayload::Knn),
        "margin" => train_margin(dataset, &models.margin, ctx.seed).map(ModelPayload::Margin),
        other => Err(advclaim_core::error::Error::Config(format!(
            "unknown model family {other:?}"
        ))),
    }
}

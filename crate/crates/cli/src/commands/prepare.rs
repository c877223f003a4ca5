//! Builds the dataset snapshot every later command consumes.

use advclaim_core::data::{
    infer_kinds, load_csv, save_snapshot, synth_generate, Dataset, Snapshot, TransformReport,
};
use advclaim_core::error::Result;
use advclaim_core::metrics::write_json;
use serde::{Deserialize, Serialize};

use super::{Context, Outcome};

/// Train/validation/test fractions applied to every ingested table.
const SPLIT_FRACTIONS: (f64, f64, f64) = (0.75, 0.05, 0.20);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PrepareReport {
    config_hash: String,
    seed: u64,
    dataset_hash: String,
    source: String,
    label_column: String,
    rows: usize,
    features: usize,
    train_rows: usize,
    val_rows: usize,
    test_rows: usize,
    transform: TransformReport,
    warnings: Vec<String>,
}

pub fn cmd_prepare(ctx: &Context) -> Result<Outcome> {
    let (dataset, transform, source) = build_dataset(ctx)?;
    let snapshot = Snapshot::from_dataset(&dataset, ctx.seed, &ctx.config.label_column);
    let dataset_hash = save_snapshot(ctx.layout.snapshot_file(), &snapshot)?;

    let report = PrepareReport {
        config_hash: ctx.config_hash.clone(),
        seed: ctx.seed,
        dataset_hash: dataset_hash.clone(),
        source,
        label_column: ctx.config.label_column.clone(),
        rows: dataset.n_rows(),
        features: dataset.n_features(),
        train_rows: dataset.split.train.len(),
        val_rows: dataset.split.val.len(),
        test_rows: dataset.split.test.len(),
        transform,
        warnings: dataset.warnings.clone(),
    };
    write_json(ctx.layout.report("prepare_report.json"), &report)?;
    ctx.write_manifest(
        "prepare",
        Some(&dataset_hash),
        vec![
            "snapshot/dataset.json".to_owned(),
            "reports/prepare_report.json".to_owned(),
        ],
    )?;

    let mut summary = vec![format!(
        "prepared {} rows x {} features (snapshot {})",
        report.rows,
        report.features,
        &dataset_hash[..12]
    )];
    for warning in &report.warnings {
        summary.push(format!("warning: {warning}"));
    }
    Ok(Outcome::clean(summary))
}

/// Loads the CSV or generates the synthetic table, per the config.
fn build_dataset(ctx: &Context) -> Result<(Dataset, TransformReport, String)> {
    if let Some(path) = &ctx.config.dataset.csv {
        let raw = load_csv(path, &ctx.config.label_column)?;
        let kinds = infer_kinds(&raw);
        let (dataset, transform) = Dataset::from_table(&raw, &kinds, SPLIT_FRACTIONS, ctx.seed)?;
        return Ok((dataset, transform, format!("csv:{}", path.display())));
    }
    // validate() guarantees exactly one source, so `synth` is present here.
    let section = ctx.config.dataset.synth.clone().unwrap_or_default();
    let dataset = synth_generate(&section.to_synth_config(ctx.seed))?;
    Ok((dataset, TransformReport::default(), "synth".to_owned()))
}

//! Ranks features of one trained model by sampled Shapley importance.

use advclaim_core::attribution::{global_importance, importance_csv};
use advclaim_core::error::Result;

use crate::config::derive_seed;

use super::{write_text, Context, Outcome, EXPLAIN_STAGE};

pub fn cmd_explain(ctx: &Context) -> Result<Outcome> {
    ctx.verify_against_prepare()?;
    let (dataset, _, dataset_hash) = ctx.load_dataset()?;
    let section = &ctx.config.explain;
    let document = ctx.load_model_checked(&section.model, &dataset_hash)?;

    let mut rows = global_importance(
        document.payload.classifier(),
        &dataset,
        section.n_explained,
        section.n_permutations,
        derive_seed(ctx.seed, EXPLAIN_STAGE),
    )?;
    // The command-line flag wins over the config file.
    if let Some(k) = ctx.top_k.or(section.top_k) {
        rows.truncate(k);
    }

    let name = format!("importance_{}.csv", section.model);
    write_text(&ctx.layout.report(&name), &importance_csv(&rows))?;
    ctx.write_manifest(
        "explain",
        Some(&dataset_hash),
        vec![format!("reports/{name}")],
    )?;

    let mut summary = vec![format!(
        "ranked {} features for {} over {} explained rows x {} permutations",
        rows.len(),
        section.model,
        section.n_explained,
        section.n_permutations
    )];
    for row in rows.iter().take(5) {
        summary.push(format!(
            "  {}. {} ({:.6})",
            row.rank, row.feature, row.mean_abs_shapley
        ));
    }
    Ok(Outcome::clean(summary))
}

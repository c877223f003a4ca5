//! Model-agnostic feature importance via Monte-Carlo Shapley sampling.
//!
//! One permutation draws a random feature order and one background row,
//! then walks the order replacing background values with the explained
//! instance's values; each feature is credited with the score change it
//! causes. Marginals telescope, so the per-permutation credits sum to
//! `score(instance) - score(background row)` exactly, which makes the
//! efficiency identity checkable against the Monte-Carlo standard error.
//!
//! Permutation `k` always draws from substream `k` of the seed, so results
//! do not depend on the worker-thread count.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::numkit::{DenseMatrix, Scalar, SplitMix64};
use crate::parallel;
use crate::Real;

/// Training rows used as the replacement distribution.
pub const BACKGROUND_ROWS: usize = 50;

/// Substream reserved for background-row sampling.
const STREAM_BACKGROUND: u64 = u64::MAX;

/// Signed per-feature attributions for one explained instance.
///
/// `base_value` is the mean model score over the full background set;
/// `standard_errors[j]` estimates the Monte-Carlo error of feature `j`'s
/// value; `efficiency_standard_error` bounds the gap in the identity
/// `base_value + sum of values = score(instance)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub per_feature: Vec<(String, f64)>,
    pub standard_errors: Vec<f64>,
    pub base_value: f64,
    pub efficiency_standard_error: f64,
    pub n_permutations: usize,
    pub seed: u64,
}

impl AttributionResult {
    pub fn total(&self) -> f64 {
        self.per_feature.iter().map(|(_, v)| v).sum()
    }
}

/// One row of the global importance ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub mean_abs_shapley: f64,
    pub rank: usize,
}

/// Samples the background set from the training split.
pub fn background_rows(dataset: &Dataset, n: usize, seed: u64) -> Result<DenseMatrix<Real>> {
    if n == 0 {
        return Err(Error::Config("background set must be non-empty".to_owned()));
    }
    let train = &dataset.split.train;
    if train.is_empty() {
        return Err(Error::Config("train split is empty".to_owned()));
    }
    let mut order = train.clone();
    SplitMix64::substream(seed, STREAM_BACKGROUND).shuffle(&mut order);
    order.truncate(n);
    Ok(dataset.features_of(&order))
}

/// Monte-Carlo Shapley values for a single instance.
pub fn mc_shapley<S: Scalar>(
    model: &dyn Classifier<S>,
    instance: &[S],
    background: &DenseMatrix<S>,
    feature_names: &[String],
    n_permutations: usize,
    seed: u64,
) -> Result<AttributionResult> {
    let cols = model.n_features();
    if instance.len() != cols {
        return Err(Error::shape(
            "explained instance",
            format!("{cols} features"),
            format!("{} values", instance.len()),
        ));
    }
    if background.cols() != cols {
        return Err(Error::shape(
            "background set",
            format!("{cols} features"),
            format!("{} columns", background.cols()),
        ));
    }
    if background.is_empty() {
        return Err(Error::Config("background set must be non-empty".to_owned()));
    }
    if feature_names.len() != cols {
        return Err(Error::shape(
            "feature names",
            format!("{cols} features"),
            format!("{} names", feature_names.len()),
        ));
    }
    if n_permutations == 0 {
        return Err(Error::Config(
            "n_permutations must be at least 1".to_owned(),
        ));
    }

    let base_value = {
        let scores = model.predict_proba(background)?;
        mean(&scores.iter().map(|s| s.to_f64_lossy()).collect::<Vec<_>>())
    };

    // marginals[k][j]: score change caused by revealing feature j in
    // permutation k.
    let per_permutation: Vec<Result<Vec<f64>>> = parallel::map_indexed(n_permutations, |k| {
        let mut rng = SplitMix64::substream(seed, k as u64);
        let row = background.row(rng.next_index(background.rows()));
        let mut order: Vec<usize> = (0..cols).collect();
        rng.shuffle(&mut order);

        // Batch of cols+1 rows: the bare background row, then one row per
        // reveal step; consecutive score differences are the marginals.
        let mut walk = Vec::with_capacity((cols + 1) * cols);
        let mut current = row.to_vec();
        walk.extend_from_slice(&current);
        for &j in &order {
            current[j] = instance[j];
            walk.extend_from_slice(&current);
        }
        let scores = model.predict_proba(&DenseMatrix::from_vec(cols + 1, cols, walk)?)?;

        let mut marginals = vec![0.0; cols];
        for (step, &j) in order.iter().enumerate() {
            marginals[j] = (scores[step + 1] - scores[step]).to_f64_lossy();
        }
        Ok(marginals)
    });

    let mut collected = Vec::with_capacity(n_permutations);
    for m in per_permutation {
        collected.push(m?);
    }

    let k = n_permutations as f64;
    let mut values = vec![0.0; cols];
    for marginals in &collected {
        for (total, m) in values.iter_mut().zip(marginals) {
            *total += m;
        }
    }
    for v in &mut values {
        *v /= k;
    }

    let standard_errors = (0..cols)
        .map(|j| standard_error(collected.iter().map(|m| m[j]), values[j], k))
        .collect();
    let totals: Vec<f64> = collected.iter().map(|m| m.iter().sum()).collect();
    let efficiency_standard_error = standard_error(totals.iter().copied(), mean(&totals), k);

    Ok(AttributionResult {
        per_feature: feature_names
            .iter()
            .cloned()
            .zip(values)
            .collect(),
        standard_errors,
        base_value,
        efficiency_standard_error,
        n_permutations,
        seed,
    })
}

/// Mean absolute Shapley value per feature over the first `n_explained`
/// test rows, ranked descending. Ties keep the earlier feature first.
pub fn global_importance(
    model: &dyn Classifier<Real>,
    dataset: &Dataset,
    n_explained: usize,
    n_permutations: usize,
    seed: u64,
) -> Result<Vec<ImportanceRow>> {
    if n_explained == 0 {
        return Err(Error::Config("n_explained must be at least 1".to_owned()));
    }
    let (test_x, _) = dataset.test_xy();
    if n_explained > test_x.rows() {
        return Err(Error::Config(format!(
            "cannot explain {n_explained} rows, test split has {}",
            test_x.rows()
        )));
    }
    let background = background_rows(dataset, BACKGROUND_ROWS, seed)?;
    let names: Vec<String> = dataset.meta.iter().map(|m| m.name.clone()).collect();

    let mut sums = vec![0.0; names.len()];
    for r in 0..n_explained {
        let row_seed = SplitMix64::substream(seed, r as u64).next_u64();
        let result = mc_shapley(
            model,
            test_x.row(r),
            &background,
            &names,
            n_permutations,
            row_seed,
        )?;
        for (total, (_, v)) in sums.iter_mut().zip(&result.per_feature) {
            *total += v.abs();
        }
    }

    let mut rows: Vec<(usize, f64)> = sums
        .iter()
        .map(|s| s / n_explained as f64)
        .enumerate()
        .collect();
    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(position, (feature_idx, value))| ImportanceRow {
            feature: names[feature_idx].clone(),
            mean_abs_shapley: value,
            rank: position + 1,
        })
        .collect())
}

/// Renders the ranking as `feature,mean_abs_shapley,rank` rows.
pub fn importance_csv(rows: &[ImportanceRow]) -> String {
    let mut out = String::from("feature,mean_abs_shapley,rank\n");
    for row in rows {
        let _ = writeln!(out, "{},{},{}", row.feature, row.mean_abs_shapley, row.rank);
    }
    out
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean from a sample stream around `center`.
fn standard_error(samples: impl Iterator<Item = f64>, center: f64, k: f64) -> f64 {
    if k <= 1.0 {
        return 0.0;
    }
    let ss: f64 = samples.map(|s| (s - center) * (s - center)).sum();
    (ss / (k - 1.0)).sqrt() / k.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};
    use crate::models::{train_gbt, GbtConfig};

    /// Affine scorer; weights and inputs are chosen to keep scores inside
    /// [0,1] so it honors the classifier contract.
    struct LinearToy {
        w: Vec<f64>,
        b: f64,
    }

    impl Classifier<f64> for LinearToy {
        fn family(&self) -> &'static str {
            "linear_toy"
        }

        fn n_features(&self) -> usize {
            self.w.len()
        }

        fn predict_proba(&self, x: &DenseMatrix<f64>) -> Result<Vec<f64>> {
            Ok((0..x.rows())
                .map(|r| x.row(r).iter().zip(&self.w).map(|(v, w)| v * w).sum::<f64>() + self.b)
                .collect())
        }
    }

    struct ConstantToy {
        cols: usize,
    }

    impl Classifier<f64> for ConstantToy {
        fn family(&self) -> &'static str {
            "constant_toy"
        }

        fn n_features(&self) -> usize {
            self.cols
        }

        fn predict_proba(&self, x: &DenseMatrix<f64>) -> Result<Vec<f64>> {
            Ok(vec![0.4; x.rows()])
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|j| format!("f{j:02}")).collect()
    }

    #[test]
    fn linear_model_matches_the_closed_form() {
        // With a single background row the marginal of feature j is
        // w_j (x_j - mu_j) in every permutation, so the estimate is tight.
        let model = LinearToy {
            w: vec![0.3, -0.2, 0.1, 0.25],
            b: 0.5,
        };
        let background = DenseMatrix::from_vec(1, 4, vec![0.5, 0.4, 0.6, 0.5]).expect("matrix");
        let x = [0.9, 0.1, 0.6, 0.2];
        let result =
            mc_shapley(&model, &x, &background, &names(4), 2000, 3).expect("shapley");
        for (j, (name, value)) in result.per_feature.iter().enumerate() {
            let expected = model.w[j] * (x[j] - background.get(0, j));
            let tolerance = 0.05 * expected.abs().max(1e-12);
            assert!(
                (value - expected).abs() <= tolerance,
                "{name}: {value} vs closed form {expected}"
            );
        }
    }

    #[test]
    fn ignored_feature_is_a_null_player() {
        let model = LinearToy {
            w: vec![0.4, 0.0, -0.3],
            b: 0.5,
        };
        let background = DenseMatrix::from_vec(2, 3, vec![0.1, 0.9, 0.4, 0.8, 0.2, 0.6])
            .expect("matrix");
        let result = mc_shapley(&model, &[0.7, 0.3, 0.9], &background, &names(3), 400, 5)
            .expect("shapley");
        assert!(result.per_feature[1].1.abs() <= 0.01);
    }

    #[test]
    fn efficiency_identity_holds_within_three_standard_errors() {
        let ds = synth_generate(&SynthConfig {
            n_samples: 300,
            n_features: 5,
            class_separation: 2.0,
            fraud_fraction: 0.5,
            seed: 11,
        })
        .expect("synth");
        let model = train_gbt(
            &ds,
            &GbtConfig {
                n_trees: 10,
                ..Default::default()
            },
        )
        .expect("train");
        let background = background_rows(&ds, BACKGROUND_ROWS, 11).expect("background");
        let (test_x, _) = ds.test_xy();
        let names: Vec<String> = ds.meta.iter().map(|m| m.name.clone()).collect();

        for r in 0..5 {
            let result = mc_shapley(&model, test_x.row(r), &background, &names, 500, 17 + r as u64)
                .expect("shapley");
            let probe = DenseMatrix::from_vec(1, 5, test_x.row(r).to_vec()).expect("matrix");
            let score = model.predict_proba(&probe).expect("score")[0];
            let gap = (result.base_value + result.total() - score).abs();
            assert!(
                gap <= 3.0 * result.efficiency_standard_error + 1e-9,
                "row {r}: gap {gap} exceeds 3 SE {}",
                result.efficiency_standard_error
            );
        }
    }

    #[test]
    fn duplicated_features_share_importance() {
        // Both columns carry the same values, so exchangeability forces
        // equal attributions up to Monte-Carlo noise.
        let model = LinearToy {
            w: vec![0.25, 0.25, -0.1],
            b: 0.4,
        };
        let mut rng = SplitMix64::new(29);
        let mut rows = Vec::new();
        for _ in 0..20 {
            let a = rng.next_f64();
            let c = rng.next_f64();
            rows.push(vec![a, a, c]);
        }
        let background = DenseMatrix::from_rows(&rows).expect("matrix");
        let result = mc_shapley(&model, &[0.9, 0.9, 0.2], &background, &names(3), 800, 31)
            .expect("shapley");
        let (a, b) = (result.per_feature[0].1, result.per_feature[1].1);
        let spread = 2.0
            * (result.standard_errors[0].powi(2) + result.standard_errors[1].powi(2)).sqrt();
        assert!(
            (a - b).abs() <= spread.max(1e-9),
            "duplicated features diverged: {a} vs {b}, allowance {spread}"
        );
    }

    #[test]
    fn constant_model_attributes_nothing() {
        let model = ConstantToy { cols: 4 };
        let background =
            DenseMatrix::from_vec(2, 4, vec![0.1; 8]).expect("matrix");
        let result = mc_shapley(&model, &[0.9, 0.8, 0.7, 0.6], &background, &names(4), 50, 1)
            .expect("shapley");
        for (_, v) in &result.per_feature {
            assert_eq!(*v, 0.0);
        }
        assert_eq!(result.efficiency_standard_error, 0.0);
    }

    #[test]
    fn single_informative_feature_tops_the_ranking() {
        // Only feature 0 separates the classes; every other column is
        // symmetric noise, so it must dominate the ranking.
        let mut ds = synth_generate(&SynthConfig {
            n_samples: 300,
            n_features: 5,
            class_separation: 0.0,
            fraud_fraction: 0.5,
            seed: 43,
        })
        .expect("synth");
        for r in 0..ds.features.rows() {
            let value = 0.2 + 0.6 * f64::from(ds.labels[r]);
            ds.features.set(r, 0, value);
        }
        let model = train_gbt(
            &ds,
            &GbtConfig {
                n_trees: 8,
                ..Default::default()
            },
        )
        .expect("train");
        let ranking = global_importance(&model, &ds, 10, 200, 7).expect("ranking");
        assert_eq!(ranking[0].feature, "f00");
        assert_eq!(ranking[0].rank, 1);
        assert!(ranking[0].mean_abs_shapley > ranking[1].mean_abs_shapley);
    }

    #[test]
    fn rejects_malformed_inputs() {
        let model = LinearToy {
            w: vec![0.5, 0.5],
            b: 0.0,
        };
        let background = DenseMatrix::from_vec(1, 2, vec![0.5, 0.5]).expect("matrix");
        assert!(mc_shapley(&model, &[0.1], &background, &names(2), 10, 0).is_err());
        assert!(mc_shapley(&model, &[0.1, 0.2], &background, &names(3), 10, 0).is_err());
        assert!(mc_shapley(&model, &[0.1, 0.2], &background, &names(2), 0, 0).is_err());
        let wide = DenseMatrix::from_vec(1, 3, vec![0.5, 0.5, 0.5]).expect("matrix");
        assert!(mc_shapley(&model, &[0.1, 0.2], &wide, &names(2), 10, 0).is_err());
    }

    #[test]
    fn same_seed_reproduces_the_attribution() {
        let model = LinearToy {
            w: vec![0.3, -0.4],
            b: 0.55,
        };
        let background =
            DenseMatrix::from_vec(3, 2, vec![0.2, 0.3, 0.8, 0.7, 0.5, 0.5]).expect("matrix");
        let a = mc_shapley(&model, &[0.9, 0.1], &background, &names(2), 64, 9).expect("shapley");
        let b = mc_shapley(&model, &[0.9, 0.1], &background, &names(2), 64, 9).expect("shapley");
        assert_eq!(a, b);
    }

    #[test]
    fn importance_csv_is_stable() {
        let rows = vec![
            ImportanceRow {
                feature: "incident_severity".to_owned(),
                mean_abs_shapley: 0.25,
                rank: 1,
            },
            ImportanceRow {
                feature: "vehicle_claim".to_owned(),
                mean_abs_shapley: 0.125,
                rank: 2,
            },
        ];
        assert_eq!(
            importance_csv(&rows),
            "feature,mean_abs_shapley,rank\n\
             incident_severity,0.25,1\n\
             vehicle_claim,0.125,2\n"
        );
    }
}

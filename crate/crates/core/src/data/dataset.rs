use serde::{Deserialize, Serialize};

use crate::data::encode::{fit_encoding, transform, FeatureKind, FeatureMeta, TransformReport};
use crate::data::table::RawTable;
use crate::error::{Error, Result};
use crate::numkit::SplitMix64;
use crate::Matrix;

/// Row indices of the three evaluation splits, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// An encoded, normalized, split table ready for training.
///
/// Invariants: every feature value lies in [0,1]; labels are 0 or 1 with
/// 1 meaning fraud; the three split index sets are disjoint and together
/// cover every row exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub meta: Vec<FeatureMeta>,
    pub split: SplitIndices,
    pub warnings: Vec<String>,
}

impl Dataset {
    /// Splits on the raw labels, fits the encoding on the training rows
    /// only, then encodes the whole table.
    pub fn from_table(
        raw: &RawTable,
        kinds: &[FeatureKind],
        ratios: (f64, f64, f64),
        seed: u64,
    ) -> Result<(Self, TransformReport)> {
        let (split, warnings) = split_stratified(&raw.labels, ratios, seed)?;
        let meta = fit_encoding(raw, kinds, &split.train)?;
        let (features, report) = transform(raw, &meta)?;
        let dataset = Dataset {
            features,
            labels: raw.labels.clone(),
            meta,
            split,
            warnings,
        };
        Ok((dataset, report))
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features_of(&self, indices: &[usize]) -> Matrix {
        self.features.select_rows(indices)
    }

    pub fn labels_of(&self, indices: &[usize]) -> Vec<u8> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn train_xy(&self) -> (Matrix, Vec<u8>) {
        (
            self.features_of(&self.split.train),
            self.labels_of(&self.split.train),
        )
    }

    pub fn val_xy(&self) -> (Matrix, Vec<u8>) {
        (
            self.features_of(&self.split.val),
            self.labels_of(&self.split.val),
        )
    }

    pub fn test_xy(&self) -> (Matrix, Vec<u8>) {
        (
            self.features_of(&self.split.test),
            self.labels_of(&self.split.test),
        )
    }
}

/// Assigns every row to train, validation, or test, stratified by label.
///
/// Split totals are floor(n * ratio) for validation and test with the
/// remainder going to train; within each total, class quotas follow the
/// largest-remainder rule so each split matches the overall class balance
/// to within one row. A split left without any row of a present class is
/// reported as a warning, not an error.
pub fn split_stratified(
    labels: &[u8],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(SplitIndices, Vec<String>)> {
    let (r_train, r_val, r_test) = ratios;
    if !(r_train >= 0.0 && r_val >= 0.0 && r_test >= 0.0) {
        return Err(Error::Config(format!("split ratios must be non-negative, got {ratios:?}")));
    }
    if ((r_train + r_val + r_test) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios must sum to 1, got {ratios:?}")));
    }
    if labels.is_empty() {
        return Err(Error::Config("cannot split an empty dataset".to_owned()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::Config(format!("labels must be 0 or 1, got {bad}")));
    }

    let n = labels.len();
    let n_val = ((n as f64) * r_val + 1e-9).floor() as usize;
    let n_test = ((n as f64) * r_test + 1e-9).floor() as usize;

    let mut class_rows: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        class_rows[y as usize].push(i);
    }
    for (c, rows) in class_rows.iter_mut().enumerate() {
        SplitMix64::substream(seed, c as u64).shuffle(rows);
    }

    let counts = [class_rows[0].len(), class_rows[1].len()];
    let mut caps = counts;
    let val_quota = apportion(&counts, &mut caps, n_val, n);
    let test_quota = apportion(&counts, &mut caps, n_test, n);

    let mut split = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (c, rows) in class_rows.iter().enumerate() {
        let (val_part, rest) = rows.split_at(val_quota[c]);
        let (test_part, train_part) = rest.split_at(test_quota[c]);
        split.val.extend_from_slice(val_part);
        split.test.extend_from_slice(test_part);
        split.train.extend_from_slice(train_part);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();

    let mut warnings = Vec::new();
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            warnings.push(format!("dataset contains no rows of class {c}"));
        }
    }
    let names = ["train", "validation", "test"];
    let members = [&split.train, &split.val, &split.test];
    for (name, rows) in names.iter().zip(members) {
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 && !rows.iter().any(|&i| labels[i] as usize == c) {
                warnings.push(format!("{name} split contains no rows of class {c}"));
            }
        }
    }

    Ok((split, warnings))
}

/// Largest-remainder apportionment of `quota` rows across classes, capped
/// by the per-class capacity left in `caps`. Ties break toward the lower
/// class index; `caps` is reduced by what was taken.
fn apportion(counts: &[usize; 2], caps: &mut [usize; 2], quota: usize, n: usize) -> [usize; 2] {
    let mut alloc = [0usize; 2];
    for c in 0..2 {
        alloc[c] = (quota * counts[c] / n).min(caps[c]);
    }
    let mut leftover = quota - alloc[0] - alloc[1];
    let mut order = [0usize, 1];
    order.sort_by_key(|&c| (std::cmp::Reverse(quota * counts[c] % n), c));
    while leftover > 0 {
        let mut progressed = false;
        for &c in &order {
            if leftover > 0 && alloc[c] < caps[c] {
                alloc[c] += 1;
                leftover -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    for c in 0..2 {
        caps[c] -= alloc[c];
    }
    alloc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n0: usize, n1: usize) -> Vec<u8> {
        let mut labels = vec![0u8; n0];
        labels.extend(std::iter::repeat(1).take(n1));
        labels
    }

    const DEFAULT_RATIOS: (f64, f64, f64) = (0.75, 0.05, 0.20);

    #[test]
    fn thousand_rows_split_750_50_200() {
        let (split, warnings) =
            split_stratified(&labels(750, 250), DEFAULT_RATIOS, 7).expect("split");
        assert_eq!(split.train.len(), 750);
        assert_eq!(split.val.len(), 50);
        assert_eq!(split.test.len(), 200);
        assert!(warnings.is_empty(), "unexpected warnings: {warnings:?}");
    }

    #[test]
    fn ten_rows_floor_to_8_0_2_with_warning() {
        let (split, warnings) = split_stratified(&labels(5, 5), DEFAULT_RATIOS, 7).expect("split");
        assert_eq!(split.train.len(), 8);
        assert_eq!(split.val.len(), 0);
        assert_eq!(split.test.len(), 2);
        assert!(
            warnings.iter().any(|w| w.contains("validation")),
            "expected an empty-validation warning, got {warnings:?}"
        );
    }

    #[test]
    fn same_seed_reproduces_the_split() {
        let labels = labels(40, 20);
        let (a, _) = split_stratified(&labels, DEFAULT_RATIOS, 11).expect("split");
        let (b, _) = split_stratified(&labels, DEFAULT_RATIOS, 11).expect("split");
        assert_eq!(a, b);
        let (c, _) = split_stratified(&labels, DEFAULT_RATIOS, 12).expect("split");
        assert_ne!(a, c, "a different seed should shuffle differently");
    }

    #[test]
    fn bad_ratios_are_rejected() {
        let err = split_stratified(&labels(5, 5), (0.5, 0.5, 0.5), 0).unwrap_err();
        assert!(err.to_string().contains("sum to 1"), "got: {err}");
    }

    proptest! {
        #[test]
        fn splits_are_disjoint_exhaustive_and_stratified(
            n0 in 1usize..120,
            n1 in 1usize..120,
            seed in 0u64..1000,
        ) {
            let labels = labels(n0, n1);
            let n = labels.len();
            let (split, _) = split_stratified(&labels, DEFAULT_RATIOS, seed).unwrap();

            let mut seen = vec![0u32; n];
            for part in [&split.train, &split.val, &split.test] {
                for &i in part.iter() {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1), "rows must appear exactly once");

            // Each split holds s*c/n rows of class c to within one row,
            // checked in integers: |count*n - s*c| <= n.
            for part in [&split.train, &split.val, &split.test] {
                let s = part.len();
                for class in 0..2u8 {
                    let c = labels.iter().filter(|&&y| y == class).count();
                    let count = part.iter().filter(|&&i| labels[i] == class).count();
                    let lhs = (count * n) as i64;
                    let target = (s * c) as i64;
                    prop_assert!(
                        (lhs - target).abs() <= n as i64,
                        "class {class}: {count} of {s} rows vs target {target}/{n}"
                    );
                }
            }
        }
    }
}

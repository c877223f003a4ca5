use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::data::table::RawTable;
use crate::Matrix;

/// Declared or inferred column type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// Fitted per-feature statistics.
///
/// Numeric columns carry min-max bounds and the fit-split median used for
/// imputation. Categorical columns carry their lexicographically sorted
/// category list; a category's code is its index in that list, and the code
/// one past the end is reserved for values unseen at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureEncoding {
    Numeric { min: f64, max: f64, impute: f64 },
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub encoding: FeatureEncoding,
}

impl FeatureMeta {
    pub fn kind(&self) -> FeatureKind {
        match self.encoding {
            FeatureEncoding::Numeric { .. } => FeatureKind::Numeric,
            FeatureEncoding::Categorical { .. } => FeatureKind::Categorical,
        }
    }

    /// Maps an encoded [0,1] value back to a displayable cell. Numeric
    /// values land on the original scale; categorical values recover the
    /// category string, or "unknown" for the reserved code.
    pub fn decode(&self, value: f64) -> String {
        match &self.encoding {
            FeatureEncoding::Numeric { min, max, .. } => {
                let raw = min + value.clamp(0.0, 1.0) * (max - min);
                format!("{raw}")
            }
            FeatureEncoding::Categorical { categories } => {
                let code = (value * categories.len() as f64).round() as usize;
                match categories.get(code) {
                    Some(cat) => cat.clone(),
                    None => "unknown".to_owned(),
                }
            }
        }
    }
}

/// Counts of the cell-level repairs applied while encoding a table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformReport {
    /// Categorical cells whose value was never seen at fit time.
    pub unknown_category_cells: usize,
    /// Numeric cells outside the fitted range, clipped to [0,1].
    pub clipped_cells: usize,
    /// Missing cells filled with the median or the unknown code.
    pub imputed_cells: usize,
}

/// Calls a column numeric when every observed cell parses as a float,
/// categorical otherwise. All-missing columns default to categorical and
/// are rejected later by [`fit_encoding`].
pub fn infer_kinds(raw: &RawTable) -> Vec<FeatureKind> {
    (0..raw.n_features())
        .map(|j| {
            let mut saw_value = false;
            for row in &raw.cells {
                if let Some(cell) = &row[j] {
                    saw_value = true;
                    if cell.parse::<f64>().is_err() {
                        return FeatureKind::Categorical;
                    }
                }
            }
            if saw_value {
                FeatureKind::Numeric
            } else {
                FeatureKind::Categorical
            }
        })
        .collect()
}

/// Fits one [`FeatureMeta`] per column from `fit_rows` only, so statistics
/// never leak from held-out rows.
pub fn fit_encoding(
    raw: &RawTable,
    kinds: &[FeatureKind],
    fit_rows: &[usize],
) -> Result<Vec<FeatureMeta>> {
    if kinds.len() != raw.n_features() {
        return Err(Error::shape(
            "fit_encoding kinds",
            format!("{} kinds", kinds.len()),
            format!("{} columns", raw.n_features()),
        ));
    }
    let mut meta = Vec::with_capacity(kinds.len());
    for (j, kind) in kinds.iter().enumerate() {
        let name = raw.feature_names[j].clone();
        let observed: Vec<&str> = fit_rows
            .iter()
            .filter_map(|&i| raw.cells[i][j].as_deref())
            .collect();
        if observed.is_empty() {
            return Err(Error::Schema(format!(
                "column {name:?} has no observed values in the fit rows"
            )));
        }
        let encoding = match kind {
            FeatureKind::Numeric => {
                let mut values = Vec::with_capacity(observed.len());
                for &i in fit_rows {
                    if let Some(cell) = raw.cells[i][j].as_deref() {
                        values.push(parse_numeric(cell, i, &name)?);
                    }
                }
                values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
                let min = values[0];
                let max = values[values.len() - 1];
                FeatureEncoding::Numeric {
                    min,
                    max,
                    impute: median_of_sorted(&values),
                }
            }
            FeatureKind::Categorical => {
                let mut categories: Vec<String> =
                    observed.iter().map(|&s| s.to_owned()).collect();
                categories.sort_unstable();
                categories.dedup();
                FeatureEncoding::Categorical { categories }
            }
        };
        meta.push(FeatureMeta { name, encoding });
    }
    Ok(meta)
}

/// Encodes every row of `raw` into a [0,1] feature matrix under a fitted
/// schema, applying the repair rules counted in [`TransformReport`].
pub fn transform(raw: &RawTable, meta: &[FeatureMeta]) -> Result<(Matrix, TransformReport)> {
    if meta.len() != raw.n_features() {
        return Err(Error::shape(
            "transform schema",
            format!("{} features", meta.len()),
            format!("{} columns", raw.n_features()),
        ));
    }
    let mut report = TransformReport::default();
    let mut data = Vec::with_capacity(raw.n_rows() * meta.len());
    for (i, row) in raw.cells.iter().enumerate() {
        for (j, m) in meta.iter().enumerate() {
            data.push(encode_cell(row[j].as_deref(), m, i, &mut report)?);
        }
    }
    let matrix = Matrix::from_vec(raw.n_rows(), meta.len(), data)?;
    Ok((matrix, report))
}

fn encode_cell(
    cell: Option<&str>,
    meta: &FeatureMeta,
    row: usize,
    report: &mut TransformReport,
) -> Result<f64> {
    match &meta.encoding {
        FeatureEncoding::Numeric { min, max, impute } => {
            let raw = match cell {
                Some(text) => parse_numeric(text, row, &meta.name)?,
                None => {
                    report.imputed_cells += 1;
                    *impute
                }
            };
            let scaled = if max > min {
                (raw - min) / (max - min)
            } else {
                0.0
            };
            if scaled < 0.0 {
                report.clipped_cells += 1;
                Ok(0.0)
            } else if scaled > 1.0 {
                report.clipped_cells += 1;
                Ok(1.0)
            } else {
                Ok(scaled)
            }
        }
        FeatureEncoding::Categorical { categories } => {
            let code = match cell {
                Some(text) => match categories.binary_search_by(|c| c.as_str().cmp(text)) {
                    Ok(code) => code,
                    Err(_) => {
                        report.unknown_category_cells += 1;
                        categories.len()
                    }
                },
                None => {
                    report.imputed_cells += 1;
                    categories.len()
                }
            };
            Ok(code as f64 / categories.len() as f64)
        }
    }
}

fn parse_numeric(text: &str, row: usize, column: &str) -> Result<f64> {
    let value: f64 = text.parse().map_err(|_| Error::Ingestion {
        row: row + 2,
        message: format!("column {column:?}: {text:?} is not numeric"),
    })?;
    if !value.is_finite() {
        return Err(Error::Ingestion {
            row: row + 2,
            message: format!("column {column:?}: non-finite value {text:?}"),
        });
    }
    Ok(value)
}

fn median_of_sorted(values: &[f64]) -> f64 {
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

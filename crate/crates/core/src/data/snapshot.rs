use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::dataset::{Dataset, SplitIndices};
use crate::data::encode::FeatureMeta;
use crate::error::{Error, Result};
use crate::Matrix;

/// Self-describing on-disk form of a prepared dataset.
///
/// Everything downstream (training, attacks, reports) starts from this file
/// rather than re-ingesting the CSV, so a run is reproducible from the
/// snapshot alone. Serialization is field-ordered and the feature payload
/// is written row by row, which makes the bytes, and therefore the content
/// hash, a deterministic function of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seed: u64,
    pub label_column: String,
    pub schema: Vec<FeatureMeta>,
    pub split: SplitIndices,
    pub labels: Vec<u8>,
    pub feature_rows: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl Snapshot {
    pub fn from_dataset(dataset: &Dataset, seed: u64, label_column: &str) -> Self {
        let feature_rows = (0..dataset.n_rows())
            .map(|i| dataset.features.row(i).to_vec())
            .collect();
        Snapshot {
            seed,
            label_column: label_column.to_owned(),
            schema: dataset.meta.clone(),
            split: dataset.split.clone(),
            labels: dataset.labels.clone(),
            feature_rows,
            warnings: dataset.warnings.clone(),
        }
    }

    pub fn into_dataset(self) -> Result<Dataset> {
        let rows = self.feature_rows.len();
        let cols = self.schema.len();
        let mut data = Vec::with_capacity(rows * cols);
        for row in &self.feature_rows {
            if row.len() != cols {
                return Err(Error::shape(
                    "snapshot feature row",
                    format!("{} values", row.len()),
                    format!("{cols} schema columns"),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Dataset {
            features: Matrix::from_vec(rows, cols, data)?,
            labels: self.labels,
            meta: self.schema,
            split: self.split,
            warnings: self.warnings,
        })
    }
}

/// Writes the snapshot and returns the hex SHA-256 of the exact bytes
/// written. Models store this hash so stale pairings are caught at load.
pub fn save_snapshot(path: impl AsRef<Path>, snapshot: &Snapshot) -> Result<String> {
    let path = path.as_ref();
    let bytes = serde_json::to_vec_pretty(snapshot)?;
    std::fs::write(path, &bytes).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(hex_sha256(&bytes))
}

/// Reads a snapshot back along with the hash of the bytes on disk.
pub fn load_snapshot(path: impl AsRef<Path>) -> Result<(Snapshot, String)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let snapshot = serde_json::from_slice(&bytes)?;
    Ok((snapshot, hex_sha256(&bytes)))
}

fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{check_width, Classifier};
use crate::numkit::{DenseMatrix, Scalar};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 5 }
    }
}

/// Nearest-neighbour detector over the stored train split.
///
/// `k` is forced odd so a majority always exists; the score is the
/// fraction of fraud votes among the k nearest rows by Euclidean
/// distance. Equidistant rows rank by train index, which keeps scoring
/// deterministic even on grids of repeated points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel<S: Scalar> {
    pub train_features: DenseMatrix<S>,
    pub train_labels: Vec<u8>,
    pub k: usize,
}

impl<S: Scalar> KnnModel<S> {
    fn fraud_votes(&self, query: &[S]) -> usize {
        let n = self.train_features.rows();
        let mut order: Vec<(S, usize)> = (0..n)
            .map(|i| (squared_distance(self.train_features.row(i), query), i))
            .collect();
        order.sort_unstable_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("finite distance")
                .then(a.1.cmp(&b.1))
        });
        order[..self.k]
            .iter()
            .filter(|&&(_, i)| self.train_labels[i] == 1)
            .count()
    }
}

fn squared_distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

impl<S: Scalar> Classifier<S> for KnnModel<S> {
    fn family(&self) -> &'static str {
        "knn"
    }

    fn n_features(&self) -> usize {
        self.train_features.cols()
    }

    fn predict_proba(&self, x: &DenseMatrix<S>) -> Result<Vec<S>> {
        check_width("knn", self.n_features(), x)?;
        let k = S::from_f64_lossy(self.k as f64);
        Ok((0..x.rows())
            .map(|r| S::from_f64_lossy(self.fraud_votes(x.row(r)) as f64) / k)
            .collect())
    }
}

/// Stores the train split verbatim after validating `k`.
pub fn train_knn(dataset: &Dataset, cfg: &KnnConfig) -> Result<KnnModel<Real>> {
    let (x, y) = dataset.train_xy();
    if cfg.k == 0 || cfg.k % 2 == 0 {
        return Err(Error::Config(format!(
            "k must be odd so votes cannot tie, got {}",
            cfg.k
        )));
    }
    if cfg.k > x.rows() {
        return Err(Error::Config(format!(
            "k = {} exceeds the {} train rows",
            cfg.k,
            x.rows()
        )));
    }
    Ok(KnnModel {
        train_features: x,
        train_labels: y,
        k: cfg.k,
    })
}

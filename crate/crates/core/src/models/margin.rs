use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{check_width, Classifier};
use crate::numkit::{sigmoid, DenseMatrix, Scalar, SplitMix64};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginConfig {
    /// Hinge/regularization trade-off; the L2 weight is its inverse.
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for MarginConfig {
    /// Min-max scaled features keep row norms near 1, so unit margins are
    /// only reachable with a weak L2 pull; the default trade-off reflects
    /// that scale.
    fn default() -> Self {
        MarginConfig {
            c: 25.0,
            epochs: 100,
            learning_rate: 0.05,
        }
    }
}

/// Maximum-margin linear detector trained in the primal.
///
/// The decision score is affine, `w . x + b`; the reported probability is
/// its sigmoid so every family thresholds identically at 0.5 (the sigmoid
/// is monotone, so label decisions equal the sign rule, with 0 mapping
/// to the legitimate class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginModel<S: Scalar> {
    pub w: Vec<S>,
    pub b: S,
    pub c: f64,
}

impl<S: Scalar> MarginModel<S> {
    fn decision(&self, row: &[S]) -> S {
        row.iter()
            .zip(&self.w)
            .fold(self.b, |acc, (&x, &w)| acc + x * w)
    }
}

impl<S: Scalar> Classifier<S> for MarginModel<S> {
    fn family(&self) -> &'static str {
        "margin"
    }

    fn n_features(&self) -> usize {
        self.w.len()
    }

    fn predict_proba(&self, x: &DenseMatrix<S>) -> Result<Vec<S>> {
        check_width("margin", self.w.len(), x)?;
        Ok((0..x.rows())
            .map(|r| sigmoid(self.decision(x.row(r))))
            .collect())
    }
}

/// Hinge-loss subgradient descent with L2 regularization, one row per
/// step in a reshuffled epoch order.
///
/// Each row's hinge pull is scaled so both classes exert the same
/// aggregate force regardless of the class ratio; otherwise an imbalanced
/// split parks the boundary inside the minority class. The returned
/// parameters are the average over all iterates, which is where
/// subgradient descent converges; the last iterate keeps oscillating at
/// any fixed step size.
pub fn train_margin(
    dataset: &Dataset,
    cfg: &MarginConfig,
    seed: u64,
) -> Result<MarginModel<Real>> {
    if !(cfg.c > 0.0 && cfg.c.is_finite()) {
        return Err(Error::Config(format!("c must be positive, got {}", cfg.c)));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::Config(format!(
            "learning_rate must be positive, got {}",
            cfg.learning_rate
        )));
    }

    let (x, y) = dataset.train_xy();
    if y.iter().all(|&v| v == 0) || y.iter().all(|&v| v == 1) {
        return Err(Error::Training(
            "train split contains a single class".to_owned(),
        ));
    }

    let n = y.len() as f64;
    let n_fraud = y.iter().filter(|&&v| v == 1).count() as f64;
    let weight_fraud = n / (2.0 * n_fraud);
    let weight_legit = n / (2.0 * (n - n_fraud));

    let lambda = 1.0 / cfg.c;
    let lr = cfg.learning_rate;
    let mut model = MarginModel {
        w: vec![0.0; x.cols()],
        b: 0.0,
        c: cfg.c,
    };
    let mut w_sum = vec![0.0; x.cols()];
    let mut b_sum = 0.0;
    let mut steps = 0.0;
    let mut rng = SplitMix64::substream(seed, 0);
    let mut order: Vec<usize> = (0..x.rows()).collect();

    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let row = x.row(i);
            let sign = if y[i] == 1 { 1.0 } else { -1.0 };
            let class_weight = if y[i] == 1 {
                weight_fraud
            } else {
                weight_legit
            };
            let margin = sign * model.decision(row);
            // Subgradient of lambda/2 |w|^2 + weighted hinge on this row;
            // the bias is unregularized.
            let hinge_active = margin < 1.0;
            for (w, &v) in model.w.iter_mut().zip(row) {
                let pull = if hinge_active {
                    class_weight * sign * v
                } else {
                    0.0
                };
                *w -= lr * (lambda * *w - pull);
            }
            if hinge_active {
                model.b += lr * class_weight * sign;
            }
            for (s, w) in w_sum.iter_mut().zip(&model.w) {
                *s += *w;
            }
            b_sum += model.b;
            steps += 1.0;
        }
    }
    model.w = w_sum.iter().map(|s| s / steps).collect();
    model.b = b_sum / steps;
    Ok(model)
}

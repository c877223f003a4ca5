use serde::{Deserialize, Serialize};

use crate::data::dataset::{split_stratified, Dataset};
use crate::data::encode::{FeatureEncoding, FeatureMeta};
use crate::error::{Error, Result};
use crate::numkit::SplitMix64;
use crate::Matrix;

/// Per-feature noise scale of the synthetic clusters. With centers placed
/// `class_separation` of these apart along the cluster axis, the best
/// achievable accuracy is a known Gaussian tail, e.g. about 0.977 at
/// separation 2 and 0.5 at separation 0.
const NOISE_SIGMA: f64 = 0.1;

/// Substream indices so feature generation and splitting draw from
/// unrelated deterministic sequences.
const STREAM_DIRECTION: u64 = 0;
const STREAM_FEATURES: u64 = 1;
const STREAM_SPLIT: u64 = 2;

/// Recipe for a two-cluster stand-in dataset with a tunable difficulty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_features: usize,
    /// Distance between class centers in units of the noise scale.
    pub class_separation: f64,
    pub fraud_fraction: f64,
    pub seed: u64,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_samples < 10 {
            return Err(Error::Config(format!(
                "n_samples must be at least 10, got {}",
                self.n_samples
            )));
        }
        if self.n_features < 2 {
            return Err(Error::Config(format!(
                "n_features must be at least 2, got {}",
                self.n_features
            )));
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return Err(Error::Config(format!(
                "class_separation must be a finite non-negative value, got {}",
                self.class_separation
            )));
        }
        if !(self.fraud_fraction > 0.0 && self.fraud_fraction < 1.0) {
            return Err(Error::Config(format!(
                "fraud_fraction must lie strictly between 0 and 1, got {}",
                self.fraud_fraction
            )));
        }
        Ok(())
    }
}

/// Draws two Gaussian clusters around 0.5 whose centers sit
/// `class_separation * NOISE_SIGMA` away on each side along a random unit
/// direction, clips every value to [0,1], and splits 75/5/20.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let n = cfg.n_samples;
    let f = cfg.n_features;

    let mut dir_rng = SplitMix64::substream(cfg.seed, STREAM_DIRECTION);
    let direction = random_unit_vector(&mut dir_rng, f);

    let n_fraud = ((n as f64 * cfg.fraud_fraction).round() as usize).clamp(1, n - 1);
    let mut labels = vec![0u8; n - n_fraud];
    labels.extend(std::iter::repeat(1).take(n_fraud));

    let offset = cfg.class_separation * NOISE_SIGMA;
    let mut feat_rng = SplitMix64::substream(cfg.seed, STREAM_FEATURES);
    let mut data = Vec::with_capacity(n * f);
    for &label in &labels {
        let sign = if label == 1 { 1.0 } else { -1.0 };
        for &d in direction.iter() {
            let center = 0.5 + sign * offset * d;
            let value = center + NOISE_SIGMA * feat_rng.next_normal();
            data.push(value.clamp(0.0, 1.0));
        }
    }
    let features = Matrix::from_vec(n, f, data)?;

    let meta = (0..f)
        .map(|j| FeatureMeta {
            name: format!("f{j:02}"),
            encoding: FeatureEncoding::Numeric {
                min: 0.0,
                max: 1.0,
                impute: 0.5,
            },
        })
        .collect();

    let (split, warnings) = split_stratified(
        &labels,
        (0.75, 0.05, 0.20),
        SplitMix64::substream(cfg.seed, STREAM_SPLIT).next_u64(),
    )?;

    Ok(Dataset {
        features,
        labels,
        meta,
        split,
        warnings,
    })
}

fn random_unit_vector(rng: &mut SplitMix64, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.next_normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

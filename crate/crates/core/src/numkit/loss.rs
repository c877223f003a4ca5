use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Log-argument clamp for binary cross-entropy. Probabilities are pinned to
/// `[BCE_CLAMP, 1 - BCE_CLAMP]` before the log so saturated predictions never
/// produce infinities.
pub const BCE_CLAMP: f64 = 1e-7;

/// Binary cross-entropy over a batch, with its gradient w.r.t. the
/// probabilities.
///
/// `L = -mean(y*ln(p) + (1-y)*ln(1-p))`, `dL/dp_i = -(y_i/p_i - (1-y_i)/(1-p_i)) / n`.
pub fn bce_loss<S: Scalar>(probs: &[S], labels: &[S]) -> Result<(S, Vec<S>)> {
    if probs.len() != labels.len() {
        return Err(Error::shape(
            "bce_loss",
            format!("{} probabilities", probs.len()),
            format!("{} labels", labels.len()),
        ));
    }
    if probs.is_empty() {
        return Err(Error::Config("bce_loss on an empty batch".into()));
    }
    let clamp_lo = S::from_f64_lossy(BCE_CLAMP);
    let clamp_hi = S::one() - clamp_lo;
    let n = S::from_f64_lossy(probs.len() as f64);
    let mut loss = S::zero();
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        let p = p.max(clamp_lo).min(clamp_hi);
        loss = loss - (y * p.ln() + (S::one() - y) * (S::one() - p).ln());
        grad.push(-(y / p - (S::one() - y) / (S::one() - p)) / n);
    }
    loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::NonFinite("bce_loss".into()));
    }
    Ok((loss, grad))
}

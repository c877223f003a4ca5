//! Signed-gradient evasion attacks.
//!
//! All three entry points share one iteration core, so the documented
//! degeneracies hold bit-exactly: a single step of size epsilon equals the
//! one-shot attack, and projected descent without a random start equals
//! the iterated attack.

use crate::attacks::{
    assemble_outcome, check_attack_inputs, clamp_interval, clamp_unit, step_sign, AttackConfig,
    AttackOutcome,
};
use crate::error::Result;
use crate::models::Classifier;
use crate::numkit::{DenseMatrix, Scalar, SplitMix64};

/// Substream index reserved for the projected-descent random start.
const STREAM_RANDOM_START: u64 = 0;

/// One signed step of the full budget: x' = clamp(x + eps * sign(grad)).
pub fn fgsm<S: Scalar>(
    model: &dyn Classifier<S>,
    x: &DenseMatrix<S>,
    y: &[u8],
    cfg: &AttackConfig,
) -> Result<AttackOutcome<S>> {
    cfg.validate_common()?;
    iterate_signed(model, x, y, "fgsm", cfg.epsilon, 1, cfg.epsilon, None)
}

/// Iterated signed steps, each projected back into the epsilon ball.
pub fn bim<S: Scalar>(
    model: &dyn Classifier<S>,
    x: &DenseMatrix<S>,
    y: &[u8],
    cfg: &AttackConfig,
) -> Result<AttackOutcome<S>> {
    cfg.validate_iterative()?;
    iterate_signed(
        model,
        x,
        y,
        "bim",
        cfg.epsilon,
        cfg.steps,
        cfg.resolved_step_size(),
        None,
    )
}

/// Projected descent: as [`bim`], plus an optional uniform start inside
/// the epsilon ball.
pub fn pgd<S: Scalar>(
    model: &dyn Classifier<S>,
    x: &DenseMatrix<S>,
    y: &[u8],
    cfg: &AttackConfig,
) -> Result<AttackOutcome<S>> {
    cfg.validate_iterative()?;
    let start = cfg
        .random_start
        .then(|| SplitMix64::substream(cfg.seed, STREAM_RANDOM_START));
    iterate_signed(
        model,
        x,
        y,
        "pgd",
        cfg.epsilon,
        cfg.steps,
        cfg.resolved_step_size(),
        start,
    )
}

/// Shared ascent loop on the batch BCE loss.
///
/// Each iteration recomputes the input gradient at the current iterate,
/// moves every coordinate by `step_size` in the sign direction, projects
/// back into the epsilon ball around the clean batch, and clamps to the
/// unit cube. Coordinates with zero gradient stay put.
#[allow(clippy::too_many_arguments)]
fn iterate_signed<S: Scalar>(
    model: &dyn Classifier<S>,
    x: &DenseMatrix<S>,
    y: &[u8],
    attack_name: &'static str,
    epsilon: f64,
    steps: usize,
    step_size: f64,
    random_start: Option<SplitMix64>,
) -> Result<AttackOutcome<S>> {
    check_attack_inputs(model, x, y)?;
    let eps = S::from_f64_lossy(epsilon);
    let step = S::from_f64_lossy(step_size);

    let mut adversarial = x.clone();
    if let Some(mut rng) = random_start {
        for (a, &c) in adversarial.data_mut().iter_mut().zip(x.data()) {
            let jitter = S::from_f64_lossy(rng.next_range(-epsilon, epsilon));
            *a = clamp_unit(clamp_interval(c + jitter, c - eps, c + eps));
        }
    }
    for _ in 0..steps {
        let grad = model.input_gradient(&adversarial, y)?;
        for ((a, &c), &g) in adversarial
            .data_mut()
            .iter_mut()
            .zip(x.data())
            .zip(grad.data())
        {
            let moved = *a + step * step_sign(g);
            *a = clamp_unit(clamp_interval(moved, c - eps, c + eps));
        }
    }
    assemble_outcome(model, attack_name, x, y, adversarial, epsilon)
}

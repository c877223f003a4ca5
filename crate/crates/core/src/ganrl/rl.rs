//! Surrogate-guided latent refinement.
//!
//! Each episode walks a latent batch for a fixed horizon: decode, score
//! through the [`SurrogateHandle`], reward the fraction of rows the scorer
//! labels as the target class, and nudge the latents with reward-scaled
//! Gaussian noise. The step is
//!
//! `z_{t+1} = z_t + alpha * delta_t * gamma^t * N(0, I)`
//!
//! where `delta_t` is the step reward minus the running mean of rewards so
//! far, so `delta_0 = 0` and every `delta_t` stays inside [-1, 1]. At the
//! end of an episode the generator itself takes one Adam step against the
//! binary cross-entropy between the surrogate's scores on the final batch
//! and the target label: through analytic gradients when the surrogate
//! exposes them, otherwise through an antithetic Gaussian parameter-
//! perturbation estimate built from surrogate scores alone. Either way the
//! target is reached only through the handle, so its query counter accounts
//! for the full information flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::labels_from_scores;
use crate::numkit::{bce_loss, AdamState, DenseMatrix, Scalar, SplitMix64};

use super::gan::GeneratorNet;
use super::surrogate::SurrogateHandle;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    /// Rows per latent batch.
    pub batch: usize,
    /// Latent steps per episode.
    pub horizon: usize,
    /// Latent width; must match the generator it refines.
    pub latent_width: usize,
    /// Latent step size.
    pub alpha: f64,
    /// Per-step decay of the latent step, in (0, 1].
    pub gamma: f64,
    pub episodes: usize,
    /// Class the generated rows should be scored as; 0 is "legitimate".
    pub y_target: u8,
    pub generator_lr: f64,
    /// Perturbation pairs per score-only generator update.
    pub es_samples: usize,
    /// Parameter perturbation scale for the score-only update.
    pub es_sigma: f64,
    pub seed: u64,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            batch: 32,
            horizon: 16,
            latent_width: 64,
            alpha: 0.1,
            gamma: 0.99,
            episodes: 200,
            y_target: 0,
            generator_lr: 1e-3,
            es_samples: 16,
            es_sigma: 0.02,
            seed: 0,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.horizon == 0 || self.latent_width == 0 {
            return Err(Error::Config(
                "batch, horizon, and latent_width must all be positive".into(),
            ));
        }
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.y_target > 1 {
            return Err(Error::Config(format!(
                "y_target must be 0 or 1, got {}",
                self.y_target
            )));
        }
        if !(self.generator_lr > 0.0 && self.generator_lr.is_finite()) {
            return Err(Error::Config(format!(
                "generator_lr must be positive and finite, got {}",
                self.generator_lr
            )));
        }
        if self.es_samples == 0 {
            return Err(Error::Config("es_samples must be positive".into()));
        }
        if !(self.es_sigma > 0.0 && self.es_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "es_sigma must be positive and finite, got {}",
                self.es_sigma
            )));
        }
        Ok(())
    }
}

/// How each episode obtains its starting latents.
#[derive(Debug, Clone)]
pub enum LatentInit<S: Scalar> {
    /// Fresh standard-normal draw per episode.
    Gaussian,
    /// Fixed starting latents, one row per batch row. Pair with
    /// [`nearest_record_latents`] to anchor generated rows near real ones.
    Anchored(DenseMatrix<S>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub t: usize,
    /// Fraction of the batch the surrogate labeled as the target class.
    pub reward: f64,
    /// Reward minus the running mean of rewards so far this episode.
    pub td_error: f64,
    pub mean_score: f64,
    /// Cumulative surrogate queries after this step's scoring.
    pub queries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode: usize,
    pub steps: Vec<EpisodeStep>,
    /// Cross-entropy against the target label at the episode's final
    /// latents, measured before the generator update that episode.
    pub generator_loss: f64,
}

/// Refinement cut short by a scoring failure, usually budget exhaustion.
/// Episodes finished before the failure are preserved.
#[derive(Debug)]
pub struct RlInterrupted {
    pub traces: Vec<EpisodeTrace>,
    pub source: Error,
}

impl std::fmt::Display for RlInterrupted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "refinement interrupted after {} complete episodes: {}",
            self.traces.len(),
            self.source
        )
    }
}

impl std::error::Error for RlInterrupted {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl From<RlInterrupted> for Error {
    fn from(interrupted: RlInterrupted) -> Self {
        interrupted.source
    }
}

/// Fraction of predicted labels equal to the target.
pub fn step_reward(predicted: &[u8], y_target: u8) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::Config("reward of an empty batch is undefined".into()));
    }
    let hits = predicted.iter().filter(|&&l| l == y_target).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// One latent step. Noise is drawn fresh on every call, including when the
/// scale is zero, so replaying a seed stream reproduces the trajectory.
pub fn td_update<S: Scalar>(
    z: &DenseMatrix<S>,
    delta: S,
    alpha: S,
    gamma: S,
    t: usize,
    rng: &mut SplitMix64,
) -> Result<DenseMatrix<S>> {
    let noise = rng.sample_normal(z.rows(), z.cols(), S::zero(), S::one());
    let scale = alpha * delta * gamma.powi(t as i32);
    z.zip_with(&noise, |zv, nv| zv + scale * nv)
}

/// Refines the generator in place against the surrogate and returns one
/// trace per episode. Episodes start from fresh Gaussian latents.
pub fn rl_refine<S: Scalar>(
    gen: &mut GeneratorNet<S>,
    surrogate: &SurrogateHandle<'_, S>,
    cfg: &RlConfig,
) -> std::result::Result<Vec<EpisodeTrace>, RlInterrupted> {
    rl_refine_with_init(gen, surrogate, cfg, &LatentInit::Gaussian)
}

/// [`rl_refine`] with an explicit latent initialization mode.
pub fn rl_refine_with_init<S: Scalar>(
    gen: &mut GeneratorNet<S>,
    surrogate: &SurrogateHandle<'_, S>,
    cfg: &RlConfig,
    init: &LatentInit<S>,
) -> std::result::Result<Vec<EpisodeTrace>, RlInterrupted> {
    let fail = |source: Error| RlInterrupted {
        traces: Vec::new(),
        source,
    };
    cfg.validate().map_err(fail)?;
    if cfg.latent_width != gen.latent_width {
        return Err(fail(Error::Config(format!(
            "config latent width {} does not match the generator's {}",
            cfg.latent_width, gen.latent_width
        ))));
    }
    if let LatentInit::Anchored(z0) = init {
        if z0.shape() != (cfg.batch, cfg.latent_width) {
            return Err(fail(Error::shape(
                "anchored latent init",
                format!("{:?}", z0.shape()),
                format!("({}, {})", cfg.batch, cfg.latent_width),
            )));
        }
    }

    let lr = S::from_f64_lossy(cfg.generator_lr);
    let mut adam = AdamState::new(gen.net.n_params(), lr);
    let mut traces = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        match run_episode(gen, &mut adam, surrogate, cfg, episode, init) {
            Ok(trace) => traces.push(trace),
            Err(source) => return Err(RlInterrupted { traces, source }),
        }
    }
    Ok(traces)
}

fn run_episode<S: Scalar>(
    gen: &mut GeneratorNet<S>,
    adam: &mut AdamState<S>,
    surrogate: &SurrogateHandle<'_, S>,
    cfg: &RlConfig,
    episode: usize,
    init: &LatentInit<S>,
) -> Result<EpisodeTrace> {
    let mut rng = SplitMix64::substream(cfg.seed, episode as u64);
    let alpha = S::from_f64_lossy(cfg.alpha);
    let gamma = S::from_f64_lossy(cfg.gamma);
    let mut z = match init {
        LatentInit::Gaussian => {
            rng.sample_normal(cfg.batch, cfg.latent_width, S::zero(), S::one())
        }
        LatentInit::Anchored(z0) => z0.clone(),
    };

    let mut steps = Vec::with_capacity(cfg.horizon);
    let mut reward_sum = 0.0;
    for t in 0..cfg.horizon {
        let batch = gen.decode(&z)?;
        let scores = surrogate.score(&batch)?;
        let labels = labels_from_scores(&scores);
        let reward = step_reward(&labels, cfg.y_target)?;
        reward_sum += reward;
        let td_error = reward - reward_sum / (t + 1) as f64;
        let mean_score = scores.iter().map(|s| s.to_f64_lossy()).sum::<f64>()
            / scores.len() as f64;
        steps.push(EpisodeStep {
            t,
            reward,
            td_error,
            mean_score,
            queries: surrogate.queries(),
        });
        z = td_update(&z, S::from_f64_lossy(td_error), alpha, gamma, t, &mut rng)?;
    }

    let targets: Vec<S> = vec![S::from_f64_lossy(cfg.y_target as f64); cfg.batch];
    let generator_loss = if surrogate.is_differentiable() {
        analytic_generator_step(gen, adam, surrogate, &z, &targets, cfg.y_target)?
    } else {
        es_generator_step(gen, adam, surrogate, &z, &targets, cfg, &mut rng)?
    };

    Ok(EpisodeTrace {
        episode,
        steps,
        generator_loss,
    })
}

/// Adam step through the surrogate's own input gradient, chained into the
/// generator's backward pass.
fn analytic_generator_step<S: Scalar>(
    gen: &mut GeneratorNet<S>,
    adam: &mut AdamState<S>,
    surrogate: &SurrogateHandle<'_, S>,
    z: &DenseMatrix<S>,
    targets: &[S],
    y_target: u8,
) -> Result<f64> {
    let cache = gen.net.forward(z)?;
    let scores = surrogate.score(cache.output())?;
    let (loss, _) = bce_loss(&scores, targets)?;
    let labels = vec![y_target; targets.len()];
    let d_batch = surrogate.input_gradient(cache.output(), &labels)?;
    let grads = gen.net.backward(&cache, &d_batch)?;
    let mut params = gen.net.params();
    adam.step(&mut params, &grads.flat)?;
    gen.net.set_params(&params)?;
    Ok(loss.to_f64_lossy())
}

/// Adam step through an antithetic Gaussian perturbation estimate: for each
/// of `es_samples` draws, the loss difference at `params +/- sigma * eps`
/// weights `eps` into the gradient. Only surrogate scores are consumed.
fn es_generator_step<S: Scalar>(
    gen: &mut GeneratorNet<S>,
    adam: &mut AdamState<S>,
    surrogate: &SurrogateHandle<'_, S>,
    z: &DenseMatrix<S>,
    targets: &[S],
    cfg: &RlConfig,
    rng: &mut SplitMix64,
) -> Result<f64> {
    let base = gen.net.params();
    let outcome = es_accumulate(gen, surrogate, z, targets, cfg, rng, &base);
    // The probes left perturbed parameters behind; restore before deciding
    // whether the episode survives.
    gen.net.set_params(&base)?;
    let (grad, base_loss) = outcome?;
    let mut params = base;
    adam.step(&mut params, &grad)?;
    gen.net.set_params(&params)?;
    Ok(base_loss)
}

fn es_accumulate<S: Scalar>(
    gen: &mut GeneratorNet<S>,
    surrogate: &SurrogateHandle<'_, S>,
    z: &DenseMatrix<S>,
    targets: &[S],
    cfg: &RlConfig,
    rng: &mut SplitMix64,
    base: &[S],
) -> Result<(Vec<S>, f64)> {
    let surrogate_loss = |gen: &GeneratorNet<S>| -> Result<S> {
        let batch = gen.decode(z)?;
        let scores = surrogate.score(&batch)?;
        Ok(bce_loss(&scores, targets)?.0)
    };

    let base_loss = surrogate_loss(gen)?.to_f64_lossy();
    let sigma = S::from_f64_lossy(cfg.es_sigma);
    let pair_scale =
        S::from_f64_lossy(1.0 / (2.0 * cfg.es_sigma * cfg.es_samples as f64));
    let mut grad = vec![S::zero(); base.len()];
    let mut eps = vec![S::zero(); base.len()];
    let mut probe = base.to_vec();
    for _ in 0..cfg.es_samples {
        for e in eps.iter_mut() {
            *e = S::from_f64_lossy(rng.next_normal());
        }
        for ((p, b), e) in probe.iter_mut().zip(base).zip(&eps) {
            *p = *b + sigma * *e;
        }
        gen.net.set_params(&probe)?;
        let plus = surrogate_loss(gen)?;
        for ((p, b), e) in probe.iter_mut().zip(base).zip(&eps) {
            *p = *b - sigma * *e;
        }
        gen.net.set_params(&probe)?;
        let minus = surrogate_loss(gen)?;
        let weight = (plus - minus) * pair_scale;
        for (g, e) in grad.iter_mut().zip(&eps) {
            *g += weight * *e;
        }
    }
    Ok((grad, base_loss))
}

/// Picks, for every record, the latent among `pool` fresh Gaussian
/// candidates whose decoded row lands closest to it in squared distance.
/// Pure generator work: the surrogate is never consulted.
pub fn nearest_record_latents<S: Scalar>(
    gen: &GeneratorNet<S>,
    records: &DenseMatrix<S>,
    pool: usize,
    seed: u64,
) -> Result<DenseMatrix<S>> {
    if records.rows() == 0 || pool == 0 {
        return Err(Error::Config(
            "nearest-record projection needs at least one record and one candidate".into(),
        ));
    }
    if records.cols() != gen.out_width() {
        return Err(Error::shape(
            "nearest-record projection",
            format!("{} record columns", records.cols()),
            format!("{} generator outputs", gen.out_width()),
        ));
    }
    let latent = gen.latent_width;
    let mut anchors = Vec::with_capacity(records.rows() * latent);
    for r in 0..records.rows() {
        let mut rng = SplitMix64::substream(seed, r as u64);
        let candidates = rng.sample_normal(pool, latent, S::zero(), S::one());
        let decoded = gen.decode(&candidates)?;
        let target = records.row(r);
        let mut best = 0;
        let mut best_dist = S::infinity();
        for c in 0..pool {
            let dist = decoded
                .row(c)
                .iter()
                .zip(target)
                .map(|(d, t)| (*d - *t) * (*d - *t))
                .fold(S::zero(), |acc, v| acc + v);
            if dist < best_dist {
                best = c;
                best_dist = dist;
            }
        }
        anchors.extend_from_slice(candidates.row(best));
    }
    DenseMatrix::from_vec(records.rows(), latent, anchors)
}

#[derive(Serialize)]
struct TraceRecord {
    episode: usize,
    t: usize,
    reward: f64,
    td_error: f64,
    mean_score: f64,
    queries: u64,
}

/// One JSON object per step, episodes in order, steps in order.
pub fn traces_jsonl(traces: &[EpisodeTrace]) -> Result<String> {
    let mut out = String::new();
    for trace in traces {
        for step in &trace.steps {
            let record = TraceRecord {
                episode: trace.episode,
                t: step.t,
                reward: step.reward,
                td_error: step.td_error,
                mean_score: step.mean_score,
                queries: step.queries,
            };
            out.push_str(&serde_json::to_string(&record)?);
            out.push('\n');
        }
    }
    Ok(out)
}

fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') || value.contains('\n') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_owned()
    }
}

/// Renders a generated batch on the original column scales, one CSV row per
/// generated record.
pub fn decoded_batch_csv(
    batch: &DenseMatrix<f64>,
    meta: &[crate::data::FeatureMeta],
) -> Result<String> {
    if batch.cols() != meta.len() {
        return Err(Error::shape(
            "decoded batch export",
            format!("{} batch columns", batch.cols()),
            format!("{} feature descriptions", meta.len()),
        ));
    }
    let mut out = String::new();
    let header: Vec<String> = meta.iter().map(|m| csv_field(&m.name)).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..batch.rows() {
        let cells: Vec<String> = batch
            .row(r)
            .iter()
            .zip(meta)
            .map(|(v, m)| csv_field(&m.decode(*v)))
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

//! Adversarial generator and discriminator, plus the pretraining loop.
//!
//! The generator maps latent noise through a [128, 256, 512, 64] trunk to
//! one sigmoid output per dataset feature, so generated records always lie
//! in the normalized feature domain. The discriminator mirrors the trunk
//! down to a single sigmoid unit. Pretraining alternates one
//! discriminator step (real rows labeled 1, generated rows labeled 0)
//! with one generator step against the frozen discriminator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ganrl::mlp::Mlp;
use crate::numkit::{bce_loss, Activation, AdamState, DenseMatrix, Scalar, SplitMix64};

/// Hidden widths shared by both networks; the discriminator reverses them.
pub const TRUNK_WIDTHS: [usize; 4] = [128, 256, 512, 64];

/// Negative-side slope of every hidden activation.
pub const HIDDEN_SLOPE: f64 = 0.01;

const HIDDEN: Activation = Activation::LeakyRelu {
    slope: HIDDEN_SLOPE,
};

/// Substream drawn for minibatch shuffling during pretraining.
const STREAM_SHUFFLE: u64 = 0;
/// Substream drawn for every latent sample during pretraining.
const STREAM_LATENT: u64 = 1;

/// How the generator scores against the discriminator in pretraining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanLossMode {
    /// Minimize `mean ln(1 - D(G(z)))`, the minimax objective as written.
    Minimax,
    /// Minimize `-mean ln D(G(z))`; same fixed points, stronger early
    /// gradients when the discriminator dominates.
    NonSaturating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub latent_width: usize,
    pub generator_lr: f64,
    pub discriminator_lr: f64,
    pub loss_mode: GanLossMode,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            epochs: 20,
            batch_size: 64,
            latent_width: 64,
            generator_lr: 1e-3,
            discriminator_lr: 1e-3,
            loss_mode: GanLossMode::Minimax,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.latent_width == 0 {
            return Err(Error::Config(
                "epochs, batch_size, and latent_width must be positive".to_owned(),
            ));
        }
        for (name, lr) in [
            ("generator_lr", self.generator_lr),
            ("discriminator_lr", self.discriminator_lr),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {lr}")));
            }
        }
        Ok(())
    }
}

/// Latent-to-record network with a sigmoid output per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorNet<S: Scalar> {
    pub net: Mlp<S>,
    pub latent_width: usize,
}

impl<S: Scalar> GeneratorNet<S> {
    pub fn init(latent_width: usize, out_width: usize, seed: u64) -> Result<Self> {
        if latent_width == 0 || out_width == 0 {
            return Err(Error::Config(
                "generator widths must be positive".to_owned(),
            ));
        }
        let widths = [
            latent_width,
            TRUNK_WIDTHS[0],
            TRUNK_WIDTHS[1],
            TRUNK_WIDTHS[2],
            TRUNK_WIDTHS[3],
            out_width,
        ];
        let mut rng = SplitMix64::substream(seed, 0);
        Ok(GeneratorNet {
            net: Mlp::init(&widths, HIDDEN, Activation::Sigmoid, &mut rng)?,
            latent_width,
        })
    }

    pub fn out_width(&self) -> usize {
        self.net.output_width()
    }

    /// Decodes latent rows into records in the unit feature cube.
    pub fn decode(&self, z: &DenseMatrix<S>) -> Result<DenseMatrix<S>> {
        self.net.output(z)
    }
}

/// Record-to-realness network ending in one sigmoid unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorNet<S: Scalar> {
    pub net: Mlp<S>,
}

impl<S: Scalar> DiscriminatorNet<S> {
    pub fn init(in_width: usize, seed: u64) -> Result<Self> {
        if in_width == 0 {
            return Err(Error::Config(
                "discriminator input width must be positive".to_owned(),
            ));
        }
        let widths = [
            in_width,
            TRUNK_WIDTHS[3],
            TRUNK_WIDTHS[2],
            TRUNK_WIDTHS[1],
            TRUNK_WIDTHS[0],
            1,
        ];
        let mut rng = SplitMix64::substream(seed, 1);
        Ok(DiscriminatorNet {
            net: Mlp::init(&widths, HIDDEN, Activation::Sigmoid, &mut rng)?,
        })
    }

    /// Realness scores in (0,1), one per row.
    pub fn scores(&self, x: &DenseMatrix<S>) -> Result<Vec<S>> {
        Ok(self.net.output(x)?.data().to_vec())
    }
}

/// Fresh latent noise and its decoded batch.
pub fn generate_batch<S: Scalar>(
    gen: &GeneratorNet<S>,
    rng: &mut SplitMix64,
    n: usize,
) -> Result<DenseMatrix<S>> {
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, gen.out_width()));
    }
    let z: DenseMatrix<S> = rng.sample_normal(n, gen.latent_width, S::zero(), S::one());
    gen.decode(&z)
}

/// Loss curves from one pretraining run; indexed per optimizer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub discriminator_losses: Vec<f64>,
    pub generator_losses: Vec<f64>,
}

/// Alternating adversarial training on real records.
///
/// The discriminator ascends toward separating real from generated rows;
/// the generator descends its configured loss against the frozen
/// discriminator. Aborts with a divergence error when the discriminator
/// loss stays below 1e-6 for 100 consecutive steps, which means the
/// generator has collapsed and gradients carry no signal.
pub fn pretrain_gan<S: Scalar>(
    gen: &mut GeneratorNet<S>,
    disc: &mut DiscriminatorNet<S>,
    real: &DenseMatrix<S>,
    cfg: &GanConfig,
) -> Result<PretrainReport> {
    cfg.validate()?;
    if real.is_empty() {
        return Err(Error::Training(
            "pretraining needs at least one real record".to_owned(),
        ));
    }
    if real.cols() != gen.out_width() {
        return Err(Error::shape(
            "pretraining records",
            format!("{} features", gen.out_width()),
            format!("{} columns", real.cols()),
        ));
    }

    let lr_g = S::from_f64_lossy(cfg.generator_lr);
    let lr_d = S::from_f64_lossy(cfg.discriminator_lr);
    let mut adam_g = AdamState::new(gen.net.n_params(), lr_g);
    let mut adam_d = AdamState::new(disc.net.n_params(), lr_d);
    let mut shuffle_rng = SplitMix64::substream(cfg.seed, STREAM_SHUFFLE);
    let mut latent_rng = SplitMix64::substream(cfg.seed, STREAM_LATENT);

    let mut report = PretrainReport {
        discriminator_losses: Vec::new(),
        generator_losses: Vec::new(),
    };
    let mut starved_steps = 0_usize;
    let mut order: Vec<usize> = (0..real.rows()).collect();

    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let real_batch = real.select_rows(chunk);
            let fake_batch = generate_batch(gen, &mut latent_rng, chunk.len())?;

            let disc_loss =
                discriminator_step(disc, &mut adam_d, &real_batch, &fake_batch)?;
            report.discriminator_losses.push(disc_loss.to_f64_lossy());

            if disc_loss.to_f64_lossy() < 1e-6 {
                starved_steps += 1;
                if starved_steps >= 100 {
                    return Err(Error::Divergence(format!(
                        "discriminator loss below 1e-6 for {starved_steps} consecutive steps \
                         (epoch {epoch}, step {}); the generator has collapsed",
                        report.discriminator_losses.len()
                    )));
                }
            } else {
                starved_steps = 0;
            }

            let gen_loss =
                generator_step(gen, disc, &mut adam_g, &mut latent_rng, chunk.len(), cfg)?;
            report.generator_losses.push(gen_loss.to_f64_lossy());
        }
    }
    Ok(report)
}

/// One Adam step on the discriminator's real-versus-generated BCE.
fn discriminator_step<S: Scalar>(
    disc: &mut DiscriminatorNet<S>,
    adam: &mut AdamState<S>,
    real_batch: &DenseMatrix<S>,
    fake_batch: &DenseMatrix<S>,
) -> Result<S> {
    let n_real = real_batch.rows();
    let n_fake = fake_batch.rows();
    let mut stacked = Vec::with_capacity((n_real + n_fake) * real_batch.cols());
    stacked.extend_from_slice(real_batch.data());
    stacked.extend_from_slice(fake_batch.data());
    let x = DenseMatrix::from_vec(n_real + n_fake, real_batch.cols(), stacked)?;
    let mut labels = vec![S::one(); n_real];
    labels.extend(std::iter::repeat(S::zero()).take(n_fake));

    let cache = disc.net.forward(&x)?;
    let (loss, d_prob) = bce_loss(cache.output().data(), &labels)?;
    let d_output = DenseMatrix::from_vec(n_real + n_fake, 1, d_prob)?;
    let grads = disc.net.backward(&cache, &d_output)?;

    let mut params = disc.net.params();
    adam.step(&mut params, &grads.flat)?;
    disc.net.set_params(&params)?;
    Ok(loss)
}

/// One Adam step on the generator against the frozen discriminator.
fn generator_step<S: Scalar>(
    gen: &mut GeneratorNet<S>,
    disc: &DiscriminatorNet<S>,
    adam: &mut AdamState<S>,
    latent_rng: &mut SplitMix64,
    batch: usize,
    cfg: &GanConfig,
) -> Result<S> {
    let z: DenseMatrix<S> = latent_rng.sample_normal(batch, gen.latent_width, S::zero(), S::one());
    let gen_cache = gen.net.forward(&z)?;
    let disc_cache = disc.net.forward(gen_cache.output())?;
    let probs = disc_cache.output();

    // Loss and its gradient with respect to the realness probabilities.
    let clamp_lo = S::from_f64_lossy(1e-7);
    let clamp_hi = S::one() - clamp_lo;
    let n = S::from_f64_lossy(batch as f64);
    let mut loss = S::zero();
    let mut d_prob = Vec::with_capacity(batch);
    for &raw in probs.data() {
        let p = raw.max(clamp_lo).min(clamp_hi);
        match cfg.loss_mode {
            GanLossMode::Minimax => {
                loss += (S::one() - p).ln();
                d_prob.push(-(S::one() / (S::one() - p)) / n);
            }
            GanLossMode::NonSaturating => {
                loss -= p.ln();
                d_prob.push(-(S::one() / p) / n);
            }
        }
    }
    loss = loss / n;

    let d_disc_out = DenseMatrix::from_vec(batch, 1, d_prob)?;
    let through_disc = disc.net.backward(&disc_cache, &d_disc_out)?;
    let gen_grads = gen.net.backward(&gen_cache, &through_disc.d_input)?;

    let mut params = gen.net.params();
    adam.step(&mut params, &gen_grads.flat)?;
    gen.net.set_params(&params)?;
    Ok(loss)
}

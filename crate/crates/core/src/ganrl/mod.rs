//! Generative attack pipeline: a fully connected generator pretrained
//! against a discriminator on real claim records, then refined with
//! surrogate-guided latent search until the generated records score as
//! legitimate.
//!
//! The target model is only ever reachable through [`SurrogateHandle`],
//! which meters every scored row. Refinement itself is plain latent
//! arithmetic plus one generator Adam step per episode, so the handle's
//! query counter is a complete audit of what the attack learned from the
//! target.

mod gan;
mod mlp;
mod rl;
mod surrogate;

pub use gan::{
    generate_batch, pretrain_gan, DiscriminatorNet, GanConfig, GanLossMode,
    GeneratorNet, PretrainReport,
};
pub use mlp::{Mlp, MlpCache, MlpGradients};
pub use rl::{
    decoded_batch_csv, nearest_record_latents, rl_refine, rl_refine_with_init,
    step_reward, td_update, traces_jsonl, EpisodeStep, EpisodeTrace, LatentInit,
    RlConfig, RlInterrupted,
};
pub use surrogate::{
    attach_differentiable_surrogate, attach_target_as_surrogate, SurrogateHandle,
};

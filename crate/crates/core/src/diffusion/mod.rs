//! Denoising diffusion: the variance schedule, the forward noising process and
//! the kernel-size-parameterized U-Net that predicts the clean signal.

pub mod denoiser;
pub mod process;
pub mod sampler;
pub mod schedule;

pub use denoiser::{ddpm_loss, Denoiser, DenoiserConfig};
pub use process::{forward_marginal, forward_marginal_with_noise, forward_step, NoisyObservation};
pub use schedule::NoiseSchedule;

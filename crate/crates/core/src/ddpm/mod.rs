//! Conditional denoising diffusion model over blocklength vectors.

mod checkpoint;
mod net;
mod sample;
mod schedule;
mod train;

pub use checkpoint::{ModelCheckpoint, CHECKPOINT_FORMAT_VERSION};
pub use net::{mse_with_grad, Denoiser, DenoiserConfig, DenoiserData, ForwardCache, Layer, LayerData};
pub use sample::{sample, SampleOptions};
pub use schedule::{
    forward_noise, make_schedule, time_embedding, NoiseSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_STEPS,
};
pub use train::{
    ema_update, loss_and_gradients, loss_and_gradients_at, train, train_from, AdamW, EpochLog, TrainConfig,
    TrainedModel, TrainingSet,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model and schedule hyperparameters (the `[ddpm]` config table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpmConfig {
    pub steps: usize,
    /// Schedule endpoints; when unset, the 500-step default rescaled to
    /// `steps`.
    pub beta_start: Option<f64>,
    pub beta_end: Option<f64>,
    pub hidden: Vec<usize>,
    pub time_dim: usize,
    /// Sample with the posterior variance instead of `β_t`.
    pub posterior_variance: bool,
}

impl Default for DdpmConfig {
    fn default() -> Self {
        DdpmConfig {
            steps: DEFAULT_STEPS,
            beta_start: None,
            beta_end: None,
            hidden: vec![256, 256, 256],
            time_dim: 32,
            posterior_variance: false,
        }
    }
}

impl DdpmConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule().map_err(|e| Error::Config { key: "ddpm.steps".into(), msg: e.to_string() })?;
        self.denoiser(1).validate().map_err(|e| Error::Config { key: "ddpm.hidden".into(), msg: e.to_string() })
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        match (self.beta_start, self.beta_end) {
            (None, None) => NoiseSchedule::default_for(self.steps),
            (b1, bt) => {
                let scale = DEFAULT_STEPS as f64 / self.steps.max(1) as f64;
                make_schedule(
                    self.steps,
                    b1.unwrap_or(DEFAULT_BETA_START * scale),
                    bt.unwrap_or(DEFAULT_BETA_END * scale),
                )
            }
        }
    }

    pub fn denoiser(&self, n: usize) -> DenoiserConfig {
        DenoiserConfig { n, hidden: self.hidden.clone(), time_dim: self.time_dim }
    }
}

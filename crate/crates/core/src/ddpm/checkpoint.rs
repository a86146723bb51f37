use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::net::{Denoiser, DenoiserData};
use super::sample::{sample, SampleOptions};
use super::schedule::NoiseSchedule;
use super::train::TrainConfig;
use super::DdpmConfig;
use crate::config::SystemConfig;
use crate::dataset::{write_atomic, BlocklengthCodec, ConditionStats};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// A trained model bound to one node count, with everything needed to turn
/// raw gains into blocklengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub params: Denoiser,
    pub ema: Denoiser,
    pub schedule: NoiseSchedule,
    pub condition: ConditionStats,
    pub codec: BlocklengthCodec,
    pub system: SystemConfig,
    pub ddpm: DdpmConfig,
    pub train: TrainConfig,
    pub epoch_losses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    n: usize,
    params: DenoiserData,
    ema: DenoiserData,
    schedule: NoiseSchedule,
    condition: ConditionStats,
    codec: BlocklengthCodec,
    system: SystemConfig,
    ddpm: DdpmConfig,
    train: TrainConfig,
    epoch_losses: Vec<f64>,
}

impl ModelCheckpoint {
    pub fn n(&self) -> usize {
        self.params.config.n
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.ema.config != self.params.config {
            return Err(Error::Shape("raw and EMA parameters have different architectures".into()));
        }
        if self.condition.dim() != n || self.system.node_count != n {
            return Err(Error::Mismatch(format!(
                "checkpoint members disagree on N: model {n}, normalization {}, config {}",
                self.condition.dim(),
                self.system.node_count
            )));
        }
        if !self.params.is_finite() || !self.ema.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointFile {
            format_version: CHECKPOINT_FORMAT_VERSION,
            n: self.n(),
            params: (&self.params).into(),
            ema: (&self.ema).into(),
            schedule: self.schedule.clone(),
            condition: self.condition.clone(),
            codec: self.codec,
            system: self.system.clone(),
            ddpm: self.ddpm.clone(),
            train: self.train.clone(),
            epoch_losses: self.epoch_losses.clone(),
        };
        serde_json::to_string(&file).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
        if file.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint format version {} (this build reads {CHECKPOINT_FORMAT_VERSION})",
                file.format_version
            )));
        }
        let ckpt = ModelCheckpoint {
            params: file.params.try_into()?,
            ema: file.ema.try_into()?,
            schedule: file.schedule,
            condition: file.condition,
            codec: file.codec,
            system: file.system,
            ddpm: file.ddpm,
            train: file.train,
            epoch_losses: file.epoch_losses,
        };
        if ckpt.n() != file.n {
            return Err(Error::Mismatch(format!("header says N = {}, parameters have N = {}", file.n, ckpt.n())));
        }
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fail unless this checkpoint was trained for `cfg`'s node count.
    pub fn check_compatible(&self, cfg: &SystemConfig) -> Result<()> {
        if self.n() != cfg.node_count {
            return Err(Error::Mismatch(format!(
                "checkpoint was trained for N = {}, config has N = {}",
                self.n(),
                cfg.node_count
            )));
        }
        Ok(())
    }

    pub fn model(&self, opts: &SampleOptions) -> &Denoiser {
        if opts.use_ema {
            &self.ema
        } else {
            &self.params
        }
    }

    /// Sample one continuous estimate and decoded blocklength vector per
    /// row of raw linear `gains`.
    pub fn sample_gains<R: Rng + ?Sized>(
        &self,
        gains: &[Vec<f64>],
        rng: &mut R,
        opts: &SampleOptions,
    ) -> Result<(Array2<f64>, Vec<Vec<u32>>)> {
        let n = self.n();
        let mut cond = Array2::zeros((gains.len(), n));
        for (r, g) in gains.iter().enumerate() {
            if g.len() != n {
                return Err(Error::Mismatch(format!("gain vector of length {} for a model with N = {n}", g.len())));
            }
            let z = self.condition.normalize(g)?;
            cond.row_mut(r).assign(&ndarray::ArrayView1::from(&z[..]));
        }
        let x0 = sample(self.model(opts), &self.schedule, cond.view(), rng, opts)?;
        let ms = x0.rows().into_iter().map(|row| row.iter().map(|&y| self.codec.decode(y)).collect()).collect();
        Ok((x0, ms))
    }
}

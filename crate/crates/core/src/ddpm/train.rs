use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::net::{mse_with_grad, Denoiser, DenoiserConfig};
use super::schedule::NoiseSchedule;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Floor of the cosine learning-rate decay.
    pub min_learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub ema_decay: f64,
    /// EMA tracking starts after this fraction of all optimizer steps.
    pub ema_start_fraction: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 100,
            learning_rate: 1e-5,
            min_learning_rate: 1e-7,
            weight_decay: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            ema_decay: 0.995,
            ema_start_fraction: 0.1,
            grad_clip_norm: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::Config { key: format!("train.{key}"), msg: msg.into() });
        if self.batch_size == 0 {
            return bad("batch_size", "must be >= 1");
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return bad("ema_decay", "must lie in (0, 1)");
        }
        if !(self.learning_rate >= 0.0 && self.min_learning_rate >= 0.0) {
            return bad("learning_rate", "must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.ema_start_fraction) {
            return bad("ema_start_fraction", "must lie in [0, 1]");
        }
        if !(self.grad_clip_norm >= 0.0) {
            return bad("grad_clip_norm", "must be >= 0");
        }
        Ok(())
    }

    /// Cosine decay from `learning_rate` to `min_learning_rate`.
    pub fn learning_rate_at(&self, step: usize, total_steps: usize) -> f64 {
        if total_steps <= 1 {
            return self.learning_rate;
        }
        let progress = step as f64 / (total_steps - 1) as f64;
        let lo = self.min_learning_rate.min(self.learning_rate);
        lo + 0.5 * (self.learning_rate - lo) * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

/// Encoded blocklengths paired with normalized conditions, one row each.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x0: Array2<f64>,
    pub cond: Array2<f64>,
}

impl TrainingSet {
    pub fn new(x0: Array2<f64>, cond: Array2<f64>) -> Result<Self> {
        if x0.dim() != cond.dim() {
            return Err(Error::Shape(format!("samples {:?} vs conditions {:?}", x0.dim(), cond.dim())));
        }
        if x0.nrows() == 0 {
            return Err(Error::Domain("training set is empty".into()));
        }
        Ok(TrainingSet { x0, cond })
    }

    /// Encode blocklengths and normalize gains with the dataset's own
    /// statistics.
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let n = data.meta.n;
        let rows = data.records.len();
        let mut x0 = Array2::zeros((rows, n));
        let mut cond = Array2::zeros((rows, n));
        for (r, rec) in data.records.iter().enumerate() {
            let g = data.meta.condition.normalize(&rec.gains)?;
            for i in 0..n {
                x0[[r, i]] = data.meta.codec.encode(rec.m_opt[i]);
                cond[[r, i]] = g[i];
            }
        }
        Self::new(x0, cond)
    }

    pub fn len(&self) -> usize {
        self.x0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x0.ncols()
    }
}

/// Loss and gradients for fixed step indices and noise draws.
pub fn loss_and_gradients_at(
    model: &Denoiser,
    x0: ArrayView2<f64>,
    cond: ArrayView2<f64>,
    t: &[usize],
    eps: ArrayView2<f64>,
    sched: &NoiseSchedule,
) -> Result<(f64, Denoiser)> {
    let mut x_t = x0.to_owned();
    for (r, mut row) in x_t.axis_iter_mut(Axis(0)).enumerate() {
        let ab = sched.alpha_bar(t[r]);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        row.zip_mut_with(&eps.row(r), |x, &e| *x = a * *x + b * e);
    }
    let (pred, cache) = model.forward_cached(x_t.view(), t, cond)?;
    let target = eps.to_owned();
    let (loss, d_out) = mse_with_grad(&pred, &target);
    Ok((loss, model.backward(&cache, d_out.view())))
}

/// Draw a step uniformly from `1..=T` and standard-normal noise for every
/// row, then return the noise-prediction MSE and its exact gradients.
pub fn loss_and_gradients<R: Rng + ?Sized>(
    model: &Denoiser,
    x0: ArrayView2<f64>,
    cond: ArrayView2<f64>,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<(f64, Denoiser)> {
    if x0.nrows() == 0 {
        return Err(Error::Domain("empty batch".into()));
    }
    let t: Vec<usize> = (0..x0.nrows()).map(|_| rng.random_range(1..=sched.steps())).collect();
    let eps = Array2::from_shape_simple_fn(x0.dim(), || rng.sample::<f64, _>(StandardNormal));
    loss_and_gradients_at(model, x0, cond, &t, eps.view(), sched)
}

/// `ema ← decay·ema + (1 − decay)·w`
pub fn ema_update(ema: &mut [f64], w: &[f64], decay: f64) {
    for (e, &v) in ema.iter_mut().zip(w) {
        *e = decay * *e + (1.0 - decay) * v;
    }
}

/// AdamW with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: Denoiser,
    v: Denoiser,
    step: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl AdamW {
    pub fn new(model: &Denoiser, tc: &TrainConfig) -> Self {
        AdamW {
            m: model.zeros_like(),
            v: model.zeros_like(),
            step: 0,
            beta1: tc.adam_beta1,
            beta2: tc.adam_beta2,
            eps: tc.adam_eps,
            weight_decay: tc.weight_decay,
        }
    }

    pub fn update(&mut self, params: &mut Denoiser, grads: &Denoiser, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2, eps, wd) = (self.beta1, self.beta2, self.eps, self.weight_decay);
        for (((w, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..w.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                w[i] -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * w[i]);
            }
        }
    }
}

fn clip_global_norm(grads: &mut Denoiser, max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grads.tensors().iter().flat_map(|t| t.iter()).map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for t in grads.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= scale);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: Denoiser,
    pub ema: Denoiser,
    pub epoch_losses: Vec<f64>,
}

const INIT_STREAM: u64 = 7;

/// Train a noise predictor on `data`.
///
/// Every random draw (initialization, shuffling, steps, noise) comes from
/// `tc.seed`, and batches are reduced in a fixed order, so the run is
/// reproducible bit for bit on one platform.
pub fn train(
    data: &TrainingSet,
    arch: &DenoiserConfig,
    sched: &NoiseSchedule,
    tc: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainedModel> {
    tc.validate()?;
    arch.validate()?;
    if data.dim() != arch.n {
        return Err(Error::Mismatch(format!("training data has N = {}, model expects {}", data.dim(), arch.n)));
    }
    if !sched.reaches_noise() {
        return Err(Error::Domain(format!(
            "schedule ends at alpha_bar = {:.4}; sampling from N(0, I) needs < 0.05",
            sched.alpha_bars().last().unwrap()
        )));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(tc.seed);
    init_rng.set_stream(INIT_STREAM);
    let params = Denoiser::init(arch.clone(), &mut init_rng);
    train_from(params, data, sched, tc, &mut on_epoch)
}

/// Continue training from given parameters.
pub fn train_from(
    mut params: Denoiser,
    data: &TrainingSet,
    sched: &NoiseSchedule,
    tc: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainedModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut opt = AdamW::new(&params, tc);
    let mut ema = params.clone();

    let n_rows = data.len();
    let batches_per_epoch = n_rows.div_ceil(tc.batch_size);
    let total_steps = tc.epochs * batches_per_epoch;
    let ema_start = (tc.ema_start_fraction * total_steps as f64).ceil() as usize;

    let mut order: Vec<usize> = (0..n_rows).collect();
    let mut epoch_losses = Vec::with_capacity(tc.epochs);
    let mut step = 0usize;
    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut lr = tc.learning_rate;
        for chunk in order.chunks(tc.batch_size) {
            let x0 = data.x0.select(Axis(0), chunk);
            let cond = data.cond.select(Axis(0), chunk);
            let (loss, mut grads) = loss_and_gradients(&params, x0.view(), cond.view(), sched, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, step, loss });
            }
            loss_sum += loss * chunk.len() as f64;
            clip_global_norm(&mut grads, tc.grad_clip_norm);
            lr = tc.learning_rate_at(step, total_steps);
            opt.update(&mut params, &grads, lr);
            if step < ema_start {
                ema.clone_from(&params);
            } else {
                for (e, w) in ema.tensors_mut().into_iter().zip(params.tensors()) {
                    ema_update(e, w, tc.ema_decay);
                }
            }
            step += 1;
        }
        let mean_loss = loss_sum / n_rows as f64;
        if !params.is_finite() {
            return Err(Error::Divergence { epoch, step, loss: f64::NAN });
        }
        epoch_losses.push(mean_loss);
        on_epoch(&EpochLog { epoch, mean_loss, learning_rate: lr });
    }
    Ok(TrainedModel { params, ema, epoch_losses })
}

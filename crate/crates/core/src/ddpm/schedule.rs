use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Forward-process variances with their cumulative products. Steps are
/// 1-based: `beta(1)` is the first noising step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleData", into = "ScheduleData")]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleData {
    betas: Vec<f64>,
}

impl TryFrom<ScheduleData> for NoiseSchedule {
    type Error = Error;

    fn try_from(d: ScheduleData) -> Result<Self> {
        NoiseSchedule::from_betas(d.betas)
    }
}

impl From<NoiseSchedule> for ScheduleData {
    fn from(s: NoiseSchedule) -> Self {
        ScheduleData { betas: s.betas }
    }
}

/// Default schedule endpoints at 500 steps.
pub const DEFAULT_STEPS: usize = 500;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

/// Linear schedule from `beta_start` to `beta_end` over `steps` steps.
pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::Domain(format!("schedule needs at least 2 steps, got {steps}")));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::Domain(format!(
            "schedule needs 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )));
    }
    let span = beta_end - beta_start;
    let last = (steps - 1) as f64;
    let betas = (0..steps).map(|i| beta_start + span * i as f64 / last).collect();
    NoiseSchedule::from_betas(betas)
}

impl NoiseSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Domain("empty schedule".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::Domain(format!("beta {b} outside (0, 1)")));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(alphas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        Ok(NoiseSchedule { betas, alphas, alpha_bars })
    }

    /// The linear default, rescaled so that any step count keeps the same
    /// total noise as 500 steps from 1e-4 to 0.02.
    pub fn default_for(steps: usize) -> Result<Self> {
        let scale = DEFAULT_STEPS as f64 / steps as f64;
        make_schedule(steps, DEFAULT_BETA_START * scale, DEFAULT_BETA_END * scale)
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// Variance of `q(x_{t-1} | x_t, x_0)`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        let prev = if t > 1 { self.alpha_bar(t - 1) } else { 1.0 };
        self.beta(t) * (1.0 - prev) / (1.0 - self.alpha_bar(t))
    }

    /// Whether the last step destroys the signal well enough to start
    /// sampling from a standard normal.
    pub fn reaches_noise(&self) -> bool {
        *self.alpha_bars.last().unwrap() < 0.05
    }
}

/// `x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε`
pub fn forward_noise(x0: &[f64], t: usize, eps: &[f64], sched: &NoiseSchedule) -> Vec<f64> {
    assert_eq!(x0.len(), eps.len(), "x0 and noise lengths differ");
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect()
}

/// Sinusoidal position encoding of step `t`: `(sin(t·ω_j), cos(t·ω_j))`
/// pairs with `ω_j = 10000^(−2j/dim)`.
pub fn time_embedding(t: f64, dim: usize) -> Vec<f64> {
    assert!(dim.is_multiple_of(2), "time embedding width must be even");
    let mut out = Vec::with_capacity(dim);
    write_time_embedding(t, &mut out, dim);
    out
}

pub(crate) fn write_time_embedding(t: f64, out: &mut Vec<f64>, dim: usize) {
    for j in 0..dim / 2 {
        let freq = 10000f64.powf(-(2.0 * j as f64) / dim as f64);
        let phase = t * freq;
        out.push(phase.sin());
        out.push(phase.cos());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_products() {
        let s = make_schedule(2, 0.1, 0.2).unwrap();
        assert!((s.alpha_bar(1) - 0.9).abs() < 1e-15);
        assert!((s.alpha_bar(2) - 0.72).abs() < 1e-15);
    }

    #[test]
    fn default_schedule_end_value() {
        let s = make_schedule(500, 1e-4, 0.02).unwrap();
        // cumulative product evaluated in 40-digit arithmetic
        assert!((s.alpha_bar(500) - 6.352_710_797_015_05e-3).abs() < 1e-12);
        // first-order bound exp(-Σβ) sits just above it
        let bound = (-s.betas().iter().sum::<f64>()).exp();
        assert!(s.alpha_bar(500) < bound && bound < 6.6e-3);
        assert!(s.reaches_noise());
    }

    #[test]
    fn rescaled_default_reaches_noise_with_few_steps() {
        let s = NoiseSchedule::default_for(100).unwrap();
        assert!((s.alpha_bar(100) - 5.503_652_139_724_25e-3).abs() < 1e-12);
        assert!(s.reaches_noise());
    }

    #[test]
    fn alpha_bar_strictly_decreases() {
        for (t, b1, bt) in [(2, 0.1, 0.2), (50, 1e-3, 1e-3), (1000, 1e-4, 0.02)] {
            let s = make_schedule(t, b1, bt).unwrap();
            assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn bad_bounds_are_rejected() {
        assert!(make_schedule(1, 0.1, 0.2).is_err());
        assert!(make_schedule(10, 0.0, 0.2).is_err());
        assert!(make_schedule(10, 0.3, 0.2).is_err());
        assert!(make_schedule(10, 0.1, 1.0).is_err());
        assert!(NoiseSchedule::from_betas(vec![0.5, 1.5]).is_err());
    }

    #[test]
    fn forward_noise_examples() {
        let s = make_schedule(10, 0.01, 0.2).unwrap();
        let x0 = [0.5, -0.3];
        let xt = forward_noise(&x0, 4, &[0.0, 0.0], &s);
        let a = s.alpha_bar(4).sqrt();
        assert_eq!(xt, vec![a * 0.5, a * -0.3]);

        let xt = forward_noise(&[0.0, 0.0], 7, &[1.0, 0.0], &s);
        assert_eq!(xt, vec![(1.0 - s.alpha_bar(7)).sqrt(), 0.0]);

        let s = make_schedule(500, 1e-4, 0.02).unwrap();
        let eps = [0.3, -1.1];
        let xt = forward_noise(&x0, 500, &eps, &s);
        let dist = ((xt[0] - eps[0]).powi(2) + (xt[1] - eps[1]).powi(2)).sqrt();
        let x0_norm = (0.5f64 * 0.5 + 0.3 * 0.3).sqrt();
        let eps_norm = (0.3f64 * 0.3 + 1.1 * 1.1).sqrt();
        // √ᾱ‖x0‖ plus the (1 − √(1−ᾱ))‖ε‖ shrinkage of the noise term
        assert!(dist <= s.alpha_bar(500).sqrt() * x0_norm + (1.0 - (1.0 - s.alpha_bar(500)).sqrt()) * eps_norm);
    }

    #[test]
    fn embedding_properties() {
        let e0 = time_embedding(0.0, 8);
        assert_eq!(e0, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(e0.iter().map(|v| v * v).sum::<f64>(), 4.0);
        let embs: Vec<Vec<f64>> = (1..=500).map(|t| time_embedding(t as f64, 32)).collect();
        for w in embs.windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }
}

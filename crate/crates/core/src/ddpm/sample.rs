use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::net::Denoiser;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleOptions {
    /// Drop the injected noise `z` at every step; only `x_T` is random.
    pub deterministic: bool,
    /// Sample with the EMA parameters rather than the raw ones.
    pub use_ema: bool,
    pub posterior_variance: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { deterministic: false, use_ema: true, posterior_variance: false }
    }
}

/// Run the reverse process for every row of `cond`, starting from
/// `x_T ~ N(0, I)`, and return the `x_0` estimates.
pub fn sample<R: Rng + ?Sized>(
    model: &Denoiser,
    sched: &NoiseSchedule,
    cond: ArrayView2<f64>,
    rng: &mut R,
    opts: &SampleOptions,
) -> Result<Array2<f64>> {
    let n = model.config.n;
    if cond.ncols() != n {
        return Err(Error::Mismatch(format!("condition has {} columns, model expects N = {n}", cond.ncols())));
    }
    let rows = cond.nrows();
    let mut x = Array2::from_shape_simple_fn((rows, n), || rng.sample::<f64, _>(StandardNormal));
    let mut t_vec = vec![0usize; rows];
    for t in (1..=sched.steps()).rev() {
        t_vec.fill(t);
        let eps_hat = model.forward(x.view(), &t_vec, cond)?;
        let beta = sched.beta(t);
        let inv_sqrt_alpha = 1.0 / sched.alpha(t).sqrt();
        let coef = beta / (1.0 - sched.alpha_bar(t)).sqrt();
        let sigma = if t == 1 || opts.deterministic {
            0.0
        } else if opts.posterior_variance {
            sched.posterior_variance(t).sqrt()
        } else {
            beta.sqrt()
        };
        x.zip_mut_with(&eps_hat, |xv, &e| *xv = inv_sqrt_alpha * (*xv - coef * e));
        if sigma > 0.0 {
            x.mapv_inplace(|v| v + sigma * rng.sample::<f64, _>(StandardNormal));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("reverse process produced a non-finite value at step {t}")));
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddpm::make_schedule;
    use crate::ddpm::net::DenoiserConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> Denoiser {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        Denoiser::init_dense(DenoiserConfig { n: 2, hidden: vec![5], time_dim: 4 }, &mut rng)
    }

    #[test]
    fn deterministic_sampling_repeats() {
        let m = model();
        let sched = NoiseSchedule::default_for(20).unwrap();
        let cond = ndarray::array![[0.1, -0.2], [1.0, 0.3]];
        let opts = SampleOptions { deterministic: true, ..Default::default() };
        let a = sample(&m, &sched, cond.view(), &mut ChaCha8Rng::seed_from_u64(9), &opts).unwrap();
        let b = sample(&m, &sched, cond.view(), &mut ChaCha8Rng::seed_from_u64(9), &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_step_matches_update_rule() {
        let m = model();
        let sched = NoiseSchedule::from_betas(vec![0.3]).unwrap();
        let cond = ndarray::array![[0.5, -0.5]];
        let got = sample(&m, &sched, cond.view(), &mut ChaCha8Rng::seed_from_u64(2), &SampleOptions::default()).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x_t = Array2::from_shape_simple_fn((1, 2), || rng.sample::<f64, _>(StandardNormal));
        let eps = m.forward(x_t.view(), &[1], cond.view()).unwrap();
        // ᾱ_1 = α_1 = 0.7, so β/√(1−ᾱ) = 0.3/√0.3
        for i in 0..2 {
            let expect = (x_t[[0, i]] - 0.3 / 0.3f64.sqrt() * eps[[0, i]]) / 0.7f64.sqrt();
            assert!((got[[0, i]] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let m = model();
        let sched = make_schedule(10, 1e-2, 0.3).unwrap();
        let cond = Array2::zeros((1, 3));
        assert!(sample(&m, &sched, cond.view(), &mut ChaCha8Rng::seed_from_u64(0), &SampleOptions::default()).is_err());
    }
}

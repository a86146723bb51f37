//! Teach the diffusion model a two-point distribution picked by its
//! condition, then sample from each mode.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wncs_alloc::ddpm::{sample, train, DenoiserConfig, NoiseSchedule, SampleOptions, TrainConfig, TrainingSet};

fn main() -> wncs_alloc::Result<()> {
    let x0 = Array2::from_shape_fn((2000, 1), |(r, _)| if r % 2 == 0 { 0.8 } else { -0.8 });
    let set = TrainingSet::new(x0.clone(), x0.mapv(f64::signum))?;
    let sched = NoiseSchedule::default_for(100)?;
    let arch = DenoiserConfig { n: 1, hidden: vec![64, 64], time_dim: 16 };
    let tc = TrainConfig { epochs: 20, learning_rate: 1e-3, min_learning_rate: 1e-5, ..TrainConfig::default() };
    let model = train(&set, &arch, &sched, &tc, |log| println!("epoch {:>2}: loss {:.4}", log.epoch + 1, log.mean_loss))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for c in [1.0, -1.0] {
        let cond = Array2::from_elem((500, 1), c);
        let xs = sample(&model.ema, &sched, cond.view(), &mut rng, &SampleOptions::default())?;
        let mean = xs.mean().unwrap();
        let std = xs.std(0.0);
        println!("condition {c:+}: sample mean {mean:+.3}, std {std:.3} (target {:+.1})", 0.8 * c);
    }
    Ok(())
}

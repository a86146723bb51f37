//! Decision latency against network size for the solver and for the
//! diffusion sampler. Latency depends on shapes only, so the network here is
//! untrained.
//!
//!     cargo run --release --example scaling -- [reps]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wncs_alloc::dataset::{BlocklengthCodec, ConditionStats};
use wncs_alloc::ddpm::{DdpmConfig, Denoiser, ModelCheckpoint, SampleOptions, TrainConfig};
use wncs_alloc::eval::{timing_benchmark, DdpmDecider, Decider, SolverDecider};
use wncs_alloc::SystemConfig;

fn main() -> wncs_alloc::Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let ns = [8, 16, 32, 64];
    let base = SystemConfig::default();

    let solver = timing_benchmark("solver", &ns, &base, reps, 0, |cfg| Ok(Box::new(SolverDecider { cfg: cfg.clone() }) as Box<dyn Decider>))?;
    let ddpm = timing_benchmark("ddpm", &ns, &base, reps, 0, |cfg| {
        let ddpm = DdpmConfig::default();
        let params = Denoiser::init(ddpm.denoiser(cfg.node_count), &mut ChaCha8Rng::seed_from_u64(0));
        let ckpt = ModelCheckpoint {
            ema: params.clone(),
            params,
            schedule: ddpm.schedule()?,
            condition: ConditionStats { mean_db: vec![-100.0; cfg.node_count], std_db: vec![10.0; cfg.node_count] },
            codec: BlocklengthCodec::from_config(cfg)?,
            system: cfg.clone(),
            ddpm,
            train: TrainConfig::default(),
            epoch_losses: Vec::new(),
        };
        Ok(Box::new(DdpmDecider { ckpt, rng: ChaCha8Rng::seed_from_u64(1), opts: SampleOptions::default() }) as Box<dyn Decider>)
    })?;

    println!("{:>4} {:>14} {:>14}", "N", "solver [ms]", "ddpm [ms]");
    for (s, d) in solver.iter().zip(&ddpm) {
        println!("{:>4} {:>14.3} {:>14.3}", s.n, s.mean_s * 1e3, d.mean_s * 1e3);
    }
    Ok(())
}

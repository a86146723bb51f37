//! Generate a training corpus, train the diffusion model, and compare it
//! with the solver and a random baseline on held-out frames.
//!
//!     cargo run --release --example end_to_end -- [frames] [epochs] [lr]

use std::time::Instant;

use wncs_alloc::dataset::{generate_dataset, DatasetOptions};
use wncs_alloc::ddpm::{train, DdpmConfig, ModelCheckpoint, TrainConfig, TrainingSet};
use wncs_alloc::eval::{evaluate_policies, qq_two_sample, regression_slope, EvalOptions, Policy};
use wncs_alloc::SystemConfig;

fn main() -> wncs_alloc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let frames = arg(0, 5000.0) as usize;
    let epochs = arg(1, 100.0) as usize;
    let lr = arg(2, 1e-3);

    let sys = SystemConfig { node_count: 8, ..SystemConfig::default() };
    let clock = Instant::now();
    let data = generate_dataset(&sys, &DatasetOptions { frames, seed: 1, ..DatasetOptions::default() })?;
    println!("dataset: {} frames in {:.1?}", data.records.len(), clock.elapsed());

    let ddpm = DdpmConfig::default();
    let tc = TrainConfig { epochs, learning_rate: lr, min_learning_rate: lr / 100.0, seed: 1, ..TrainConfig::default() };
    let set = TrainingSet::from_dataset(&data)?;
    let sched = ddpm.schedule()?;
    let clock = Instant::now();
    let trained = train(&set, &ddpm.denoiser(sys.node_count), &sched, &tc, |log| {
        if log.epoch % 10 == 0 || log.epoch + 1 == epochs {
            println!("epoch {:>3}: loss {:.4}", log.epoch + 1, log.mean_loss);
        }
    })?;
    println!("trained in {:.1?}", clock.elapsed());

    let ckpt = ModelCheckpoint {
        params: trained.params,
        ema: trained.ema,
        schedule: sched,
        condition: data.meta.condition.clone(),
        codec: data.meta.codec,
        system: sys.clone(),
        ddpm,
        train: tc,
        epoch_losses: trained.epoch_losses,
    };
    // Noise-free reverse steps: an undershoot of a few symbols on a strong
    // link can multiply its power, and the injected noise causes those.
    let opts = EvalOptions { seeds: 5, episodes: 100, seed: 1_000_000, deterministic: true, ..EvalOptions::default() };
    let rs = evaluate_policies(&[Policy::Solver, Policy::Ddpm, Policy::Random], &sys, &opts, Some(&ckpt))?;

    // paired on frames the solver could decide
    let (mut solver_p, mut ddpm_p) = (0.0, 0.0);
    for (s, d) in rs[0].episodes.iter().zip(&rs[1].episodes) {
        if let (Some(a), Some(b)) = (&s.score, &d.score) {
            solver_p += a.total_power_w;
            ddpm_p += b.total_power_w;
        }
    }
    for r in &rs {
        println!(
            "{:>6}: mean power {:.4e} W, any-violation rate {:.4}",
            r.policy,
            r.mean_power_w(),
            r.any_violation_rate()
        );
    }
    let qq = qq_two_sample(&rs[0].all_blocklengths(), &rs[1].all_blocklengths(), 200)?;
    println!("ddpm/solver power ratio {:.4}", ddpm_p / solver_p);
    println!("Q-Q slope {:.4}", regression_slope(&qq)?);
    Ok(())
}

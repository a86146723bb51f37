//! Solve one frame exactly and with a shrinking schedule budget, showing how
//! the allocation trades power for air time.
//!
//!     cargo run --example solve_network -- [nodes] [seed]

use wncs_alloc::channel::ChannelSim;
use wncs_alloc::solver::{solve_network, solve_network_c1};
use wncs_alloc::SystemConfig;

fn main() -> wncs_alloc::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let n = *args.first().unwrap_or(&8) as usize;
    let seed = *args.get(1).unwrap_or(&0);
    let cfg = SystemConfig { node_count: n, ..SystemConfig::default() };
    let gains = ChannelSim::new(&cfg, seed).next_gains();

    let free = solve_network(&gains, &cfg)?;
    println!("node      m       k     tx [W]    avg [W]");
    for a in &free.nodes {
        println!("{:>4} {:>6} {:>7} {:>10.3e} {:>10.3e}", a.node_id + 1, a.m, a.k, a.tx_power_w, a.avg_power_w);
    }
    println!("total {:.4e} W using {:.3} of the frame", free.total_avg_power_w, free.schedule_usage);

    let c1: Vec<f64> = gains.iter().map(|&g| cfg.c1_for_gain(g)).collect();
    for frac in [0.8, 0.6, 0.4, 0.2] {
        let tight = SystemConfig { schedulability_budget: free.schedule_usage * frac, ..cfg.clone() };
        match solve_network_c1(&c1, &tight) {
            Ok((a, trace)) => println!(
                "budget {:.3}: {:.4e} W ({} repair steps, {} refinements), m = {:?}",
                tight.schedulability_budget,
                a.total_avg_power_w,
                trace.usage_after_step.len(),
                trace.refinement_moves,
                a.blocklengths()
            ),
            Err(e) => println!("budget {:.3}: {e}", tight.schedulability_budget),
        }
    }
    Ok(())
}

//! Drop nodes in the cell and follow their gains over a few frames.
//!
//!     cargo run --example channel_sim -- [nodes] [frames] [seed]

use wncs_alloc::channel::{init_topology, ChannelSim};
use wncs_alloc::SystemConfig;

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let n = *args.first().unwrap_or(&4) as usize;
    let frames = *args.get(1).unwrap_or(&5);
    let seed = *args.get(2).unwrap_or(&0);
    let cfg = SystemConfig { node_count: n, ..SystemConfig::default() };

    let topo = init_topology(&cfg, seed);
    for (i, d) in topo.distances().iter().enumerate() {
        println!("node {}: {d:.1} m from the controller", i + 1);
    }
    let mut sim = ChannelSim::new(&cfg, seed);
    for f in 0..frames {
        let db: Vec<String> = sim.next_gains().iter().map(|g| format!("{:7.2}", 10.0 * g.log10())).collect();
        println!("frame {f}: gains [dB] {}", db.join(" "));
    }
}

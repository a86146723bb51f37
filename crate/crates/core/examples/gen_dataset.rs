//! Label simulated frames with the solver and write the corpus to disk.
//!
//!     cargo run --release --example gen_dataset -- out.csv [nodes] [frames]

use std::path::PathBuf;

use wncs_alloc::dataset::{generate_dataset, write_dataset, DatasetOptions};
use wncs_alloc::SystemConfig;

fn main() -> wncs_alloc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.first().map(String::as_str).unwrap_or("dataset.csv"));
    let n = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let frames = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);

    let cfg = SystemConfig { node_count: n, ..SystemConfig::default() };
    let data = generate_dataset(&cfg, &DatasetOptions { frames, ..DatasetOptions::default() })?;
    write_dataset(&out, &data)?;

    let cond = &data.meta.condition;
    println!("{} frames, {} skipped as infeasible", data.records.len(), data.meta.skipped_frames.len());
    println!("gain mean [dB] per node: {:?}", cond.mean_db.iter().map(|v| v.round()).collect::<Vec<_>>());
    let mean_m: f64 = data.records.iter().flat_map(|r| r.m_opt.iter()).map(|&m| m as f64).sum::<f64>()
        / (data.records.len() * n) as f64;
    println!("mean optimal blocklength {mean_m:.2}; written to {}", out.display());
    Ok(())
}

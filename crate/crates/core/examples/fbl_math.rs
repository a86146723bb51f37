//! Walk one link through the finite-blocklength model: for each blocklength,
//! the transmissions per MATI window it needs and what that costs on average.
//!
//!     cargo run --example fbl_math -- [gain_db]

use wncs_alloc::fbl;
use wncs_alloc::solver::solve_per_node;
use wncs_alloc::SystemConfig;

fn main() -> wncs_alloc::Result<()> {
    let gain_db: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(-95.0);
    let cfg = SystemConfig::default();
    let c1 = cfg.c1_for_gain(10f64.powf(gain_db / 10.0));
    let (lo, hi) = fbl::feasible_m_range(c1, &cfg)?;
    println!("gain {gain_db} dB -> c1 = {c1:.3e} W, admissible m in [{lo}, {hi}]");
    println!("{:>4} {:>6} {:>10} {:>10} {:>12}", "m", "k*", "p", "tx [W]", "avg [W]");
    let best = solve_per_node(c1, &cfg)?;
    for m in (lo..=hi).step_by(((hi - lo) / 12).max(1) as usize) {
        let op = fbl::operating_point(m, c1, &cfg)?;
        println!(
            "{m:>4} {:>6} {:>10.3e} {:>10.3e} {:>12.4e}",
            op.schedule.k, op.schedule.error_prob, op.tx_power_w, op.avg_power_w
        );
    }
    println!("power-minimal blocklength: {best}");
    Ok(())
}

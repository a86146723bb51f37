use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::stats::{ecdf_points, mean_std, normal_plotting_quantile, qq_two_sample, regression_slope};
use super::{Policy, PolicyResult, TimingResult};
use crate::dataset::write_atomic;
use crate::error::{Error, Result};
use crate::fbl::Constraint;

pub const REPORT_FILES: [&str; 5] =
    ["avg_power_vs_n.csv", "qq_true_vs_generated.csv", "violations_vs_n.csv", "timing_vs_n.csv", "summary.json"];

const QQ_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub policy: Policy,
    pub n: usize,
    pub episodes: usize,
    pub failed_decisions: usize,
    pub mean_power_w: f64,
    pub std_power_w: f64,
    pub any_violation_rate: f64,
    pub violation_rates: BTreeMap<String, f64>,
    pub mean_projected_power_w: Option<f64>,
    pub decision_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub entries: Vec<SummaryEntry>,
    /// Slope of generated against solver blocklength quantiles, per N.
    pub qq_slope: BTreeMap<usize, f64>,
    pub timing: Vec<TimingResult>,
}

fn summarize(r: &PolicyResult) -> SummaryEntry {
    let powers = r.powers();
    let (mean, std) = if powers.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&powers) };
    let projected: Vec<f64> = r.episodes.iter().filter_map(|e| e.projected_power_w).collect();
    SummaryEntry {
        policy: r.policy,
        n: r.n,
        episodes: r.total_episodes(),
        failed_decisions: r.failed_decisions(),
        mean_power_w: mean,
        std_power_w: std,
        any_violation_rate: r.any_violation_rate(),
        violation_rates: r.violation_rates().into_iter().map(|(c, v)| (c.label().to_string(), v)).collect(),
        mean_projected_power_w: (!projected.is_empty()).then(|| mean_std(&projected).0),
        decision_time_s: r.decision_time_s,
    }
}

/// Write the CSV tables and `summary.json` into `out_dir`.
///
/// Everything is computed before the first write, so invalid input leaves
/// no partial output behind.
pub fn report(results: &[PolicyResult], timings: &[TimingResult], out_dir: &Path) -> Result<Summary> {
    if results.is_empty() {
        return Err(Error::Domain("nothing to report: no policy results".into()));
    }
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let entries: Vec<SummaryEntry> = results.iter().map(summarize).collect();

    let mut avg = String::from("policy,n,mean_power_w,std_power_w,decided,episodes\n");
    for (e, r) in entries.iter().zip(results) {
        writeln!(avg, "{},{},{:e},{:e},{},{}", e.policy, e.n, e.mean_power_w, e.std_power_w, r.powers().len(), e.episodes)
            .unwrap();
    }
    files.push((out_dir.join("avg_power_vs_n.csv"), avg));

    let mut viol = String::from("policy,n,episodes,failed_decisions,any_violation_rate");
    for c in Constraint::ALL {
        write!(viol, ",{}_rate", c.label()).unwrap();
    }
    viol.push('\n');
    for e in &entries {
        write!(viol, "{},{},{},{},{}", e.policy, e.n, e.episodes, e.failed_decisions, e.any_violation_rate).unwrap();
        for c in Constraint::ALL {
            write!(viol, ",{}", e.violation_rates[c.label()]).unwrap();
        }
        viol.push('\n');
    }
    files.push((out_dir.join("violations_vs_n.csv"), viol));

    let mut by_policy: BTreeMap<Policy, Vec<&PolicyResult>> = BTreeMap::new();
    for r in results {
        by_policy.entry(r.policy).or_default().push(r);
    }
    for (policy, rs) in &by_policy {
        let mut ecdf = String::from("n,power_w,cdf\n");
        for r in rs {
            let powers = r.powers();
            if powers.is_empty() {
                continue;
            }
            for (x, f) in ecdf_points(&powers)? {
                writeln!(ecdf, "{},{:e},{}", r.n, x, f).unwrap();
            }
        }
        files.push((out_dir.join(format!("ecdf_{policy}.csv")), ecdf));
    }

    let mut qq = String::from("n,normal_quantile,true_quantile,generated_quantile\n");
    let mut qq_slope = BTreeMap::new();
    for truth in by_policy.get(&Policy::Solver).into_iter().flatten() {
        let Some(gen) = by_policy.get(&Policy::Ddpm).and_then(|g| g.iter().find(|g| g.n == truth.n)) else {
            continue;
        };
        let (t, g) = (truth.all_blocklengths(), gen.all_blocklengths());
        if t.len() < 2 || g.is_empty() {
            continue;
        }
        let Ok(points) = qq_two_sample(&t, &g, QQ_POINTS) else { continue };
        for (i, (a, b)) in points.iter().enumerate() {
            writeln!(qq, "{},{},{},{}", truth.n, normal_plotting_quantile(i + 1, QQ_POINTS), a, b).unwrap();
        }
        if let Ok(s) = regression_slope(&points) {
            qq_slope.insert(truth.n, s);
        }
    }
    files.push((out_dir.join("qq_true_vs_generated.csv"), qq));

    let mut timing = String::from("policy,n,mean_s,std_s,reps\n");
    for t in timings {
        writeln!(timing, "{},{},{:e},{:e},{}", t.policy, t.n, t.mean_s, t.std_s, t.reps).unwrap();
    }
    files.push((out_dir.join("timing_vs_n.csv"), timing));

    let summary = Summary { entries, qq_slope, timing: timings.to_vec() };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
    files.push((out_dir.join("summary.json"), json));

    for (path, text) in files {
        write_atomic(&path, text.as_bytes())?;
    }
    Ok(summary)
}

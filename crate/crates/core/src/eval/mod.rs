//! Paired comparison of allocation policies on simulated channels.
//!
//! An episode is one frame: the fading advances one step and each policy
//! picks blocklengths for it. A seed is one topology and shadowing draw.
//! Every policy sees the same gain trajectories and is scored with the same
//! formulas on the true gains.

mod report;
mod stats;

pub use report::{report, REPORT_FILES};
pub use stats::{
    ecdf_points, mean_std, normal_plotting_quantile, qq_points, qq_two_sample, quantile_sorted, regression_slope,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSim;
use crate::config::SystemConfig;
use crate::dataset::derive_seed;
use crate::ddpm::{ModelCheckpoint, SampleOptions};
use crate::error::{Error, Result};
use crate::fbl::{self, Constraint};
use crate::solver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Solver,
    Ddpm,
    Random,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Solver, Policy::Ddpm, Policy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Solver => "solver",
            Policy::Ddpm => "ddpm",
            Policy::Random => "random",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Policy::Solver => 0,
            Policy::Ddpm => 1,
            Policy::Random => 2,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "solver" => Ok(Policy::Solver),
            "ddpm" => Ok(Policy::Ddpm),
            "random" => Ok(Policy::Random),
            other => Err(Error::Usage(format!("unknown policy `{other}` (expected solver, ddpm or random)"))),
        }
    }
}

/// The `[eval]` config table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub seeds: usize,
    pub episodes: usize,
    pub ns: Vec<usize>,
    pub policies: Vec<Policy>,
    /// Base seed; seed index `s` simulates with `derive_seed(seed, s)`.
    pub seed: u64,
    pub timing_reps: usize,
    pub deterministic: bool,
    /// Also score each decision after projecting it onto the feasible set.
    pub project_feasible: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            seeds: 50,
            episodes: 2500,
            ns: vec![8, 16, 32, 64],
            policies: Policy::ALL.to_vec(),
            seed: 0,
            timing_reps: 20,
            deterministic: false,
            project_feasible: false,
        }
    }
}

/// Uniform blocklengths over `[1, M_th]`.
pub fn random_policy<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<u32> {
    let cap = cfg.blocklength_cap_symbols.max(1);
    (0..cfg.node_count).map(|_| rng.random_range(1..=cap)).collect()
}

/// Outcome of applying one blocklength vector to one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeScore {
    pub total_power_w: f64,
    pub violated: Vec<Constraint>,
    /// Nodes whose blocklength admits no transmissions-per-window count;
    /// they are scored with a single transmission at the MATI error target.
    pub fallback_nodes: usize,
}

impl EpisodeScore {
    pub fn any_violation(&self) -> bool {
        !self.violated.is_empty()
    }
}

/// Derive the schedule for each blocklength and score the allocation.
///
/// Transmit power enters the average-power total capped at the power
/// limit, so an infeasible choice is charged at most what the radio can
/// deliver; the cap violation itself is reported separately.
pub fn score_blocklengths(ms: &[u32], c1s: &[f64], cfg: &SystemConfig) -> Result<EpisodeScore> {
    if ms.len() != c1s.len() {
        return Err(Error::Shape(format!("{} blocklengths for {} links", ms.len(), c1s.len())));
    }
    let n = ms.len();
    let (mut h, mut p, mut power) = (Vec::with_capacity(n), Vec::with_capacity(n), 0.0);
    let mut fallback_nodes = 0;
    for (&m, &c1) in ms.iter().zip(c1s) {
        let k = match fbl::k_star(m, c1, cfg) {
            Ok(k) => k,
            Err(Error::InfeasibleBlocklength { .. }) => {
                fallback_nodes += 1;
                1
            }
            Err(e) => return Err(e),
        };
        let sched = fbl::schedule_from_k(k, cfg);
        let tx = if m == 0 {
            cfg.max_tx_power_w
        } else {
            fbl::tx_power(m, sched.error_prob, c1, cfg.packet_bits as f64)?.min(cfg.max_tx_power_w)
        };
        power += fbl::duty_cycle_power(m, k, tx, cfg);
        h.push(sched.sampling_period_s);
        p.push(sched.error_prob);
    }
    let report = fbl::check_constraints(&h, ms, &p, c1s, cfg);
    Ok(EpisodeScore { total_power_w: power, violated: report.violated(), fallback_nodes })
}

/// Move each blocklength into its link's feasible range; if the budget is
/// still exceeded, fall back to the solver's allocation.
pub fn project_feasible(ms: &[u32], c1s: &[f64], cfg: &SystemConfig) -> Result<Vec<u32>> {
    let mut out = Vec::with_capacity(ms.len());
    for (&m, &c1) in ms.iter().zip(c1s) {
        let (lo, hi) = fbl::feasible_m_range(c1, cfg)?;
        let mut m = m.clamp(lo, hi);
        // k_star may fail or the packet may overrun its period inside the
        // range; walk up to the nearest admissible value.
        while m < hi && !matches!(fbl::k_star(m, c1, cfg), Ok(k) if (m as f64 / cfg.bandwidth_hz) <= cfg.mati_s / k as f64) {
            m += 1;
        }
        out.push(m);
    }
    let score = score_blocklengths(&out, c1s, cfg)?;
    if score.any_violation() {
        let c1_gains: Vec<f64> = c1s.to_vec();
        return Ok(solver::solve_network_c1(&c1_gains, cfg)?.0.blocklengths());
    }
    Ok(out)
}

/// One policy's decisions for one node count, in seed-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub policy: Policy,
    pub n: usize,
    pub seeds: usize,
    pub episodes_per_seed: usize,
    pub episodes: Vec<EpisodeResult>,
    /// Mean wall time per decision. Batched policies report batch time
    /// divided by batch size.
    pub decision_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed_index: usize,
    pub episode: usize,
    /// `None` when the policy produced no decision (the solver on a frame
    /// with no feasible allocation).
    pub blocklengths: Option<Vec<u32>>,
    pub score: Option<EpisodeScore>,
    pub projected_power_w: Option<f64>,
}

impl PolicyResult {
    pub fn total_episodes(&self) -> usize {
        self.seeds * self.episodes_per_seed
    }

    pub fn decided(&self) -> impl Iterator<Item = (&EpisodeResult, &EpisodeScore)> {
        self.episodes.iter().filter_map(|e| e.score.as_ref().map(|s| (e, s)))
    }

    pub fn failed_decisions(&self) -> usize {
        self.episodes.iter().filter(|e| e.score.is_none()).count()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.decided().map(|(_, s)| s.total_power_w).collect()
    }

    pub fn mean_power_w(&self) -> f64 {
        let p = self.powers();
        if p.is_empty() {
            f64::NAN
        } else {
            mean_std(&p).0
        }
    }

    /// Episodes with at least one violated constraint, over all episodes.
    pub fn any_violation_rate(&self) -> f64 {
        self.decided().filter(|(_, s)| s.any_violation()).count() as f64 / self.total_episodes() as f64
    }

    pub fn violation_rates(&self) -> BTreeMap<Constraint, f64> {
        let total = self.total_episodes() as f64;
        Constraint::ALL
            .into_iter()
            .map(|c| (c, self.decided().filter(|(_, s)| s.violated.contains(&c)).count() as f64 / total))
            .collect()
    }

    pub fn all_blocklengths(&self) -> Vec<f64> {
        self.episodes
            .iter()
            .filter_map(|e| e.blocklengths.as_ref())
            .flat_map(|ms| ms.iter().map(|&m| m as f64))
            .collect()
    }
}

fn check_policy_inputs(policy: Policy, cfg: &SystemConfig, ckpt: Option<&ModelCheckpoint>) -> Result<()> {
    if policy == Policy::Ddpm {
        match ckpt {
            Some(c) => c.check_compatible(cfg)?,
            None => return Err(Error::Usage("the ddpm policy needs a checkpoint".into())),
        }
    }
    Ok(())
}

/// Evaluate several policies on the same channel trajectories at the node
/// count of `cfg`.
///
/// Seeds run in parallel; each seed's results depend only on its index,
/// so the output does not depend on thread count.
pub fn evaluate_policies(
    policies: &[Policy],
    cfg: &SystemConfig,
    opts: &EvalOptions,
    ckpt: Option<&ModelCheckpoint>,
) -> Result<Vec<PolicyResult>> {
    cfg.validate()?;
    if policies.is_empty() {
        return Err(Error::Usage("no policies to evaluate".into()));
    }
    if opts.seeds == 0 || opts.episodes == 0 {
        return Err(Error::Usage("evaluation needs at least one seed and one episode".into()));
    }
    for &p in policies {
        check_policy_inputs(p, cfg, ckpt)?;
    }

    let per_seed: Vec<Vec<(Vec<EpisodeResult>, f64)>> = (0..opts.seeds)
        .into_par_iter()
        .map(|s| evaluate_seed(policies, cfg, opts, ckpt, s))
        .collect::<Result<_>>()?;

    let mut out: Vec<PolicyResult> = policies
        .iter()
        .map(|&policy| PolicyResult {
            policy,
            n: cfg.node_count,
            seeds: opts.seeds,
            episodes_per_seed: opts.episodes,
            episodes: Vec::with_capacity(opts.seeds * opts.episodes),
            decision_time_s: 0.0,
        })
        .collect();
    for seed_results in per_seed {
        for (res, (episodes, time)) in out.iter_mut().zip(seed_results) {
            res.episodes.extend(episodes);
            res.decision_time_s += time;
        }
    }
    for r in &mut out {
        r.decision_time_s /= r.total_episodes() as f64;
    }
    Ok(out)
}

/// [`evaluate_policies`] for a single policy.
pub fn evaluate_policy(
    policy: Policy,
    cfg: &SystemConfig,
    opts: &EvalOptions,
    ckpt: Option<&ModelCheckpoint>,
) -> Result<PolicyResult> {
    Ok(evaluate_policies(&[policy], cfg, opts, ckpt)?.remove(0))
}

fn evaluate_seed(
    policies: &[Policy],
    cfg: &SystemConfig,
    opts: &EvalOptions,
    ckpt: Option<&ModelCheckpoint>,
    s: usize,
) -> Result<Vec<(Vec<EpisodeResult>, f64)>> {
    let seed = derive_seed(opts.seed, s as u64);
    let mut sim = ChannelSim::new(cfg, seed);
    let gains: Vec<Vec<f64>> = (0..opts.episodes).map(|_| sim.next_gains()).collect();
    let c1s: Vec<Vec<f64>> = gains.iter().map(|g| g.iter().map(|&x| cfg.c1_for_gain(x)).collect()).collect();

    let mut out = Vec::with_capacity(policies.len());
    for &policy in policies {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(16 + policy.stream());
        let start = Instant::now();
        let decisions: Vec<Option<Vec<u32>>> = match policy {
            Policy::Solver => gains
                .iter()
                .map(|g| match solver::solve_network(g, cfg) {
                    Ok(a) => Ok(Some(a.blocklengths())),
                    Err(Error::InfeasibleLink { .. } | Error::NetworkInfeasible { .. }) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<_>>()?,
            Policy::Random => gains.iter().map(|_| Some(random_policy(cfg, &mut rng))).collect(),
            Policy::Ddpm => {
                let ckpt = ckpt.expect("checked above");
                let sopts = SampleOptions {
                    deterministic: opts.deterministic,
                    posterior_variance: ckpt.ddpm.posterior_variance,
                    ..SampleOptions::default()
                };
                ckpt.sample_gains(&gains, &mut rng, &sopts)?.1.into_iter().map(Some).collect()
            }
        };
        let elapsed = start.elapsed().as_secs_f64();

        let mut episodes = Vec::with_capacity(opts.episodes);
        for (e, (ms, c1)) in decisions.into_iter().zip(&c1s).enumerate() {
            let score = ms.as_ref().map(|ms| score_blocklengths(ms, c1, cfg)).transpose()?;
            let projected_power_w = match (&ms, opts.project_feasible) {
                (Some(ms), true) => match project_feasible(ms, c1, cfg) {
                    Ok(pm) => Some(score_blocklengths(&pm, c1, cfg)?.total_power_w),
                    Err(Error::InfeasibleLink { .. } | Error::NetworkInfeasible { .. }) => None,
                    Err(err) => return Err(err),
                },
                _ => None,
            };
            episodes.push(EpisodeResult { seed_index: s, episode: e, blocklengths: ms, score, projected_power_w });
        }
        out.push((episodes, elapsed));
    }
    Ok(out)
}

/// A policy that maps one frame's gains to blocklengths.
pub trait Decider {
    fn decide(&mut self, gains: &[f64]) -> Result<Vec<u32>>;
}

pub struct SolverDecider {
    pub cfg: SystemConfig,
}

impl Decider for SolverDecider {
    fn decide(&mut self, gains: &[f64]) -> Result<Vec<u32>> {
        Ok(solver::solve_network(gains, &self.cfg)?.blocklengths())
    }
}

pub struct RandomDecider {
    pub cfg: SystemConfig,
    pub rng: ChaCha8Rng,
}

impl Decider for RandomDecider {
    fn decide(&mut self, _gains: &[f64]) -> Result<Vec<u32>> {
        Ok(random_policy(&self.cfg, &mut self.rng))
    }
}

pub struct DdpmDecider {
    pub ckpt: ModelCheckpoint,
    pub rng: ChaCha8Rng,
    pub opts: SampleOptions,
}

impl Decider for DdpmDecider {
    fn decide(&mut self, gains: &[f64]) -> Result<Vec<u32>> {
        let (_, mut ms) = self.ckpt.sample_gains(&[gains.to_vec()], &mut self.rng, &self.opts)?;
        Ok(ms.remove(0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingResult {
    pub policy: String,
    pub n: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub reps: usize,
}

/// Mean and std of single-decision latency for each node count.
///
/// `factory` builds the decider for a node count; gains come from a fresh
/// simulation at that count. The first decision is a discarded warm-up.
/// Frames the decider cannot solve are skipped and do not count as
/// repetitions.
pub fn timing_benchmark(
    label: &str,
    ns: &[usize],
    base: &SystemConfig,
    reps: usize,
    seed: u64,
    mut factory: impl FnMut(&SystemConfig) -> Result<Box<dyn Decider>>,
) -> Result<Vec<TimingResult>> {
    if reps < 2 {
        return Err(Error::Usage("timing needs at least 2 repetitions".into()));
    }
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let cfg = SystemConfig { node_count: n, ..base.clone() };
        cfg.validate()?;
        let mut decider = factory(&cfg)?;
        let mut sim = ChannelSim::new(&cfg, derive_seed(seed, n as u64));
        let warm = sim.next_gains();
        let _ = decider.decide(&warm);
        let mut times = Vec::with_capacity(reps);
        let mut attempts = 0;
        while times.len() < reps {
            attempts += 1;
            if attempts > 100 * reps {
                return Err(Error::Infeasible(format!("{label}: too many unsolvable frames at N = {n}")));
            }
            let g = sim.next_gains();
            let start = Instant::now();
            let r = decider.decide(&g);
            let dt = start.elapsed().as_secs_f64();
            match r {
                Ok(ms) => {
                    std::hint::black_box(ms);
                    times.push(dt);
                }
                Err(Error::InfeasibleLink { .. } | Error::NetworkInfeasible { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let (mean_s, std_s) = mean_std(&times);
        out.push(TimingResult { policy: label.to_string(), n, mean_s, std_s, reps });
    }
    Ok(out)
}

//! Blocklength allocation.
//!
//! With `k` eliminated the objective separates over nodes, so each node's
//! blocklength is found by exhaustive search over its feasible range. The
//! only coupling is the shared TDMA budget: when the per-node optima
//! overrun it, a greedy repair moves nodes down their usage/power trade-off
//! curves, cheapest extra power per unit of freed frame time first.
//!
//! [`brute_force_network`] solves the original problem (sampling period,
//! error probability and blocklength per node) by enumeration for small
//! instances and serves as the reference for both steps above.

use std::cmp::Ordering;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::fbl::{self, ConstraintReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeAllocation {
    pub node_id: usize,
    pub m: u32,
    pub k: u64,
    pub h_s: f64,
    pub p: f64,
    pub tx_power_w: f64,
    pub avg_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub nodes: Vec<NodeAllocation>,
    pub total_avg_power_w: f64,
    pub schedule_usage: f64,
    pub report: ConstraintReport,
}

impl Allocation {
    /// Build from explicit `(m, k)` pairs per node.
    pub fn from_points(points: &[(u32, u64)], c1s: &[f64], cfg: &SystemConfig) -> Result<Self> {
        if points.len() != c1s.len() {
            return Err(Error::Shape(format!("{} operating points for {} links", points.len(), c1s.len())));
        }
        let mut nodes = Vec::with_capacity(points.len());
        for (i, (&(m, k), &c1)) in points.iter().zip(c1s).enumerate() {
            let op = fbl::operating_point_with_k(m, k, c1, cfg)?;
            nodes.push(NodeAllocation {
                node_id: i,
                m,
                k,
                h_s: op.schedule.sampling_period_s,
                p: op.schedule.error_prob,
                tx_power_w: op.tx_power_w,
                avg_power_w: op.avg_power_w,
            });
        }
        Ok(Self::assemble(nodes, c1s, cfg))
    }

    /// Build from blocklengths, deriving `k` by [`fbl::k_star`].
    pub fn from_blocklengths(ms: &[u32], c1s: &[f64], cfg: &SystemConfig) -> Result<Self> {
        let points = ms
            .iter()
            .zip(c1s)
            .map(|(&m, &c1)| fbl::k_star(m, c1, cfg).map(|k| (m, k)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_points(&points, c1s, cfg)
    }

    fn assemble(nodes: Vec<NodeAllocation>, c1s: &[f64], cfg: &SystemConfig) -> Self {
        let h: Vec<f64> = nodes.iter().map(|n| n.h_s).collect();
        let m: Vec<u32> = nodes.iter().map(|n| n.m).collect();
        let p: Vec<f64> = nodes.iter().map(|n| n.p).collect();
        let report = fbl::check_constraints(&h, &m, &p, c1s, cfg);
        let ks: Vec<u64> = nodes.iter().map(|n| n.k).collect();
        Allocation {
            total_avg_power_w: nodes.iter().map(|n| n.avg_power_w).sum(),
            schedule_usage: fbl::schedule_usage(&m, &ks, cfg),
            nodes,
            report,
        }
    }

    pub fn blocklengths(&self) -> Vec<u32> {
        self.nodes.iter().map(|n| n.m).collect()
    }
}

/// One admissible blocklength of a node with its optimal `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    m: u32,
    k: u64,
    power: f64,
    /// `m·k`, channel uses per MATI window
    usage: u64,
}

fn node_candidates(c1: f64, cfg: &SystemConfig) -> Result<Vec<Candidate>> {
    let (lo, hi) = fbl::feasible_m_range(c1, cfg)?;
    let mut out = Vec::with_capacity((hi - lo + 1) as usize);
    for m in lo..=hi {
        let Ok(k) = fbl::k_star(m, c1, cfg) else { continue };
        let period = cfg.mati_s / k as f64;
        if m as f64 / cfg.bandwidth_hz > period * (1.0 + fbl::CONSTRAINT_RTOL) {
            continue;
        }
        let op = fbl::operating_point_with_k(m, k, c1, cfg)?;
        out.push(Candidate { m, k, power: op.avg_power_w, usage: m as u64 * k });
    }
    if out.is_empty() {
        return Err(Error::InfeasibleLink { c1 });
    }
    Ok(out)
}

fn best_candidate(cands: &[Candidate]) -> Candidate {
    *cands
        .iter()
        .min_by(|a, b| a.power.total_cmp(&b.power).then(a.m.cmp(&b.m)))
        .expect("candidate list is non-empty")
}

/// Power-minimal blocklength of a single link, by exhaustive search over its
/// feasible range. Ties go to the smaller blocklength.
pub fn solve_per_node(c1: f64, cfg: &SystemConfig) -> Result<u32> {
    Ok(best_candidate(&node_candidates(c1, cfg)?).m)
}

/// Usage-ascending, power-descending trade-off curve of one node.
fn pareto_frontier(mut cands: Vec<Candidate>) -> Vec<Candidate> {
    cands.sort_by(|a, b| a.usage.cmp(&b.usage).then(a.power.total_cmp(&b.power)).then(a.m.cmp(&b.m)));
    let mut front: Vec<Candidate> = Vec::new();
    for c in cands {
        if front.last().map_or(true, |last| c.power < last.power) {
            front.push(c);
        }
    }
    front
}

fn within_budget(usage_units: u64, cfg: &SystemConfig) -> bool {
    let usage = usage_units as f64 / cfg.symbols_per_window();
    usage <= cfg.schedulability_budget * (1.0 + fbl::CONSTRAINT_RTOL)
}

/// Trace of the greedy repair, for inspection and tests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RepairTrace {
    /// Total `m·k` after each repair step.
    pub usage_after_step: Vec<u64>,
    pub refinement_moves: usize,
}

/// Allocate blocklengths for all links given their composite gains.
pub fn solve_network(gains: &[f64], cfg: &SystemConfig) -> Result<Allocation> {
    let c1s: Vec<f64> = gains.iter().map(|&g| cfg.c1_for_gain(g)).collect();
    solve_network_c1(&c1s, cfg).map(|(a, _)| a)
}

/// [`solve_network`] on `C_i1` values directly, also returning the repair
/// trace.
pub fn solve_network_c1(c1s: &[f64], cfg: &SystemConfig) -> Result<(Allocation, RepairTrace)> {
    if c1s.is_empty() {
        return Err(Error::Domain("network has no nodes".into()));
    }
    let frontiers: Vec<Vec<Candidate>> = c1s
        .iter()
        .map(|&c1| node_candidates(c1, cfg).map(pareto_frontier))
        .collect::<Result<_>>()?;

    let min_usage: u64 = frontiers.iter().map(|f| f[0].usage).sum();
    if !within_budget(min_usage, cfg) {
        return Err(Error::NetworkInfeasible {
            usage: min_usage as f64 / cfg.symbols_per_window(),
            budget: cfg.schedulability_budget,
        });
    }

    // Start at each node's power minimum: the last frontier point.
    let mut idx: Vec<usize> = frontiers.iter().map(|f| f.len() - 1).collect();
    let mut usage: u64 = frontiers.iter().zip(&idx).map(|(f, &i)| f[i].usage).sum();
    let mut trace = RepairTrace::default();

    if !within_budget(usage, cfg) {
        while !within_budget(usage, cfg) {
            let mut best: Option<(f64, u32, usize)> = None;
            for (node, (front, &i)) in frontiers.iter().zip(&idx).enumerate() {
                if i == 0 {
                    continue;
                }
                let (cur, next) = (front[i], front[i - 1]);
                let ratio = (next.power - cur.power) / (cur.usage - next.usage) as f64;
                let better = match best {
                    None => true,
                    Some((r, m, _)) => match ratio.total_cmp(&r) {
                        Ordering::Less => true,
                        Ordering::Equal => next.m < m,
                        Ordering::Greater => false,
                    },
                };
                if better {
                    best = Some((ratio, next.m, node));
                }
            }
            let Some((_, _, node)) = best else {
                return Err(Error::NetworkInfeasible {
                    usage: usage as f64 / cfg.symbols_per_window(),
                    budget: cfg.schedulability_budget,
                });
            };
            let front = &frontiers[node];
            usage -= front[idx[node]].usage - front[idx[node] - 1].usage;
            idx[node] -= 1;
            trace.usage_after_step.push(usage);
        }
        trace.refinement_moves = refine(&frontiers, &mut idx, &mut usage, cfg);
    }

    let points: Vec<(u32, u64)> = frontiers.iter().zip(&idx).map(|(f, &i)| (f[i].m, f[i].k)).collect();
    let alloc = Allocation::from_points(&points, c1s, cfg)?;
    Ok((alloc, trace))
}

/// Spend budget left over by the last repair step: repeatedly take the
/// single-node move back up the frontier with the largest power saving that
/// still fits.
fn refine(frontiers: &[Vec<Candidate>], idx: &mut [usize], usage: &mut u64, cfg: &SystemConfig) -> usize {
    let mut moves = 0;
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (node, front) in frontiers.iter().enumerate() {
            let cur = front[idx[node]];
            for (j, cand) in front.iter().enumerate().skip(idx[node] + 1) {
                let new_usage = *usage - cur.usage + cand.usage;
                if !within_budget(new_usage, cfg) {
                    break;
                }
                let saving = cur.power - cand.power;
                if best.map_or(true, |(s, _, _)| saving > s) {
                    best = Some((saving, node, j));
                }
            }
        }
        match best {
            Some((saving, node, j)) if saving > 0.0 => {
                *usage = *usage - frontiers[node][idx[node]].usage + frontiers[node][j].usage;
                idx[node] = j;
                moves += 1;
            }
            _ => return moves,
        }
    }
}

/// Which `k` values the brute-force search may use per blocklength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KRule {
    /// every `k` in `1..=k_max`
    Free,
    /// only the optimal `k` for each blocklength
    KStarOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForceLimits {
    pub max_nodes: usize,
    pub max_m_values: u32,
    pub k_max: u64,
    pub k_rule: KRule,
}

impl Default for BruteForceLimits {
    fn default() -> Self {
        BruteForceLimits { max_nodes: 5, max_m_values: 64, k_max: 64, k_rule: KRule::Free }
    }
}

/// Objective of the original problem for one node: transmit plus circuit
/// power, each weighted by the fraction of time on air.
fn original_objective(m: u32, h: f64, p: f64, c1: f64, cfg: &SystemConfig) -> Result<f64> {
    let mf = m as f64;
    let c2 = 1.0 / cfg.bandwidth_hz;
    let qinv = fbl::inv_q(p)?;
    let tx = ((qinv / mf.sqrt() + LN_2 * cfg.packet_bits as f64 / mf).exp() - 1.0) * c1 * c2 * mf / h;
    Ok(tx + c2 * cfg.circuit_power_w * mf / h)
}

#[derive(Debug, Clone, Copy)]
struct Point {
    m: u32,
    k: u64,
    power: f64,
    usage: f64,
}

/// Exact minimum of the original problem by enumeration of blocklength and
/// transmissions-per-window for every node. Only for small instances.
pub fn brute_force_network(gains: &[f64], cfg: &SystemConfig, limits: &BruteForceLimits) -> Result<Allocation> {
    let n = gains.len();
    if n == 0 {
        return Err(Error::Domain("network has no nodes".into()));
    }
    if n > limits.max_nodes {
        return Err(Error::SizeLimit(format!("{n} nodes exceeds the limit of {}", limits.max_nodes)));
    }
    if cfg.blocklength_cap_symbols > limits.max_m_values {
        return Err(Error::SizeLimit(format!(
            "{} blocklength values exceeds the limit of {}",
            cfg.blocklength_cap_symbols, limits.max_m_values
        )));
    }
    let c1s: Vec<f64> = gains.iter().map(|&g| cfg.c1_for_gain(g)).collect();

    let mut per_node: Vec<Vec<Point>> = Vec::with_capacity(n);
    for (i, &c1) in c1s.iter().enumerate() {
        let mut pts = Vec::new();
        for m in 1..=cfg.blocklength_cap_symbols {
            let ks: Vec<u64> = match limits.k_rule {
                KRule::Free => (1..=limits.k_max).collect(),
                KRule::KStarOnly => match fbl::k_star(m, c1, cfg) {
                    Ok(k) if k <= limits.k_max => vec![k],
                    _ => vec![],
                },
            };
            for k in ks {
                let s = fbl::schedule_from_k(k, cfg);
                let (h, p) = (s.sampling_period_s, s.error_prob);
                if !fbl::check_node(h, m, p, c1, cfg).feasible() {
                    continue;
                }
                let power = original_objective(m, h, p, c1, cfg)?;
                pts.push(Point { m, k, power, usage: (m as f64 / cfg.bandwidth_hz) / h });
            }
        }
        if pts.is_empty() {
            return Err(Error::Infeasible(format!("node {i} has no feasible (m, k) pair")));
        }
        // Dominated points can never be part of an optimum.
        pts.sort_by(|a, b| a.usage.total_cmp(&b.usage).then(a.power.total_cmp(&b.power)).then(a.m.cmp(&b.m)));
        let mut front: Vec<Point> = Vec::new();
        for p in pts {
            if front.last().map_or(true, |l| p.power < l.power) {
                front.push(p);
            }
        }
        per_node.push(front);
    }

    // Suffix bounds for pruning.
    let mut min_power_rest = vec![0.0; n + 1];
    let mut min_usage_rest = vec![0.0; n + 1];
    for i in (0..n).rev() {
        min_power_rest[i] = min_power_rest[i + 1] + per_node[i].iter().map(|p| p.power).fold(f64::INFINITY, f64::min);
        min_usage_rest[i] = min_usage_rest[i + 1] + per_node[i].iter().map(|p| p.usage).fold(f64::INFINITY, f64::min);
    }

    struct Search<'a> {
        per_node: &'a [Vec<Point>],
        min_power_rest: &'a [f64],
        min_usage_rest: &'a [f64],
        budget: f64,
        chosen: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }

    impl Search<'_> {
        fn visit(&mut self, depth: usize, power: f64, usage: f64) {
            if let Some((best, _)) = &self.best {
                if power + self.min_power_rest[depth] > *best * (1.0 + 1e-15) {
                    return;
                }
            }
            if usage + self.min_usage_rest[depth] > self.budget {
                return;
            }
            if depth == self.per_node.len() {
                let better = match &self.best {
                    None => true,
                    Some((b, idx)) => {
                        power < *b || (power == *b && self.ms(&self.chosen) < self.ms(idx))
                    }
                };
                if better {
                    self.best = Some((power, self.chosen.clone()));
                }
                return;
            }
            for j in 0..self.per_node[depth].len() {
                let p = self.per_node[depth][j];
                self.chosen.push(j);
                self.visit(depth + 1, power + p.power, usage + p.usage);
                self.chosen.pop();
            }
        }

        fn ms(&self, idx: &[usize]) -> Vec<u32> {
            idx.iter().enumerate().map(|(i, &j)| self.per_node[i][j].m).collect()
        }
    }

    let budget = cfg.schedulability_budget * (1.0 + fbl::CONSTRAINT_RTOL);
    let mut search = Search {
        per_node: &per_node,
        min_power_rest: &min_power_rest,
        min_usage_rest: &min_usage_rest,
        budget,
        chosen: Vec::with_capacity(n),
        best: None,
    };
    search.visit(0, 0.0, 0.0);
    let Some((_, idx)) = search.best else {
        return Err(Error::Infeasible("no combination satisfies the schedulability budget".into()));
    };
    let points: Vec<(u32, u64)> = idx.iter().enumerate().map(|(i, &j)| (per_node[i][j].m, per_node[i][j].k)).collect();
    let alloc = Allocation::from_points(&points, &c1s, cfg)?;
    if !alloc.report.feasible() {
        return Err(Error::Infeasible(format!("enumerated optimum fails its constraint check: {:?}", alloc.report.violated())));
    }
    Ok(alloc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelSim;

    fn small_cfg(n: usize) -> SystemConfig {
        SystemConfig { node_count: n, blocklength_cap_symbols: 40, ..SystemConfig::default() }
    }

    /// Naive re-evaluation of node power over the whole range, independent
    /// of the candidate machinery.
    fn naive_argmin(c1: f64, cfg: &SystemConfig) -> Option<u32> {
        let mut best: Option<(f64, u32)> = None;
        for m in 1..=cfg.max_blocklength() {
            let Ok(k) = fbl::k_star(m, c1, cfg) else { continue };
            if m as f64 / cfg.bandwidth_hz > cfg.mati_s / k as f64 {
                continue;
            }
            let p = ((1.0 - cfg.mati_confidence).ln() / k as f64).exp();
            let tx = c1 * ((fbl::inv_q(p).unwrap() / (m as f64).sqrt() + LN_2 * cfg.packet_bits as f64 / m as f64).exp() - 1.0);
            let power = m as f64 * k as f64 / (cfg.bandwidth_hz * cfg.mati_s) * (tx + cfg.circuit_power_w);
            if best.map_or(true, |(b, _)| power < b) {
                best = Some((power, m));
            }
        }
        best.map(|(_, m)| m)
    }

    #[test]
    fn per_node_matches_naive_search() {
        use rand::{Rng, SeedableRng};
        let cfg = SystemConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let c1 = 10f64.powf(rng.random_range(-12.0..-6.0));
            assert_eq!(solve_per_node(c1, &cfg).ok(), naive_argmin(c1, &cfg), "c1 = {c1:e}");
            assert_eq!(solve_per_node(c1, &cfg).unwrap(), solve_per_node(c1 * 1.0, &cfg).unwrap());
        }
    }

    #[test]
    fn singleton_range() {
        let mut cfg = SystemConfig::default();
        let c1 = 1e-9;
        let (lo, _) = fbl::feasible_m_range(c1, &cfg).unwrap();
        cfg.blocklength_cap_symbols = lo;
        assert_eq!(fbl::feasible_m_range(c1, &cfg).unwrap(), (lo, lo));
        assert_eq!(solve_per_node(c1, &cfg).unwrap(), lo);
    }

    #[test]
    fn slack_budget_keeps_per_node_optima() {
        let cfg = SystemConfig { node_count: 8, ..SystemConfig::default() };
        let mut sim = ChannelSim::new(&cfg, 4);
        let gains = sim.next_gains();
        let alloc = solve_network(&gains, &cfg).unwrap();
        for (node, &g) in alloc.nodes.iter().zip(&gains) {
            assert_eq!(node.m, solve_per_node(cfg.c1_for_gain(g), &cfg).unwrap());
        }
        assert!(alloc.schedule_usage < 0.1);
        assert!(alloc.report.feasible());
    }

    #[test]
    fn single_node_network_equals_per_node() {
        let cfg = SystemConfig { node_count: 1, ..SystemConfig::default() };
        let g = 1e-8;
        let alloc = solve_network(&[g], &cfg).unwrap();
        assert_eq!(alloc.nodes[0].m, solve_per_node(cfg.c1_for_gain(g), &cfg).unwrap());
    }

    fn unconstrained_usage(gains: &[f64], cfg: &SystemConfig) -> f64 {
        let loose = SystemConfig { schedulability_budget: 1.0, ..cfg.clone() };
        solve_network(gains, &loose).unwrap().schedule_usage
    }

    #[test]
    fn tight_budget_against_brute_force() {
        let base = small_cfg(3);
        let mut compared = 0;
        let mut agreed_infeasible = 0;
        let mut weak_links = 0;
        for seed in 0..100u64 {
            let mut sim = ChannelSim::new(&base, seed);
            let gains = sim.next_gains();
            let Ok(free) = solve_network(&gains, &base) else {
                weak_links += 1;
                continue;
            };
            // halfway between the least usage any allocation can reach and
            // the usage of the per-node optima
            let floor: u64 = gains
                .iter()
                .map(|&g| node_candidates(base.c1_for_gain(g), &base).unwrap().iter().map(|c| c.usage).min().unwrap())
                .sum();
            let floor = floor as f64 / base.symbols_per_window();
            let budget = floor + 0.5 * (unconstrained_usage(&gains, &base) - floor);
            let cfg = SystemConfig { schedulability_budget: budget, ..base.clone() };
            let greedy = solve_network(&gains, &cfg);
            let exact = brute_force_network(&gains, &cfg, &BruteForceLimits::default());
            match (greedy, exact) {
                (Ok(g), Ok(e)) => {
                    assert!(g.report.feasible());
                    assert!(g.total_avg_power_w >= free.total_avg_power_w * (1.0 - 1e-12));
                    let gap = (g.total_avg_power_w - e.total_avg_power_w) / e.total_avg_power_w;
                    assert!(gap >= -1e-9 && gap <= 0.01, "seed {seed}: gap {gap}");
                    compared += 1;
                }
                (Err(_), Err(_)) => agreed_infeasible += 1,
                (g, e) => panic!("seed {seed}: greedy {:?} vs brute force {:?}", g.map(|a| a.total_avg_power_w), e.map(|a| a.total_avg_power_w)),
            }
        }
        assert_eq!(compared + agreed_infeasible + weak_links, 100);
        assert!(compared > 50, "only {compared} feasible draws");
    }

    #[test]
    fn repair_strictly_reduces_usage() {
        let base = small_cfg(4);
        for seed in 0..30u64 {
            let mut sim = ChannelSim::new(&base, seed);
            let gains = sim.next_gains();
            let Ok(free) = solve_network(&gains, &base) else { continue };
            let cfg = SystemConfig { schedulability_budget: 0.7 * free.schedule_usage, ..base.clone() };
            let c1s: Vec<f64> = gains.iter().map(|&g| cfg.c1_for_gain(g)).collect();
            if let Ok((alloc, trace)) = solve_network_c1(&c1s, &cfg) {
                let start: u64 = free.nodes.iter().map(|n| n.m as u64 * n.k).sum();
                let mut prev = start;
                for &u in &trace.usage_after_step {
                    assert!(u < prev);
                    prev = u;
                }
                assert!(alloc.report.feasible());
            }
        }
    }

    #[test]
    fn greedy_beats_uniform_minimum_point() {
        let cfg = SystemConfig { node_count: 6, ..SystemConfig::default() };
        for seed in 0..20u64 {
            let mut sim = ChannelSim::new(&cfg, seed);
            let gains = sim.next_gains();
            let c1s: Vec<f64> = gains.iter().map(|&g| cfg.c1_for_gain(g)).collect();
            let Ok(alloc) = solve_network(&gains, &cfg) else { continue };
            let mins: Vec<u32> = c1s.iter().map(|&c1| fbl::feasible_m_range(c1, &cfg).unwrap().0).collect();
            let uniform = Allocation::from_blocklengths(&mins, &c1s, &cfg).unwrap();
            assert!(alloc.total_avg_power_w <= uniform.total_avg_power_w * (1.0 + 1e-12));
        }
    }

    #[test]
    fn impossible_budget_is_reported() {
        let cfg = SystemConfig { node_count: 3, schedulability_budget: 1e-6, ..SystemConfig::default() };
        let err = solve_network(&[1e-8, 1e-8, 1e-8], &cfg).unwrap_err();
        assert!(matches!(err, Error::NetworkInfeasible { .. }));
    }

    #[test]
    fn brute_force_single_node_matches_per_node() {
        let cfg = small_cfg(1);
        for g in [1e-6, 1e-8, 3e-10] {
            let bf = brute_force_network(&[g], &cfg, &BruteForceLimits::default()).unwrap();
            let c1 = cfg.c1_for_gain(g);
            let m = solve_per_node(c1, &cfg).unwrap();
            let p = fbl::node_avg_power(m, c1, &cfg).unwrap();
            assert!((bf.total_avg_power_w - p).abs() <= 1e-9 * p, "{} vs {p}", bf.total_avg_power_w);
        }
    }

    #[test]
    fn brute_force_guards() {
        let cfg = small_cfg(6);
        assert!(matches!(brute_force_network(&[1e-8; 6], &cfg, &BruteForceLimits::default()), Err(Error::SizeLimit(_))));
        let wide = SystemConfig::default();
        assert!(matches!(brute_force_network(&[1e-8], &wide, &BruteForceLimits::default()), Err(Error::SizeLimit(_))));
        let mut tiny_delay = small_cfg(1);
        tiny_delay.mad_s = 0.5 / tiny_delay.bandwidth_hz;
        assert!(matches!(brute_force_network(&[1e-8], &tiny_delay, &BruteForceLimits::default()), Err(Error::Infeasible(_))));
    }
}

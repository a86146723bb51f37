//! Finite-blocklength mathematics for one MATI window.
//!
//! A node sending `L`-bit packets in `m` channel uses with error probability
//! `p` needs transmit power
//!
//! ```text
//! W_tx = C1 · (exp(Q⁻¹(p)/√m + ln2·L/m) − 1),     C1 = noise power / |g|
//! ```
//!
//! Meeting the stochastic MATI with equality fixes the sampling period and
//! error probability to `h = Ω/k`, `p = (1−δ)^(1/k)` for a positive integer
//! `k`, and the cheapest such `k` for a given `m` is the smallest one whose
//! error probability keeps `W_tx` under the power cap (see [`k_star`]). That
//! leaves the blocklength as the only free variable per node.

use std::f64::consts::{LN_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Relative slack used when checking constraints that hold with equality
/// by construction.
pub const CONSTRAINT_RTOL: f64 = 1e-12;

/// Gaussian tail probability `P(Z > x)`.
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Inverse of [`q_func`] on `(0, 1)`.
///
/// Acklam's rational approximation of the normal quantile as a starting
/// point, then Halley steps on `Q(x) − p` down to double precision. Deep
/// tails where the density underflows fall back to bisection.
pub fn inv_q(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("inv_q requires 0 < p < 1, got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // 1 − p is exact for p in [0.5, 1)
    if p > 0.5 {
        return Ok(-upper_tail_quantile(1.0 - p));
    }
    Ok(upper_tail_quantile(p))
}

/// `x ≥ 0` with `Q(x) = p` for `0 < p < 0.5`.
fn upper_tail_quantile(p: f64) -> f64 {
    if p < 1e-300 {
        return bisect_q(p);
    }
    let mut x = -acklam_lower_quantile(p);
    for _ in 0..3 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let u = (q_func(x) - p) / pdf;
        let step = u / (1.0 - 0.5 * x * u);
        x += step;
        if step.abs() <= 1e-16 * x.abs() {
            break;
        }
    }
    x
}

/// Normal quantile `Φ⁻¹(p)` for `p ≤ 0.5`, relative error about 1e-9.
fn acklam_lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758276161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

fn bisect_q(p: f64) -> f64 {
    // Q(40) == 0 in double precision
    let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        if q_func(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Operating point of one node: `k` transmissions per MATI window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedSchedule {
    pub k: u64,
    pub sampling_period_s: f64,
    pub error_prob: f64,
}

/// Sampling period and error probability that meet the MATI constraint with
/// equality for `k` transmissions per window.
pub fn schedule_from_k(k: u64, cfg: &SystemConfig) -> DerivedSchedule {
    assert!(k >= 1, "k must be a positive integer");
    let kf = k as f64;
    DerivedSchedule {
        k,
        sampling_period_s: cfg.mati_s / kf,
        // log domain avoids underflow for large k
        error_prob: ((1.0 - cfg.mati_confidence).ln() / kf).exp(),
    }
}

/// Smallest `k ≥ 1` with `(1−δ)^(1/k) ≥ p_max`, i.e. the fewest
/// transmissions whose per-packet error probability may be as large as
/// `p_max` while still meeting the MATI with confidence `δ`.
pub fn k_for_error_bound(p_max: f64, mati_confidence: f64) -> f64 {
    if p_max <= 0.0 {
        return 1.0;
    }
    let ratio = (1.0 - mati_confidence).ln() / p_max.ln();
    ratio.ceil().max(1.0)
}

/// The argument of `Q` in the optimal-k expression: the largest `Q⁻¹(p)`
/// the power cap allows at blocklength `m`.
pub fn power_cap_margin(m: u32, c1: f64, cfg: &SystemConfig) -> f64 {
    let mf = m as f64;
    let sm = mf.sqrt();
    sm * (cfg.max_tx_power_w / c1).ln_1p() - LN_2 * cfg.packet_bits as f64 / sm
}

/// Fewest transmissions per MATI window that satisfy both the MATI
/// reliability and the transmit-power cap at blocklength `m`.
pub fn k_star(m: u32, c1: f64, cfg: &SystemConfig) -> Result<u64> {
    if m == 0 {
        return Err(Error::InfeasibleBlocklength { m, reason: "blocklength must be >= 1".into() });
    }
    let a = power_cap_margin(m, c1, cfg);
    if !a.is_finite() {
        return Err(Error::InfeasibleBlocklength { m, reason: format!("non-finite power margin {a}") });
    }
    let p_max = q_func(a);
    if p_max >= 1.0 - 1e-15 {
        return Err(Error::InfeasibleBlocklength {
            m,
            reason: format!("largest admissible error probability {p_max} is ~1"),
        });
    }
    let k = k_for_error_bound(p_max, cfg.mati_confidence);
    if k > cfg.k_max as f64 {
        return Err(Error::InfeasibleBlocklength {
            m,
            reason: format!("needs k = {k:e} transmissions, above k_max = {}", cfg.k_max),
        });
    }
    Ok(k as u64)
}

/// Transmit power needed for `L`-bit packets at blocklength `m` and error
/// probability `p`.
pub fn tx_power(m: u32, p: f64, c1: f64, packet_bits: f64) -> Result<f64> {
    let mf = m as f64;
    let exponent = inv_q(p)? / mf.sqrt() + LN_2 * packet_bits / mf;
    Ok(c1 * exponent.exp_m1())
}

/// Average power of a node transmitting `k` times per window: duty cycle
/// times (transmit + circuit) power.
pub fn duty_cycle_power(m: u32, k: u64, tx_power_w: f64, cfg: &SystemConfig) -> f64 {
    duty_cycle(m, k, cfg) * (tx_power_w + cfg.circuit_power_w)
}

/// Fraction of the window a node is on air: `m·k/(B·Ω)`.
pub fn duty_cycle(m: u32, k: u64, cfg: &SystemConfig) -> f64 {
    m as f64 * k as f64 / cfg.symbols_per_window()
}

/// Everything derived from a blocklength choice on one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeOperatingPoint {
    pub m: u32,
    pub schedule: DerivedSchedule,
    pub tx_power_w: f64,
    pub avg_power_w: f64,
}

pub fn operating_point(m: u32, c1: f64, cfg: &SystemConfig) -> Result<NodeOperatingPoint> {
    let k = k_star(m, c1, cfg)?;
    operating_point_with_k(m, k, c1, cfg)
}

pub fn operating_point_with_k(m: u32, k: u64, c1: f64, cfg: &SystemConfig) -> Result<NodeOperatingPoint> {
    let schedule = schedule_from_k(k, cfg);
    let tx = tx_power(m, schedule.error_prob, c1, cfg.packet_bits as f64)?;
    Ok(NodeOperatingPoint {
        m,
        schedule,
        tx_power_w: tx,
        avg_power_w: duty_cycle_power(m, k, tx, cfg),
    })
}

/// Average power of a node at blocklength `m` with the optimal `k`.
pub fn node_avg_power(m: u32, c1: f64, cfg: &SystemConfig) -> Result<f64> {
    Ok(operating_point(m, c1, cfg)?.avg_power_w)
}

/// Share of the TDMA frame used by all nodes, `Σ m_i·k_i/(B·Ω)`.
pub fn schedule_usage(ms: &[u32], ks: &[u64], cfg: &SystemConfig) -> f64 {
    assert_eq!(ms.len(), ks.len(), "blocklength and k vectors differ in length");
    ms.iter().zip(ks).map(|(&m, &k)| duty_cycle(m, k, cfg)).sum()
}

/// Integer blocklengths for which a link has a valid operating point.
///
/// The upper end is set by the MAD and the symbol cap; the lower end is the
/// first `m` whose optimal `k` exists and whose packet fits inside its
/// sampling period.
pub fn feasible_m_range(c1: f64, cfg: &SystemConfig) -> Result<(u32, u32)> {
    if !(c1 > 0.0) {
        return Err(Error::Domain(format!("c1 must be > 0, got {c1}")));
    }
    let m_max = cfg.max_blocklength();
    for m in 1..=m_max {
        if let Ok(k) = k_star(m, c1, cfg) {
            if fits_in_period(m, k, cfg) {
                return Ok((m, m_max));
            }
        }
    }
    Err(Error::InfeasibleLink { c1 })
}

fn fits_in_period(m: u32, k: u64, cfg: &SystemConfig) -> bool {
    let delay = m as f64 / cfg.bandwidth_hz;
    let period = cfg.mati_s / k as f64;
    delay <= period * (1.0 + CONSTRAINT_RTOL)
}

/// Constraints of the full allocation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Constraint {
    /// `⌊Ω/h⌋·ln p ≤ ln(1−δ)`
    MatiReliability,
    /// `0 < m/B ≤ min(Δ, h)`
    Delay,
    /// `0 < h ≤ Ω`
    SamplingPeriod,
    /// `0 < p ≤ 1`
    ErrorProbability,
    /// `m ≤ M_th`
    BlocklengthCap,
    /// transmit power `≤ W_tx,max`
    TxPower,
    /// `Σ (m/B)/h ≤ β`
    Schedulability,
}

impl Constraint {
    pub const ALL: [Constraint; 7] = [
        Constraint::MatiReliability,
        Constraint::Delay,
        Constraint::SamplingPeriod,
        Constraint::ErrorProbability,
        Constraint::BlocklengthCap,
        Constraint::TxPower,
        Constraint::Schedulability,
    ];

    /// Short column-friendly label.
    pub fn label(self) -> &'static str {
        match self {
            Constraint::MatiReliability => "mati",
            Constraint::Delay => "delay",
            Constraint::SamplingPeriod => "sampling_period",
            Constraint::ErrorProbability => "error_prob",
            Constraint::BlocklengthCap => "blocklength_cap",
            Constraint::TxPower => "tx_power",
            Constraint::Schedulability => "schedulability",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Pass flag and slack (`rhs − lhs`, non-negative when satisfied) of one
/// constraint instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub pass: bool,
    pub slack: f64,
}

impl Check {
    fn le(lhs: f64, rhs: f64) -> Check {
        let slack = rhs - lhs;
        let pass = lhs.is_finite() && rhs.is_finite() && lhs <= rhs + CONSTRAINT_RTOL * rhs.abs().max(lhs.abs());
        Check { pass, slack }
    }

    fn positive(x: f64) -> Check {
        Check { pass: x > 0.0, slack: x }
    }

    fn and(self, other: Check) -> Check {
        Check { pass: self.pass && other.pass, slack: self.slack.min(other.slack) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeChecks {
    pub mati: Check,
    pub delay: Check,
    pub sampling_period: Check,
    pub error_prob: Check,
    pub blocklength_cap: Check,
    pub tx_power: Check,
}

impl NodeChecks {
    pub fn get(&self, c: Constraint) -> Option<Check> {
        match c {
            Constraint::MatiReliability => Some(self.mati),
            Constraint::Delay => Some(self.delay),
            Constraint::SamplingPeriod => Some(self.sampling_period),
            Constraint::ErrorProbability => Some(self.error_prob),
            Constraint::BlocklengthCap => Some(self.blocklength_cap),
            Constraint::TxPower => Some(self.tx_power),
            Constraint::Schedulability => None,
        }
    }

    pub fn feasible(&self) -> bool {
        [self.mati, self.delay, self.sampling_period, self.error_prob, self.blocklength_cap, self.tx_power]
            .iter()
            .all(|c| c.pass)
    }
}

/// Literal evaluation of every constraint for an allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub nodes: Vec<NodeChecks>,
    pub schedulability: Check,
    pub usage: f64,
}

impl ConstraintReport {
    pub fn feasible(&self) -> bool {
        self.schedulability.pass && self.nodes.iter().all(NodeChecks::feasible)
    }

    /// Whether any instance of `c` failed.
    pub fn violates(&self, c: Constraint) -> bool {
        match c {
            Constraint::Schedulability => !self.schedulability.pass,
            _ => self.nodes.iter().any(|n| !n.get(c).map_or(true, |ch| ch.pass)),
        }
    }

    pub fn violated(&self) -> Vec<Constraint> {
        Constraint::ALL.into_iter().filter(|&c| self.violates(c)).collect()
    }
}

/// Check one node's local constraints (everything except schedulability).
pub fn check_node(h: f64, m: u32, p: f64, c1: f64, cfg: &SystemConfig) -> NodeChecks {
    let omega = cfg.mati_s;
    let windows = (omega / h * (1.0 + CONSTRAINT_RTOL)).floor();
    let target = (1.0 - cfg.mati_confidence).ln();
    let mati = if p > 0.0 { Check::le(windows * p.ln(), target) } else { Check::le(f64::INFINITY, target) };

    let delay_s = m as f64 / cfg.bandwidth_hz;
    let delay = Check::positive(delay_s).and(Check::le(delay_s, cfg.mad_s.min(h)));
    let sampling_period = Check::positive(h).and(Check::le(h, omega));
    let error_prob = Check::positive(p).and(Check::le(p, 1.0));
    let blocklength_cap = Check::le(m as f64, cfg.blocklength_cap_symbols as f64);

    let tx = if p > 0.0 && p < 1.0 && m > 0 {
        tx_power(m, p, c1, cfg.packet_bits as f64).unwrap_or(f64::NAN)
    } else if p == 1.0 {
        -c1
    } else {
        f64::NAN
    };
    let tx_power = Check::le(tx, cfg.max_tx_power_w);

    NodeChecks { mati, delay, sampling_period, error_prob, blocklength_cap, tx_power }
}

/// Evaluate every constraint of the allocation problem for per-node
/// sampling periods `h`, blocklengths `m` and error probabilities `p` on
/// links with the given `c1`.
pub fn check_constraints(h: &[f64], m: &[u32], p: &[f64], c1: &[f64], cfg: &SystemConfig) -> ConstraintReport {
    let n = h.len();
    assert!(
        m.len() == n && p.len() == n && c1.len() == n,
        "check_constraints needs equal-length vectors"
    );
    let nodes: Vec<NodeChecks> = (0..n).map(|i| check_node(h[i], m[i], p[i], c1[i], cfg)).collect();
    let usage: f64 = (0..n).map(|i| (m[i] as f64 / cfg.bandwidth_hz) / h[i]).sum();
    let schedulability = Check::le(usage, cfg.schedulability_budget);
    ConstraintReport { nodes, schedulability, usage }
}

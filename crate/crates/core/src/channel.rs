//! Composite channel gains: log-distance path loss with log-normal
//! shadowing, times first-order complex Gauss-Markov small-scale fading.
//!
//! Node positions and shadowing are drawn once per topology; only the
//! small-scale coefficients evolve from frame to frame.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;

/// Reference distance of the path-loss model, metres.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

const TOPOLOGY_STREAM: u64 = 1;
const FADING_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    pub radius_m: f64,
    pub angle_rad: f64,
}

impl NodePosition {
    /// Distance to the controller, clamped to the reference distance.
    pub fn distance_m(&self) -> f64 {
        self.radius_m.max(REFERENCE_DISTANCE_M)
    }
}

/// Node placement and per-node shadowing for one network realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub positions: Vec<NodePosition>,
    pub shadowing_db: Vec<f64>,
}

impl Topology {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.positions.iter().map(NodePosition::distance_m).collect()
    }

    pub fn large_scale_gains(&self, cfg: &SystemConfig) -> Vec<f64> {
        self.positions
            .iter()
            .zip(&self.shadowing_db)
            .map(|(p, &z)| large_scale_gain(p.distance_m(), z, cfg))
            .collect()
    }
}

/// Drop `cfg.node_count` nodes uniformly over the disc and draw their
/// shadowing.
pub fn init_topology(cfg: &SystemConfig, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TOPOLOGY_STREAM);
    let shadow = Normal::new(0.0, cfg.shadowing_std_db).expect("shadowing std is validated");
    let mut positions = Vec::with_capacity(cfg.node_count);
    let mut shadowing_db = Vec::with_capacity(cfg.node_count);
    for _ in 0..cfg.node_count {
        let u: f64 = rng.random();
        let angle: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        positions.push(NodePosition { radius_m: cfg.radius_m * u.sqrt(), angle_rad: angle });
        shadowing_db.push(shadow.sample(&mut rng));
    }
    Topology { positions, shadowing_db }
}

/// Linear power gain for distance `d_m` and shadowing `shadow_db`.
pub fn large_scale_gain(d_m: f64, shadow_db: f64, cfg: &SystemConfig) -> f64 {
    let d = d_m.max(REFERENCE_DISTANCE_M);
    let pl_db = cfg.pathloss_reference_db + 10.0 * cfg.pathloss_exponent * (d / REFERENCE_DISTANCE_M).log10() + shadow_db;
    10f64.powf(-pl_db / 10.0)
}

/// Circularly-symmetric complex normal with unit mean-square.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// One Gauss-Markov step: `ρ·g + √(1−ρ²)·e`.
pub fn evolve(coeff: Complex64, innovation: Complex64, rho: f64) -> Complex64 {
    coeff * rho + innovation * (1.0 - rho * rho).sqrt()
}

/// Small-scale fading coefficients of all nodes and the RNG driving them.
#[derive(Debug, Clone)]
pub struct FadingState {
    pub coeffs: Vec<Complex64>,
    pub rho: f64,
    rng: ChaCha8Rng,
}

impl FadingState {
    /// Start from the stationary distribution.
    pub fn new(n: usize, rho: f64, seed: u64) -> Self {
        assert!((0.0..1.0).contains(&rho), "fading correlation must lie in [0, 1)");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(FADING_STREAM);
        let coeffs = (0..n).map(|_| complex_normal(&mut rng)).collect();
        FadingState { coeffs, rho, rng }
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>, rho: f64, seed: u64) -> Self {
        let mut state = FadingState::new(0, rho, seed);
        state.coeffs = coeffs;
        state
    }

    pub fn step(&mut self) {
        let rho = self.rho;
        for c in &mut self.coeffs {
            let e = complex_normal(&mut self.rng);
            *c = evolve(*c, e, rho);
        }
    }

    /// `|g|²` per node.
    pub fn powers(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// One node's channel state in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeLink {
    pub node_id: usize,
    pub distance_m: f64,
    pub large_scale_gain: f64,
    pub small_scale_coeff: (f64, f64),
    pub composite_gain: f64,
    pub c1_w: f64,
}

pub fn composite_gain(topology: &Topology, fading: &FadingState, cfg: &SystemConfig) -> Vec<NodeLink> {
    assert_eq!(topology.len(), fading.coeffs.len(), "topology and fading sizes differ");
    let noise = cfg.noise_power_w();
    topology
        .positions
        .iter()
        .zip(&topology.shadowing_db)
        .zip(&fading.coeffs)
        .enumerate()
        .map(|(i, ((pos, &z), coeff))| {
            let large = large_scale_gain(pos.distance_m(), z, cfg);
            let g = large * coeff.norm_sqr();
            NodeLink {
                node_id: i,
                distance_m: pos.distance_m(),
                large_scale_gain: large,
                small_scale_coeff: (coeff.re, coeff.im),
                composite_gain: g,
                c1_w: noise / g,
            }
        })
        .collect()
}

/// A topology plus its fading process, stepped once per frame.
#[derive(Debug, Clone)]
pub struct ChannelSim {
    pub topology: Topology,
    pub fading: FadingState,
    cfg: SystemConfig,
}

impl ChannelSim {
    pub fn new(cfg: &SystemConfig, seed: u64) -> Self {
        let topology = init_topology(cfg, seed);
        let fading = FadingState::new(cfg.node_count, cfg.fading_correlation, seed);
        ChannelSim { topology, fading, cfg: cfg.clone() }
    }

    /// Advance the fading one frame and return the new links.
    pub fn next_frame(&mut self) -> Vec<NodeLink> {
        self.fading.step();
        composite_gain(&self.topology, &self.fading, &self.cfg)
    }

    pub fn next_gains(&mut self) -> Vec<f64> {
        self.next_frame().iter().map(|l| l.composite_gain).collect()
    }
}

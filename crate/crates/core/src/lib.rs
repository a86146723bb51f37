//! Power-minimal blocklength allocation for wireless networked control
//! systems, with a conditional diffusion model that learns to imitate the
//! optimizer.
//!
//! - [`fbl`]: finite-blocklength power model, optimal transmissions per
//!   window, constraint checks
//! - [`channel`]: topology, path loss, shadowing, Gauss-Markov fading
//! - [`solver`]: per-node exhaustive search, budget repair, brute force
//! - [`dataset`]: generating and storing solved frames
//! - [`ddpm`]: noise schedule, denoiser, training, sampling, checkpoints
//! - [`eval`]: policy comparison, ECDF/Q-Q statistics, timing, reports
//! - [`cli`]: the `wncs-alloc` command

pub mod channel;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod ddpm;
pub mod error;
pub mod eval;
pub mod fbl;
pub mod solver;

pub use config::{PipelineConfig, SystemConfig};
pub use error::{Error, Result};

//! Weakly supervised, payload-aware velocity estimation for legged robots.
//!
//! The crate is organised as a pipeline:
//!
//! * [`simworld`] generates terrain observations, proprioception and IMU
//!   traces from a kinematic-phenomenological quadruped model.
//! * [`dataset`] windows run logs into synchronized sequences with weak
//!   velocity labels and batches them.
//! * [`network`] holds the model: a frozen patch tokenizer, a proprioceptive
//!   encoder, proprio-conditioned attention over visual tokens, slip-based
//!   confidence and a velocity head.
//! * [`training`] implements the clamped velocity/slip objective, exact
//!   reverse-mode gradients and the optimizer loop.
//! * [`control`] runs closed-loop trials with the learned controller and the
//!   baselines.
//! * [`metrics`] computes jerk-based stability, vibration cost and the PCA
//!   variance diagnostic.

pub mod config;
pub mod control;
pub mod dataset;
mod error;
pub mod metrics;
pub mod network;
pub(crate) mod noise;
pub mod simworld;
pub mod training;
mod util;

pub use error::{Error, Result};
pub use util::{derive_seed, sha256_hex};

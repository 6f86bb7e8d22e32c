//! Simulation and control stack for a two-chamber bioreactor that regulates the
//! density and composition of a two-strain microbial consortium.
//!
//! The mixing chamber co-cultures a fast strain (`x1`) and a slow strain (`x2`);
//! a reservoir sustains a monoculture of the slow strain (`x2r`) and feeds it
//! into the mixing chamber. Three pump commands drive the system: fresh media
//! into the mixing chamber (`d1`), reservoir transfer (`d2`) and fresh media
//! into the reservoir (`dr`).
//!
//! Modules:
//! - [`plant`]: chamber dynamics, integration, measurements, perturbations.
//! - [`observer`]: extended Kalman filter reconstructing `(x1, x2)` from `x1 + x2`.
//! - [`control`]: switching, PI, MPC and DQN-policy control laws.
//! - [`rl`]: Q-network, replay buffer, environments and DQN training.
//! - [`sysid`]: open-loop trace generation and growth-parameter fitting.
//! - [`metrics`]: steady state, settling time, NRMSE, paired t-test.
//! - [`harness`]: scenarios, closed-loop runner, traces, config, statistics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod observer;
pub mod plant;
pub mod rl;
pub mod sysid;

pub use error::{Error, Result};

//! Deployable control laws for both chambers and the reference arithmetic
//! they share.

mod policy;
mod reference;
mod reservoir;
mod switching;

pub use policy::{
    dqn_mixing_action, dqn_reservoir_action, greedy, ErrorHistory, HISTORY_LEN, MIXING_ACTIONS, RESERVOIR_ACTIONS,
};
pub use reference::{desired_split, Reference, ReferenceSchedule, Schedule};
pub use reservoir::{
    compensate_reservoir, mpc_cost, mpc_reservoir, pi_reservoir, PiState, RecoveryGate, MPC_HORIZON, RECOVERY_THRESHOLD,
};
pub use switching::{classify_region, simulate_state_feedback, switching_law, Region, SwitchingGains};

//! Reservoir density control: PI, enumerated MPC, disturbance compensation
//! and the recovery gate protecting the reservoir from depletion.

use serde::{Deserialize, Serialize};

use crate::plant::PlantParams;

pub const MPC_HORIZON: usize = 5;
const MPC_GRID: usize = 17;
const MPC_DT: f64 = 1.0;
const INFEASIBLE_COST: f64 = 100.0;
const U_MAX: f64 = 0.02;

/// Reservoir density below which reservoir transfer is blocked.
pub const RECOVERY_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PiState {
    pub kp: f64,
    pub ki: f64,
    /// Accumulated error (OD min).
    pub integral: f64,
    pub u_prev: f64,
}

impl Default for PiState {
    fn default() -> Self {
        Self { kp: 0.1, ki: 0.005, integral: 0.0, u_prev: 0.0 }
    }
}

/// PI on `e = y2 - x2r_d` (positive error means dilute). The integral only
/// accumulates while the command is unsaturated or when the error pushes it
/// back off the bound.
pub fn pi_reservoir(pi: &PiState, y2: f64, x2r_d: f64, dt: f64) -> (f64, PiState) {
    let e = y2 - x2r_d;
    let raw = pi.kp * e + pi.ki * pi.integral;
    let u = raw.clamp(0.0, U_MAX);
    let integrate = (raw > 0.0 && raw < U_MAX) || (raw >= U_MAX && e < 0.0) || (raw <= 0.0 && e > 0.0);
    let integral = if integrate { pi.integral + e * dt } else { pi.integral };
    (u, PiState { integral, u_prev: u, ..*pi })
}

fn mpc_grid(p: &PlantParams) -> impl Iterator<Item = f64> + '_ {
    (0..MPC_GRID).map(move |i| p.d_max * i as f64 / (MPC_GRID - 1) as f64)
}

/// Horizon cost of holding command `u` for [`MPC_HORIZON`] one-minute steps
/// under the abundant-substrate reservoir model, plus terminal cost.
pub fn mpc_cost(x0: f64, u: f64, x2r_d: f64, p: &PlantParams) -> f64 {
    let feasible = (0.0..=U_MAX).contains(&u);
    let growth = ((p.mu2_star - p.effective(u)) * MPC_DT).exp();
    let mut x = x0;
    let mut cost = 0.0;
    for _ in 0..MPC_HORIZON {
        cost += if feasible { (x - x2r_d).powi(2) } else { INFEASIBLE_COST };
        x *= growth;
    }
    cost + (x - x2r_d).powi(2)
}

/// First move of the cheapest constant-over-horizon command on the 17-point grid.
pub fn mpc_reservoir(x2r: f64, x2r_d: f64, p: &PlantParams) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for u in mpc_grid(p) {
        let c = mpc_cost(x2r.max(0.0), u, x2r_d, p);
        if c < best.0 {
            best = (c, u);
        }
    }
    best.1
}

/// `D_R = D_R2 - D_2`, clamped to the pump range.
pub fn compensate_reservoir(d_r2: f64, d2: f64) -> f64 {
    let dr = d_r2 - d2;
    if !(0.0..=U_MAX).contains(&dr) {
        log::debug!("reservoir compensation saturated: d_r2 = {d_r2}, d2 = {d2}");
    }
    dr.clamp(0.0, U_MAX)
}

/// Latch that blocks reservoir transfer while the reservoir is below the
/// recovery threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryGate {
    pub threshold: f64,
    pub closed: bool,
}

impl Default for RecoveryGate {
    fn default() -> Self {
        Self { threshold: RECOVERY_THRESHOLD, closed: false }
    }
}

impl RecoveryGate {
    pub fn apply(&mut self, x2r: f64, d2_requested: f64) -> f64 {
        if x2r < self.threshold {
            self.closed = true;
        } else if self.closed {
            self.closed = false;
        }
        if self.closed {
            0.0
        } else {
            d2_requested
        }
    }
}

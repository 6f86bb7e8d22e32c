//! Switching law over the four regions cut by `x1 = x1_d` and `x2 = x2_d`.

use serde::{Deserialize, Serialize};

use super::reference::{desired_split, Reference};
use crate::plant::{self, ControlInput, Model, PlantParams, PlantState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// `x1` below, `x2` above.
    R1,
    /// Both above.
    R2,
    /// Both below.
    R3,
    /// `x1` above, `x2` below.
    R4,
}

/// Ties on either surface count as "below".
pub fn classify_region(x1: f64, x2: f64, x1_d: f64, x2_d: f64) -> Region {
    match (x1 > x1_d, x2 > x2_d) {
        (false, true) => Region::R1,
        (true, true) => Region::R2,
        (false, false) => Region::R3,
        (true, false) => Region::R4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchingGains {
    pub d1_plus: f64,
    pub d1_minus: f64,
    pub d2_minus: f64,
}

impl Default for SwitchingGains {
    fn default() -> Self {
        Self { d1_plus: 0.01, d1_minus: 0.01, d2_minus: 0.01 }
    }
}

impl SwitchingGains {
    pub fn uniform(d: f64) -> Self {
        Self { d1_plus: d, d1_minus: d, d2_minus: d }
    }

    /// Every effective magnitude must exceed the fast strain's maximum growth
    /// rate and every command must be admissible.
    pub fn validate(&self, p: &PlantParams) -> Result<()> {
        for (name, v) in [("d1_plus", self.d1_plus), ("d1_minus", self.d1_minus), ("d2_minus", self.d2_minus)] {
            if !(p.effective(v) > p.mu1_star) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} gives effective dilution {} <= mu1_star {}",
                    p.effective(v),
                    p.mu1_star
                )));
            }
            if v > p.d_max {
                return Err(Error::InvalidParameter(format!("{name} = {v} exceeds d_max")));
            }
        }
        Ok(())
    }
}

/// Mixing-chamber inputs for a region. `dr` is left at zero.
pub fn switching_law(region: Region, gains: &SwitchingGains) -> ControlInput {
    let (d1, d2) = match region {
        Region::R1 => (gains.d1_plus, 0.0),
        Region::R2 => (gains.d1_minus, 0.0),
        Region::R3 => (0.0, 0.0),
        Region::R4 => (0.0, gains.d2_minus),
    };
    ControlInput::new(d1, d2, 0.0)
}

/// Idealised loop: abundant-substrate model, exact state feedback, reservoir
/// held at `reference.x2r_d`, switching re-evaluated every `control_period`.
/// Returns `(t, x1, x2)` at every control instant.
pub fn simulate_state_feedback(
    initial: (f64, f64),
    reference: &Reference,
    gains: &SwitchingGains,
    p: &PlantParams,
    duration: f64,
    control_period: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    if !(control_period > 0.0) {
        return Err(Error::InvalidParameter("control_period must be > 0".into()));
    }
    let (x1_d, x2_d) = desired_split(reference)?;
    let mut state = PlantState::fresh(initial.0, initial.1, reference.x2r_d, p);
    let n = (duration / control_period).round() as usize;
    let mut out = Vec::with_capacity(n + 1);
    out.push((0.0, state.x1, state.x2));
    for k in 0..n {
        let u = switching_law(classify_region(state.x1, state.x2, x1_d, x2_d), gains);
        state = plant::step(&state, &u, p, control_period, Model::Simplified)?;
        state.x2r = reference.x2r_d;
        out.push(((k + 1) as f64 * control_period, state.x1, state.x2));
    }
    Ok(out)
}

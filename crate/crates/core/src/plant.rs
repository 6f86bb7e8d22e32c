//! Chamber dynamics for the mixing chamber and the reservoir.
//!
//! Pump commands are dimensionless device units in `[d_min, d_max]`. The
//! dilution rate seen by the ODEs is `command / tau` (1/min), which makes the
//! maximum growth rates and the dilution rates commensurable.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest internal RK4 substep (min).
pub const MAX_SUBSTEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantParams {
    /// Maximum growth rate of the fast strain (1/min).
    pub mu1_star: f64,
    /// Maximum growth rate of the slow strain (1/min).
    pub mu2_star: f64,
    /// Monod half-velocity constants.
    pub k1: f64,
    pub k2: f64,
    /// Inlet substrate concentration.
    pub s_in: f64,
    /// Actuation scaling factor: effective dilution = command / tau.
    pub tau: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Viability bounds on biomass (OD).
    pub x_min: f64,
    pub x_max: f64,
    /// Variance of the additive Gaussian OD noise.
    pub meas_noise_var: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            mu1_star: 0.021,
            mu2_star: 0.011,
            k1: 0.1,
            k2: 0.1,
            s_in: 10.0,
            tau: 0.215,
            d_min: 0.0,
            d_max: 0.02,
            x_min: 0.2,
            x_max: 1.0,
            meas_noise_var: 0.001,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        let all = [
            self.mu1_star,
            self.mu2_star,
            self.k1,
            self.k2,
            self.s_in,
            self.tau,
            self.d_min,
            self.d_max,
            self.x_min,
            self.x_max,
            self.meas_noise_var,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("plant parameters must be finite");
        }
        if !(self.mu1_star > self.mu2_star && self.mu2_star > 0.0) {
            return bad("growth rates must satisfy mu1_star > mu2_star > 0");
        }
        if !(0.0 <= self.d_min && self.d_min < self.d_max) {
            return bad("pump bounds must satisfy 0 <= d_min < d_max");
        }
        if !(0.0 < self.x_min && self.x_min < self.x_max) {
            return bad("viability bounds must satisfy 0 < x_min < x_max");
        }
        if !(self.tau > 0.0 && self.k1 > 0.0 && self.k2 > 0.0 && self.s_in > 0.0) {
            return bad("tau, k1, k2 and s_in must be positive");
        }
        if self.meas_noise_var < 0.0 {
            return bad("measurement noise variance must be non-negative");
        }
        Ok(())
    }

    /// Effective dilution rate (1/min) for a pump command.
    #[inline]
    pub fn effective(&self, command: f64) -> f64 {
        command / self.tau
    }
}

/// Concentrations in both chambers. Also used for time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    pub x1: f64,
    pub x2: f64,
    pub s1: f64,
    pub x2r: f64,
    pub s2: f64,
}

impl PlantState {
    /// Mixing chamber at `(x1, x2)`, reservoir at `x2r`, both substrates fresh.
    pub fn fresh(x1: f64, x2: f64, x2r: f64, p: &PlantParams) -> Self {
        Self { x1, x2, s1: p.s_in, x2r, s2: p.s_in }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.x1, self.x2, self.s1, self.x2r, self.s2]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self { x1: a[0], x2: a[1], s1: a[2], x2r: a[3], s2: a[4] }
    }

    fn axpy(self, h: f64, d: PlantState) -> PlantState {
        let (a, b) = (self.to_array(), d.to_array());
        Self::from_array(std::array::from_fn(|i| a[i] + h * b[i]))
    }

    fn clamp_non_negative(self) -> PlantState {
        Self::from_array(self.to_array().map(|v| v.max(0.0)))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn total_biomass(&self) -> f64 {
        self.x1 + self.x2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Fresh media into the mixing chamber.
    pub d1: f64,
    /// Reservoir to mixing chamber transfer.
    pub d2: f64,
    /// Fresh media into the reservoir.
    pub dr: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { d1: 0.0, d2: 0.0, dr: 0.0 };

    pub fn new(d1: f64, d2: f64, dr: f64) -> Self {
        Self { d1, d2, dr }
    }

    pub fn clamped(self, p: &PlantParams) -> Self {
        let c = |v: f64| v.clamp(p.d_min, p.d_max);
        Self { d1: c(self.d1), d2: c(self.d2), dr: c(self.dr) }
    }

    pub fn within(&self, p: &PlantParams) -> bool {
        [self.d1, self.d2, self.dr].iter().all(|v| (p.d_min..=p.d_max).contains(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Total mixing-chamber biomass plus noise.
    pub y1: f64,
    /// Reservoir biomass plus noise.
    pub y2: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Monod kinetics with substrate balances.
    #[default]
    Full,
    /// Abundant-substrate model; substrates held constant.
    Simplified,
}

/// Monod growth rate `mu_star * s / (k + s)`.
pub fn monod_rate(mu_star: f64, k: f64, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("substrate must be >= 0, got {s}")));
    }
    Ok(mu_star * s / (k + s))
}

fn monod(mu_star: f64, k: f64, s: f64) -> f64 {
    let s = s.max(0.0);
    mu_star * s / (k + s)
}

pub fn full_derivatives(state: &PlantState, u: &ControlInput, p: &PlantParams) -> PlantState {
    let (d1, d2, dr) = (p.effective(u.d1), p.effective(u.d2), p.effective(u.dr));
    let PlantState { x1, x2, s1, x2r, s2 } = *state;
    let mu1 = monod(p.mu1_star, p.k1, s1);
    let mu2_mix = monod(p.mu2_star, p.k2, s1);
    let mu2_res = monod(p.mu2_star, p.k2, s2);
    PlantState {
        x1: mu1 * x1 - (d1 + d2) * x1,
        x2: mu2_mix * x2 - d1 * x2 + d2 * (x2r - x2),
        s1: -mu1 * x1 - mu2_mix * x2 + d1 * (p.s_in - s1) + d2 * (s2 - s1),
        x2r: mu2_res * x2r - (dr + d2) * x2r,
        s2: -mu2_res * x2r + (dr + d2) * (p.s_in - s2),
    }
}

pub fn simplified_derivatives(state: &PlantState, u: &ControlInput, p: &PlantParams) -> PlantState {
    let (d1, d2, dr) = (p.effective(u.d1), p.effective(u.d2), p.effective(u.dr));
    let PlantState { x1, x2, x2r, .. } = *state;
    PlantState {
        x1: p.mu1_star * x1 - (d1 + d2) * x1,
        x2: p.mu2_star * x2 - d1 * x2 + d2 * (x2r - x2),
        s1: 0.0,
        x2r: p.mu2_star * x2r - (dr + d2) * x2r,
        s2: 0.0,
    }
}

pub fn derivatives(state: &PlantState, u: &ControlInput, p: &PlantParams, model: Model) -> PlantState {
    match model {
        Model::Full => full_derivatives(state, u, p),
        Model::Simplified => simplified_derivatives(state, u, p),
    }
}

/// Advances the plant by `dt` minutes with classical RK4 and substeps no
/// longer than [`MAX_SUBSTEP`].
pub fn step(state: &PlantState, u: &ControlInput, p: &PlantParams, dt: f64, model: Model) -> Result<PlantState> {
    step_with_substep(state, u, p, dt, model, MAX_SUBSTEP)
}

pub fn step_with_substep(
    state: &PlantState,
    u: &ControlInput,
    p: &PlantParams,
    dt: f64,
    model: Model,
    max_substep: f64,
) -> Result<PlantState> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be >= 0, got {dt}")));
    }
    if !(max_substep > 0.0) {
        return Err(Error::InvalidParameter("max_substep must be > 0".into()));
    }
    if !state.is_finite() {
        return Err(Error::NonFiniteState { t: 0.0 });
    }
    if dt == 0.0 {
        return Ok(*state);
    }
    let n = (dt / max_substep).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let f = |s: &PlantState| derivatives(s, u, p, model);
    let mut x = *state;
    for i in 0..n {
        let k1 = f(&x);
        let k2 = f(&x.axpy(h / 2.0, k1));
        let k3 = f(&x.axpy(h / 2.0, k2));
        let k4 = f(&x.axpy(h, k3));
        let a = x.to_array();
        let (b1, b2, b3, b4) = (k1.to_array(), k2.to_array(), k3.to_array(), k4.to_array());
        x = PlantState::from_array(std::array::from_fn(|j| {
            a[j] + h / 6.0 * (b1[j] + 2.0 * b2[j] + 2.0 * b3[j] + b4[j])
        }))
        .clamp_non_negative();
        if !x.is_finite() {
            return Err(Error::NonFiniteState { t: (i + 1) as f64 * h });
        }
    }
    Ok(x)
}

/// OD readings of both chambers with additive zero-mean Gaussian noise.
pub fn measure<R: Rng + ?Sized>(state: &PlantState, p: &PlantParams, t: f64, rng: &mut R) -> Measurement {
    let (w1, w2) = if p.meas_noise_var > 0.0 {
        let n = Normal::new(0.0, p.meas_noise_var.sqrt()).expect("finite std");
        (n.sample(rng), n.sample(rng))
    } else {
        (0.0, 0.0)
    };
    Measurement { y1: state.x1 + state.x2 + w1, y2: state.x2r + w2, t }
}

/// Injects fresh media into the mixing chamber: biomass and substrate are
/// scaled by `dilution_factor` and the added volume brings `s_in`.
pub fn apply_bolus(state: &PlantState, dilution_factor: f64, p: &PlantParams) -> Result<PlantState> {
    apply_bolus_per_strain(state, dilution_factor, dilution_factor, p)
}

/// Bolus with separate dilution factors for each strain. The substrate uses
/// the first factor.
pub fn apply_bolus_per_strain(
    state: &PlantState,
    x1_factor: f64,
    x2_factor: f64,
    p: &PlantParams,
) -> Result<PlantState> {
    for f in [x1_factor, x2_factor] {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidParameter(format!("bolus dilution factor must lie in (0, 1], got {f}")));
        }
    }
    Ok(PlantState {
        x1: state.x1 * x1_factor,
        x2: state.x2 * x2_factor,
        s1: state.s1 * x1_factor + (1.0 - x1_factor) * p.s_in,
        ..*state
    })
}

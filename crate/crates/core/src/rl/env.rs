//! Training environments. Both run the abundant-substrate model at a fixed
//! sampling interval, randomize growth rates per episode and corrupt the
//! policy features with measurement noise while rewards use the true state.

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::control::{desired_split, ErrorHistory, Reference, MIXING_ACTIONS, RESERVOIR_ACTIONS};
use crate::plant::{self, ControlInput, Model, PlantParams, PlantState};
use crate::rl::reward::{mixing_reward, reservoir_reward};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Mixing,
    Reservoir,
}

impl FromStr for EnvKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixing" => Ok(Self::Mixing),
            "reservoir" => Ok(Self::Reservoir),
            _ => Err(Error::Unknown { kind: "environment", name: s.to_string() }),
        }
    }
}

/// Discrete sets the episode set-points and initial conditions are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceSets {
    pub ratios: Vec<f64>,
    pub od_d: f64,
    /// Total biomass values the mixing initial state is split from.
    pub initial_od: Vec<f64>,
    pub reservoir: Vec<f64>,
}

impl Default for ReferenceSets {
    fn default() -> Self {
        Self {
            ratios: vec![0.5, 1.0, 1.5],
            od_d: 0.7,
            initial_od: vec![0.7],
            reservoir: (2..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

fn pick<R: Rng + ?Sized>(set: &[f64], rng: &mut R) -> f64 {
    set[rng.gen_range(0..set.len())]
}

/// Draws perturbed growth rates, a reference and a matching initial state.
///
/// Growth rates are Gaussian around nominal with standard deviation
/// `sigma_fraction * nominal`, redrawn until both are positive and the fast
/// strain stays faster.
pub fn randomize_episode<R: Rng + ?Sized>(
    p: &PlantParams,
    sets: &ReferenceSets,
    sigma_fraction: f64,
    rng: &mut R,
) -> (PlantParams, Reference, PlantState) {
    let mut params = *p;
    if sigma_fraction > 0.0 {
        let draw = |mu: f64, rng: &mut R| mu * (1.0 + sigma_fraction * rng.sample::<f64, _>(StandardNormal));
        for _ in 0..1000 {
            let (m1, m2) = (draw(p.mu1_star, rng), draw(p.mu2_star, rng));
            if m2 > 0.0 && m1 > m2 {
                params.mu1_star = m1;
                params.mu2_star = m2;
                break;
            }
        }
    }
    let reference = Reference { r_d: pick(&sets.ratios, rng), od_d: sets.od_d, x2r_d: pick(&sets.reservoir, rng) };
    let start = Reference {
        r_d: pick(&sets.ratios, rng),
        od_d: pick(&sets.initial_od, rng),
        x2r_d: pick(&sets.reservoir, rng),
    };
    let (x1, x2) = desired_split(&start).expect("ratio sets are positive");
    (params, reference, PlantState::fresh(x1, x2, start.x2r_d, &params))
}

/// Episodic environment with discrete actions and feature vectors.
pub trait Environment {
    fn n_features(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>>;
    /// Returns `(next features, reward, terminal)`.
    fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R) -> Result<(Vec<f64>, f64, bool)>;
}

fn noise<R: Rng + ?Sized>(var: f64, rng: &mut R) -> f64 {
    if var > 0.0 {
        Normal::new(0.0, var.sqrt()).expect("finite std").sample(rng)
    } else {
        0.0
    }
}

/// Mixing chamber with the reservoir frozen at `x2r`.
#[derive(Debug, Clone)]
pub struct MixingEnv {
    pub nominal: PlantParams,
    pub sets: ReferenceSets,
    pub sigma_fraction: f64,
    pub noise_var: f64,
    pub x2r: f64,
    pub dt: f64,
    pub width: f64,
    pub penalty: f64,
    pub reward_scale: f64,
    params: PlantParams,
    state: PlantState,
    target: (f64, f64),
    history: ErrorHistory,
}

impl MixingEnv {
    pub fn new(nominal: PlantParams, sets: ReferenceSets) -> Self {
        Self {
            nominal,
            sets,
            sigma_fraction: 0.15,
            noise_var: 0.001,
            x2r: 0.9,
            dt: 1.0,
            width: 2.0,
            penalty: -100.0,
            reward_scale: 0.01,
            params: nominal,
            state: PlantState::default(),
            target: (0.0, 0.0),
            history: ErrorHistory::new(),
        }
    }

    fn observe<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        let e1 = self.state.x1 + noise(self.noise_var, rng) - self.target.0;
        let e2 = self.state.x2 + noise(self.noise_var, rng) - self.target.1;
        self.history.push(e1, e2);
        self.history.features().to_vec()
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }
}

impl Environment for MixingEnv {
    fn n_features(&self) -> usize {
        10
    }

    fn n_actions(&self) -> usize {
        MIXING_ACTIONS.len()
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        let (params, reference, mut state) = randomize_episode(&self.nominal, &self.sets, self.sigma_fraction, rng);
        state.x2r = self.x2r;
        self.params = params;
        self.state = state;
        self.target = desired_split(&reference)?;
        self.history.clear();
        Ok(self.observe(rng))
    }

    fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R) -> Result<(Vec<f64>, f64, bool)> {
        let (d1, d2) = MIXING_ACTIONS[action];
        let u = ControlInput::new(d1, d2, 0.0);
        let mut next = plant::step(&self.state, &u, &self.params, self.dt, Model::Simplified)?;
        next.x2r = self.x2r;
        self.state = next;
        let r =
            mixing_reward(next.x1, next.x2, self.target.0, self.target.1, self.params.x_min, self.width, self.penalty);
        Ok((self.observe(rng), self.reward_scale * r, false))
    }
}

/// Reservoir chamber on its own; features are `(measured x2r, x2r_d)`.
#[derive(Debug, Clone)]
pub struct ReservoirEnv {
    pub nominal: PlantParams,
    pub sets: ReferenceSets,
    pub sigma_fraction: f64,
    pub noise_var: f64,
    pub dt: f64,
    pub reward_scale: f64,
    /// Probability per step of drawing a new set-point mid-episode.
    pub switch_prob: f64,
    params: PlantParams,
    state: PlantState,
    x2r_d: f64,
}

impl ReservoirEnv {
    pub fn new(nominal: PlantParams, sets: ReferenceSets) -> Self {
        Self {
            nominal,
            sets,
            sigma_fraction: 0.15,
            noise_var: 0.001,
            dt: 1.0,
            reward_scale: 100.0,
            switch_prob: 0.0,
            params: nominal,
            state: PlantState::default(),
            x2r_d: 0.0,
        }
    }

    fn observe<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        vec![self.state.x2r + noise(self.noise_var, rng), self.x2r_d]
    }
}

impl Environment for ReservoirEnv {
    fn n_features(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        RESERVOIR_ACTIONS.len()
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        let (params, reference, state) = randomize_episode(&self.nominal, &self.sets, self.sigma_fraction, rng);
        self.params = params;
        self.state = PlantState { x1: 0.0, x2: 0.0, ..state };
        self.x2r_d = reference.x2r_d;
        Ok(self.observe(rng))
    }

    fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R) -> Result<(Vec<f64>, f64, bool)> {
        let u = ControlInput::new(0.0, 0.0, RESERVOIR_ACTIONS[action]);
        self.state = plant::step(&self.state, &u, &self.params, self.dt, Model::Simplified)?;
        let r = reservoir_reward(self.state.x2r, self.x2r_d);
        if self.switch_prob > 0.0 && rng.gen_bool(self.switch_prob) {
            self.x2r_d = pick(&self.sets.reservoir, rng);
        }
        Ok((self.observe(rng), self.reward_scale * r, false))
    }
}

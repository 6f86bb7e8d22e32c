//! Closed-loop orchestration. The loop is split into a plant side (truth,
//! perturbations, noisy sensing, actuation) and a controller side (observer,
//! control laws, gate, compensation) so the same code runs coupled in one
//! thread or decoupled through the file exchange.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::{
    classify_region, compensate_reservoir, desired_split, dqn_mixing_action, dqn_reservoir_action, mpc_reservoir,
    pi_reservoir, switching_law, ErrorHistory, PiState, RecoveryGate, Reference, SwitchingGains,
};
use crate::harness::scenario::{EventKind, MixingKind, ReservoirKind, Scenario};
use crate::harness::trace::{ScenarioTrace, TraceMeta, TraceRow};
use crate::observer::{Ekf, EkfConfig};
use crate::plant::{self, ControlInput, Measurement, PlantParams, PlantState};
use crate::rl::QNetwork;
use crate::{Error, Result};

/// Controller settings shared by every run.
#[derive(Debug, Clone, Default)]
pub struct ControllerSet {
    /// Model parameters the controllers and observer assume.
    pub params: PlantParams,
    pub ekf: EkfConfig,
    pub gains: SwitchingGains,
    pub pi: PiState,
    pub mixing_net: Option<Arc<QNetwork>>,
    pub reservoir_net: Option<Arc<QNetwork>>,
    pub config_hash: String,
}

/// Ground truth and sensing for one replicate.
#[derive(Debug, Clone)]
pub struct PlantSide {
    params: PlantParams,
    state: PlantState,
    scenario: Scenario,
    rng: ChaCha8Rng,
    next_event: usize,
}

impl PlantSide {
    pub fn new(scenario: &Scenario, params: &PlantParams, seed: u64) -> Result<Self> {
        params.validate()?;
        scenario.validate(params)?;
        let mut scenario = scenario.clone();
        scenario.events.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(Self {
            params: *params,
            state: scenario.initial,
            scenario,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_event: 0,
        })
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    /// Applies events due by `t`, then takes a noisy reading.
    pub fn sense(&mut self, t: f64) -> Result<(PlantState, Measurement)> {
        while let Some(e) = self.scenario.events.get(self.next_event).copied() {
            if e.t > t {
                break;
            }
            match e.kind {
                EventKind::Bolus { factor } => {
                    self.state = plant::apply_bolus(&self.state, factor, &self.params)?;
                }
                EventKind::GrowthScale { mu1, mu2 } => {
                    self.params.mu1_star *= mu1;
                    self.params.mu2_star *= mu2;
                }
            }
            log::debug!("t = {t}: applied {:?}", e.kind);
            self.next_event += 1;
        }
        let m = plant::measure(&self.state, &self.params, t, &mut self.rng);
        Ok((self.state, m))
    }

    /// Holds `u` for one sampling interval.
    pub fn actuate(&mut self, u: &ControlInput) -> Result<()> {
        let u = u.clamped(&self.params);
        self.state = plant::step(&self.state, &u, &self.params, self.scenario.sample_interval, self.scenario.model)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOutput {
    pub u: ControlInput,
    pub x1_hat: f64,
    pub x2_hat: f64,
    pub reference: Reference,
}

/// Observer and control laws for one replicate.
#[derive(Debug, Clone)]
pub struct ControllerSide {
    set: ControllerSet,
    scenario: Scenario,
    ekf: Ekf,
    history: ErrorHistory,
    pi: PiState,
    gate: RecoveryGate,
}

impl ControllerSide {
    pub fn new(scenario: &Scenario, set: &ControllerSet) -> Result<Self> {
        set.ekf.validate()?;
        set.gains.validate(&set.params)?;
        if scenario.mixing == Some(MixingKind::Dqn) && set.mixing_net.is_none() {
            return Err(Error::Config("DQN mixing controller selected without weights".into()));
        }
        if scenario.reservoir == ReservoirKind::Dqn && set.reservoir_net.is_none() {
            return Err(Error::Config("DQN reservoir controller selected without weights".into()));
        }
        Ok(Self {
            ekf: Ekf::new(set.ekf, set.params).with_initial_ratio(scenario.initial_ratio()),
            set: set.clone(),
            scenario: scenario.clone(),
            history: ErrorHistory::new(),
            pi: set.pi,
            gate: RecoveryGate::default(),
        })
    }

    pub fn act(&mut self, t: f64, y1: f64, y2: f64) -> Result<ControllerOutput> {
        let reference = self.scenario.reference.at(t);
        let mut u = ControlInput::ZERO;
        let (mut x1_hat, mut x2_hat) = (0.0, 0.0);

        if let Some(kind) = self.scenario.mixing {
            let est = self.ekf.observe(t, y1)?;
            x1_hat = est.x1_hat;
            x2_hat = est.x2_hat;
            let (x1_d, x2_d) = desired_split(&reference)?;
            let requested = match kind {
                MixingKind::Switching => switching_law(classify_region(x1_hat, x2_hat, x1_d, x2_d), &self.set.gains),
                MixingKind::Dqn => {
                    self.history.push(x1_hat - x1_d, x2_hat - x2_d);
                    let net = self.set.mixing_net.as_ref().expect("checked in new");
                    dqn_mixing_action(&self.history, net)?.1
                }
                MixingKind::DensityOnly => {
                    let d1 = if y1 > reference.od_d { self.set.gains.d1_plus } else { 0.0 };
                    ControlInput::new(d1, 0.0, 0.0)
                }
            };
            u.d1 = requested.d1;
            u.d2 = self.gate.apply(y2, requested.d2);
        }

        let dt = self.scenario.sample_interval;
        let d_r2 = match self.scenario.reservoir {
            ReservoirKind::Pi => {
                let (cmd, next) = pi_reservoir(&self.pi, y2, reference.x2r_d, dt);
                self.pi = next;
                cmd
            }
            ReservoirKind::Mpc => mpc_reservoir(y2, reference.x2r_d, &self.set.params),
            ReservoirKind::Dqn => {
                let net = self.set.reservoir_net.as_ref().expect("checked in new");
                dqn_reservoir_action(y2, reference.x2r_d, net)?
            }
        };
        u.dr = compensate_reservoir(d_r2, u.d2);
        let u = u.clamped(&self.set.params);
        if self.scenario.mixing.is_some() {
            self.ekf.commit(u, reference.x2r_d);
        }
        Ok(ControllerOutput { u, x1_hat, x2_hat, reference })
    }
}

/// What the plant side records per sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantRecord {
    pub t: f64,
    pub truth: PlantState,
    pub y1: f64,
    pub y2: f64,
    pub u: ControlInput,
}

/// What the controller side records per sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerRecord {
    pub x1_hat: f64,
    pub x2_hat: f64,
    pub reference: Reference,
}

pub fn sample_time(scenario: &Scenario, k: usize) -> f64 {
    k as f64 * scenario.sample_interval
}

pub fn trace_meta(scenario: &Scenario, seed: u64, set: &ControllerSet) -> TraceMeta {
    TraceMeta {
        scenario: scenario.name.clone(),
        seed,
        mixing_controller: scenario.mixing.map_or("none", |m| m.name()).to_string(),
        reservoir_controller: scenario.reservoir.name().to_string(),
        config_hash: set.config_hash.clone(),
        monoculture: None,
    }
}

pub fn merge(meta: TraceMeta, plant: &[PlantRecord], ctrl: &[ControllerRecord]) -> Result<ScenarioTrace> {
    if plant.len() != ctrl.len() {
        return Err(Error::DimensionMismatch { expected: plant.len(), got: ctrl.len() });
    }
    let rows = plant
        .iter()
        .zip(ctrl)
        .map(|(p, c)| TraceRow {
            t: p.t,
            x1: p.truth.x1,
            x2: p.truth.x2,
            s1: p.truth.s1,
            x2r: p.truth.x2r,
            s2: p.truth.s2,
            y1: p.y1,
            y2: p.y2,
            x1_hat: c.x1_hat,
            x2_hat: c.x2_hat,
            d1: p.u.d1,
            d2: p.u.d2,
            dr: p.u.dr,
            r_d: c.reference.r_d,
            od_d: c.reference.od_d,
            x2r_d: c.reference.x2r_d,
        })
        .collect();
    Ok(ScenarioTrace { meta, rows })
}

/// Runs one replicate with plant and controller in the same thread.
pub fn run_coupled(
    scenario: &Scenario,
    plant_params: &PlantParams,
    set: &ControllerSet,
    seed: u64,
) -> Result<ScenarioTrace> {
    let mut plant = PlantSide::new(scenario, plant_params, seed)?;
    let mut ctrl = ControllerSide::new(scenario, set)?;
    let n = scenario.n_samples();
    let mut plant_log = Vec::with_capacity(n);
    let mut ctrl_log = Vec::with_capacity(n);
    for k in 0..n {
        let t = sample_time(scenario, k);
        let (truth, m) = plant.sense(t)?;
        let out = ctrl.act(t, m.y1, m.y2)?;
        plant_log.push(PlantRecord { t, truth, y1: m.y1, y2: m.y2, u: out.u });
        ctrl_log.push(ControllerRecord { x1_hat: out.x1_hat, x2_hat: out.x2_hat, reference: out.reference });
        if k + 1 < n {
            plant.actuate(&out.u)?;
        }
    }
    merge(trace_meta(scenario, seed, set), &plant_log, &ctrl_log)
}

/// One coupled trace per replicate seed of the scenario.
pub fn run_replicates(
    scenario: &Scenario,
    plant_params: &PlantParams,
    set: &ControllerSet,
) -> Result<Vec<ScenarioTrace>> {
    scenario.seeds.iter().map(|&seed| run_coupled(scenario, plant_params, set, seed)).collect()
}

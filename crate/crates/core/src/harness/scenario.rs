use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::control::{Reference, ReferenceSchedule, Schedule};
use crate::plant::{Model, PlantParams, PlantState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingKind {
    Switching,
    Dqn,
    /// Relay on total biomass with `d2 = 0`; used to exercise the observer.
    DensityOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReservoirKind {
    Pi,
    Mpc,
    Dqn,
}

impl MixingKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Switching => "switching",
            Self::Dqn => "dqn",
            Self::DensityOnly => "density-only",
        }
    }
}

impl ReservoirKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pi => "pi",
            Self::Mpc => "mpc",
            Self::Dqn => "dqn",
        }
    }
}

impl FromStr for MixingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "switching" => Ok(Self::Switching),
            "dqn" => Ok(Self::Dqn),
            "density-only" => Ok(Self::DensityOnly),
            _ => Err(Error::Unknown { kind: "mixing controller", name: s.into() }),
        }
    }
}

impl FromStr for ReservoirKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pi" => Ok(Self::Pi),
            "mpc" => Ok(Self::Mpc),
            "dqn" => Ok(Self::Dqn),
            _ => Err(Error::Unknown { kind: "reservoir controller", name: s.into() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventKind {
    /// Fresh-media injection into the mixing chamber.
    Bolus { factor: f64 },
    /// Multiplies the maximum growth rates from this time on.
    GrowthScale { mu1: f64, mu2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub initial: PlantState,
    pub reference: ReferenceSchedule,
    /// `None` leaves the mixing chamber idle (reservoir-only experiments).
    pub mixing: Option<MixingKind>,
    pub reservoir: ReservoirKind,
    /// Run length (min).
    pub duration: f64,
    pub events: Vec<Event>,
    pub seeds: Vec<u64>,
    pub sample_interval: f64,
    /// Spacing of emulated flow-cytometry ground-truth samples (min).
    pub facs_interval: f64,
    pub model: Model,
}

pub const BOLUS_FACTOR: f64 = 0.87;
pub const TEMPERATURE_GROWTH_SCALE: f64 = 0.9;
/// Reservoir set-point while it feeds the mixing chamber.
pub const FEED_RESERVOIR_SETPOINT: f64 = 0.9;
/// Reservoir density at the start of co-culture experiments.
pub const FEED_RESERVOIR_INITIAL: f64 = 0.8;

impl Scenario {
    fn base(name: &str, initial: PlantState, reference: ReferenceSchedule, duration: f64) -> Self {
        Self {
            name: name.into(),
            initial,
            reference,
            mixing: Some(MixingKind::Switching),
            reservoir: ReservoirKind::Pi,
            duration,
            events: Vec::new(),
            seeds: vec![0, 1, 2],
            sample_interval: 1.0,
            facs_interval: 10.0,
            model: Model::Full,
        }
    }

    fn coculture(name: &str, x1: f64, x2: f64, r_d: Schedule, od_d: Schedule, duration: f64) -> Self {
        let p = PlantParams::default();
        let reference = ReferenceSchedule { r_d, od_d, x2r_d: Schedule::constant(FEED_RESERVOIR_SETPOINT) };
        Self::base(name, PlantState::fresh(x1, x2, FEED_RESERVOIR_INITIAL, &p), reference, duration)
    }

    fn reservoir_only(name: &str, x2r: f64, x2r_d: Schedule, duration: f64) -> Self {
        let p = PlantParams::default();
        let reference = ReferenceSchedule { r_d: Schedule::constant(1.0), od_d: Schedule::constant(0.7), x2r_d };
        Self { mixing: None, ..Self::base(name, PlantState::fresh(0.0, 0.0, x2r, &p), reference, duration) }
    }

    /// Initial `x2 / x1` handed to the observer (1 when unknown).
    pub fn initial_ratio(&self) -> f64 {
        if self.initial.x1 > 0.0 {
            self.initial.x2 / self.initial.x1
        } else {
            1.0
        }
    }

    pub fn n_samples(&self) -> usize {
        (self.duration / self.sample_interval + 1e-9).floor() as usize + 1
    }

    pub fn validate(&self, p: &PlantParams) -> Result<()> {
        if !(self.duration >= 0.0) || !(self.sample_interval > 0.0) || !(self.facs_interval > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scenario `{}`: duration must be >= 0 and intervals > 0",
                self.name
            )));
        }
        if self.initial.to_array().iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("scenario `{}`: negative initial state", self.name)));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::InvalidParameter(format!("scenario `{}`: duplicate seeds", self.name)));
        }
        for e in &self.events {
            match e.kind {
                EventKind::Bolus { factor } if !(factor > 0.0 && factor <= 1.0) => {
                    return Err(Error::InvalidParameter(format!("bolus factor {factor} outside (0, 1]")));
                }
                EventKind::GrowthScale { mu1, mu2 } if !(mu1 > 0.0 && mu2 > 0.0) => {
                    return Err(Error::InvalidParameter("growth scales must be positive".into()));
                }
                _ => {}
            }
        }
        self.reference.validate(p)
    }

    /// Same scenario with different controllers.
    pub fn with_controllers(&self, mixing: Option<MixingKind>, reservoir: ReservoirKind) -> Self {
        Self { mixing: if self.mixing.is_some() { mixing } else { None }, reservoir, ..self.clone() }
    }
}

/// The six reference experiments, each with three replicate seeds.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let c = Schedule::constant;
    let regulation = Scenario::coculture("regulation", 0.4, 0.4, c(0.6), c(0.7), 240.0);
    let ratio_tracking =
        Scenario::coculture("ratio-tracking", 0.35, 0.35, Schedule::steps(&[(0.0, 1.0), (60.0, 0.6)]), c(0.7), 180.0);
    let od_tracking =
        Scenario::coculture("od-tracking", 0.35, 0.35, c(1.0), Schedule::steps(&[(0.0, 0.7), (60.0, 0.55)]), 180.0);
    let robustness = Scenario {
        events: vec![Event { t: 100.0, kind: EventKind::Bolus { factor: BOLUS_FACTOR } }],
        ..Scenario::coculture("robustness-bolus", 0.35, 0.35, c(1.5), c(0.7), 200.0)
    };
    let stepdown = Scenario::reservoir_only(
        "reservoir-stepdown",
        0.8,
        Schedule::steps(&[(0.0, 0.8), (30.0, 0.65), (60.0, 0.5)]),
        90.0,
    );
    let temperature = Scenario {
        events: vec![Event { t: 30.0, kind: EventKind::GrowthScale { mu1: 1.0, mu2: TEMPERATURE_GROWTH_SCALE } }],
        ..Scenario::reservoir_only("reservoir-temperature", 0.5, c(0.5), 60.0)
    };
    vec![regulation, ratio_tracking, od_tracking, robustness, stepdown, temperature]
}

pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Unknown { kind: "scenario", name: name.into() })
}

/// Co-culture started at low density with a density-only relay and no
/// reservoir transfer, so the strain split is visible only through growth
/// rates. Used to assess the observer.
pub fn observer_validation_scenario() -> Scenario {
    let p = PlantParams::default();
    let reference = ReferenceSchedule::constant(Reference { r_d: 1.0, od_d: 0.6, x2r_d: FEED_RESERVOIR_SETPOINT });
    Scenario {
        mixing: Some(MixingKind::DensityOnly),
        ..Scenario::base(
            "observer-validation",
            PlantState::fresh(0.1, 0.1, FEED_RESERVOIR_SETPOINT, &p),
            reference,
            240.0,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid_and_complete() {
        let p = PlantParams::default();
        let names: Vec<String> = builtin_scenarios().iter().map(|s| s.name.clone()).collect();
        assert_eq!(
            names,
            [
                "regulation",
                "ratio-tracking",
                "od-tracking",
                "robustness-bolus",
                "reservoir-stepdown",
                "reservoir-temperature"
            ]
        );
        for s in builtin_scenarios() {
            s.validate(&p).unwrap();
            assert_eq!(s.seeds.len(), 3);
        }
    }

    #[test]
    fn builtin_schedules() {
        let s = builtin_scenario("ratio-tracking").unwrap();
        assert_eq!(s.reference.at(59.0).r_d, 1.0);
        assert_eq!(s.reference.at(60.0).r_d, 0.6);
        assert_eq!(s.reference.at(120.0).od_d, 0.7);
        let s = builtin_scenario("reservoir-stepdown").unwrap();
        let refs: Vec<f64> = [0.0, 30.0, 60.0, 89.0].iter().map(|t| s.reference.at(*t).x2r_d).collect();
        assert_eq!(refs, [0.8, 0.65, 0.5, 0.5]);
        let s = builtin_scenario("reservoir-temperature").unwrap();
        assert_eq!(s.events[0], Event { t: 30.0, kind: EventKind::GrowthScale { mu1: 1.0, mu2: 0.9 } });
        assert!(builtin_scenario("nope").is_err());
    }

    #[test]
    fn controller_names_parse() {
        for k in [MixingKind::Switching, MixingKind::Dqn, MixingKind::DensityOnly] {
            assert_eq!(k.name().parse::<MixingKind>().unwrap(), k);
        }
        for k in [ReservoirKind::Pi, ReservoirKind::Mpc, ReservoirKind::Dqn] {
            assert_eq!(k.name().parse::<ReservoirKind>().unwrap(), k);
        }
    }
}

//! Scenario definitions, closed-loop runs (coupled or through the file
//! exchange), configuration, trace persistence and replicate statistics.

pub mod config;
pub mod exchange;
pub mod runner;
pub mod scenario;
pub mod stats;
pub mod trace;

pub use config::Config;
pub use exchange::{run_controller_side, run_exchange, run_plant_side, ExchangeConfig};
pub use runner::{run_coupled, run_replicates, ControllerSet, ControllerSide, PlantSide};
pub use scenario::{
    builtin_scenario, builtin_scenarios, observer_validation_scenario, Event, EventKind, MixingKind, ReservoirKind,
    Scenario,
};
pub use stats::{evaluate_trace, replicate_stats, signal_metrics, Signal, SignalMetrics, StatsReport};
pub use trace::{ScenarioTrace, Strain, TraceMeta, TraceRow};

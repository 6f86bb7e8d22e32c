//! File-exchange mode: plant and controller run as independent tasks that
//! talk only through per-step files in a shared directory.
//!
//! Protocol, for each step `k`:
//! - the plant writes `meas_<k>.csv` with header `k,t,y1,y2` and one data row;
//! - the controller waits for it, then writes `act_<k>.csv` with header
//!   `k,d1,d2,dr` and one data row;
//! - the plant waits for the action file, applies it and moves on.
//!
//! Files are written to a temporary name and renamed into place, and a reader
//! only accepts a file that ends with a newline. Numbers use the shortest
//! decimal form that parses back to the same `f64`, so both modes see
//! identical values. A side that waits longer than the poll budget fails
//! with [`Error::ExchangeTimeout`].

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use crate::harness::runner::{
    merge, sample_time, trace_meta, ControllerRecord, ControllerSet, ControllerSide, PlantRecord, PlantSide,
};
use crate::harness::scenario::Scenario;
use crate::harness::trace::ScenarioTrace;
use crate::plant::{ControlInput, PlantParams};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ExchangeConfig {
    pub dir: PathBuf,
    pub poll_interval: Duration,
    /// Longest wait for the counterpart's file at any one step.
    pub budget: Duration,
}

impl ExchangeConfig {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), poll_interval: Duration::from_millis(50), budget: Duration::from_secs(10) }
    }
}

pub fn meas_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("meas_{k}.csv"))
}

pub fn act_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("act_{k}.csv"))
}

fn write_atomic(path: &Path, header: &str, values: &[String]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("step");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, format!("{header}\n{}\n", values.join(",")))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Waits for a complete file and returns its data row.
fn wait_for(path: &Path, side: &'static str, k: usize, cfg: &ExchangeConfig) -> Result<Vec<f64>> {
    let start = Instant::now();
    loop {
        match fs::read_to_string(path) {
            Ok(text) if text.ends_with('\n') => return parse_row(path, &text, k),
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        if start.elapsed() >= cfg.budget {
            return Err(Error::ExchangeTimeout { side, step: k, dir: cfg.dir.clone() });
        }
        thread::sleep(cfg.poll_interval);
    }
}

fn parse_row(path: &Path, text: &str, k: usize) -> Result<Vec<f64>> {
    let malformed = |reason: String| Error::Malformed { path: path.to_path_buf(), reason };
    let row = text.lines().nth(1).ok_or_else(|| malformed("missing data row".into()))?;
    let values = row
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| malformed(e.to_string()))?;
    if values.len() != 4 {
        return Err(malformed(format!("expected 4 fields, got {}", values.len())));
    }
    if values[0] != k as f64 {
        return Err(malformed(format!("step field {} does not match {k}", values[0])));
    }
    Ok(values)
}

/// Plant task: senses, publishes, waits for the action and applies it.
pub fn run_plant_side(
    scenario: &Scenario,
    params: &PlantParams,
    seed: u64,
    cfg: &ExchangeConfig,
) -> Result<Vec<PlantRecord>> {
    let mut plant = PlantSide::new(scenario, params, seed)?;
    let n = scenario.n_samples();
    let mut log = Vec::with_capacity(n);
    for k in 0..n {
        let t = sample_time(scenario, k);
        let (truth, m) = plant.sense(t)?;
        write_atomic(
            &meas_path(&cfg.dir, k),
            "k,t,y1,y2",
            &[k.to_string(), t.to_string(), m.y1.to_string(), m.y2.to_string()],
        )?;
        let a = wait_for(&act_path(&cfg.dir, k), "plant", k, cfg)?;
        let u = ControlInput::new(a[1], a[2], a[3]);
        log.push(PlantRecord { t, truth, y1: m.y1, y2: m.y2, u });
        if k + 1 < n {
            plant.actuate(&u)?;
        }
    }
    Ok(log)
}

/// Controller task: waits for each reading and publishes the action.
pub fn run_controller_side(
    scenario: &Scenario,
    set: &ControllerSet,
    cfg: &ExchangeConfig,
) -> Result<Vec<ControllerRecord>> {
    let mut ctrl = ControllerSide::new(scenario, set)?;
    let n = scenario.n_samples();
    let mut log = Vec::with_capacity(n);
    for k in 0..n {
        let m = wait_for(&meas_path(&cfg.dir, k), "controller", k, cfg)?;
        let out = ctrl.act(m[1], m[2], m[3])?;
        write_atomic(
            &act_path(&cfg.dir, k),
            "k,d1,d2,dr",
            &[k.to_string(), out.u.d1.to_string(), out.u.d2.to_string(), out.u.dr.to_string()],
        )?;
        log.push(ControllerRecord { x1_hat: out.x1_hat, x2_hat: out.x2_hat, reference: out.reference });
    }
    Ok(log)
}

/// Runs both sides concurrently over the exchange directory, which must be
/// empty or absent.
pub fn run_exchange(
    scenario: &Scenario,
    plant_params: &PlantParams,
    set: &ControllerSet,
    seed: u64,
    cfg: &ExchangeConfig,
) -> Result<ScenarioTrace> {
    fs::create_dir_all(&cfg.dir)?;
    if fs::read_dir(&cfg.dir)?.next().is_some() {
        return Err(Error::Config(format!("exchange directory {} is not empty", cfg.dir.display())));
    }
    let (plant_log, ctrl_log) = thread::scope(|s| {
        let ctrl = s.spawn(|| run_controller_side(scenario, set, cfg));
        let plant = run_plant_side(scenario, plant_params, seed, cfg);
        let ctrl = ctrl.join().map_err(|_| Error::Numerical("controller task panicked".into()))?;
        // Report the side that failed first: a dead controller makes the plant
        // time out, not the other way round.
        match (plant, ctrl) {
            (Ok(p), Ok(c)) => Ok((p, c)),
            (_, Err(e)) => Err(e),
            (Err(e), _) => Err(e),
        }
    })?;
    merge(trace_meta(scenario, seed, set), &plant_log, &ctrl_log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::runner::run_coupled;
    use crate::harness::scenario::builtin_scenario;

    fn fast(dir: &Path) -> ExchangeConfig {
        ExchangeConfig {
            poll_interval: Duration::from_millis(1),
            budget: Duration::from_secs(10),
            ..ExchangeConfig::new(dir)
        }
    }

    #[test]
    fn exchange_matches_coupled() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = builtin_scenario("robustness-bolus").unwrap();
        s.duration = 30.0;
        let p = PlantParams::default();
        let set = ControllerSet::default();
        let coupled = run_coupled(&s, &p, &set, 1).unwrap();
        let exchanged = run_exchange(&s, &p, &set, 1, &fast(&dir.path().join("x"))).unwrap();
        assert_eq!(coupled, exchanged);
    }

    #[test]
    fn missing_controller_times_out() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExchangeConfig { budget: Duration::from_millis(30), ..fast(dir.path()) };
        let s = builtin_scenario("reservoir-stepdown").unwrap();
        let err = run_plant_side(&s, &PlantParams::default(), 0, &cfg).unwrap_err();
        assert!(matches!(err, Error::ExchangeTimeout { side: "plant", step: 0, .. }));
        assert!(meas_path(dir.path(), 0).exists());
    }

    #[test]
    fn incomplete_files_are_ignored_until_finished() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExchangeConfig { budget: Duration::from_millis(20), ..fast(dir.path()) };
        fs::write(act_path(dir.path(), 0), "k,d1,d2,dr\n0,0.01,0,0").unwrap();
        assert!(matches!(wait_for(&act_path(dir.path(), 0), "plant", 0, &cfg), Err(Error::ExchangeTimeout { .. })));
        fs::write(act_path(dir.path(), 0), "k,d1,d2,dr\n0,0.01,0,0\n").unwrap();
        assert_eq!(wait_for(&act_path(dir.path(), 0), "plant", 0, &cfg).unwrap(), vec![0.0, 0.01, 0.0, 0.0]);
        fs::write(act_path(dir.path(), 1), "k,d1,d2,dr\n0,0.01,0,0\n").unwrap();
        assert!(matches!(wait_for(&act_path(dir.path(), 1), "plant", 1, &cfg), Err(Error::Malformed { .. })));
    }

    #[test]
    fn non_empty_directory_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("stale"), "x").unwrap();
        let s = builtin_scenario("reservoir-stepdown").unwrap();
        let r = run_exchange(&s, &PlantParams::default(), &ControllerSet::default(), 0, &fast(dir.path()));
        assert!(matches!(r, Err(Error::Config(_))));
    }
}

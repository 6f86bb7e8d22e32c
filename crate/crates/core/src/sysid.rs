//! Growth-parameter identification from open-loop monoculture traces.
//!
//! In a monoculture under the abundant-substrate model each strain follows
//! `x' = (mu - d / tau) x`, so with piecewise-constant commands the simulated
//! trajectory is `x0 * exp(sum (mu - d_j / tau) dt_j)`. The initial density is
//! profiled out by linear least squares and `(mu1, mu2, tau)` is searched by
//! multi-start Nelder-Mead in log coordinates.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::harness::trace::{ScenarioTrace, Strain, TraceMeta, TraceRow};
use crate::plant::{self, ControlInput, Model, PlantParams, PlantState};
use crate::{Error, Result};

/// Open-loop identification experiment for one strain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenLoopExperiment {
    pub strain: Strain,
    /// Initial OD of the monoculture.
    pub initial: f64,
    /// Measured OD at which the dilution schedule starts.
    pub growth_threshold: f64,
    /// Length of each constant-dilution segment (min).
    pub segment: f64,
    /// Command for each segment; the last one holds to the end.
    pub dilutions: Vec<f64>,
    /// Total trace length (min).
    pub duration: f64,
    pub model: Model,
}

impl OpenLoopExperiment {
    pub fn new(strain: Strain, dilutions: Vec<f64>, duration: f64) -> Self {
        Self {
            strain,
            initial: 0.3,
            growth_threshold: 1.0,
            segment: 30.0,
            dilutions,
            duration,
            model: Model::Simplified,
        }
    }
}

/// `n` commands drawn uniformly from `[0, d_hi]`.
pub fn random_schedule<R: Rng + ?Sized>(n: usize, d_hi: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..=d_hi)).collect()
}

/// Simulates the monoculture at 1-minute sampling: undiluted growth until the
/// measurement reaches the threshold, then the segment schedule.
pub fn generate_openloop_trace(p: &PlantParams, exp: &OpenLoopExperiment, seed: u64) -> Result<ScenarioTrace> {
    p.validate()?;
    if !(exp.duration >= 0.0) || !(exp.segment > 0.0) || !(exp.initial > 0.0) {
        return Err(Error::InvalidParameter(
            "open-loop trace needs duration >= 0, segment > 0 and a positive initial OD".into(),
        ));
    }
    if exp.dilutions.iter().any(|d| !(p.d_min..=p.d_max).contains(d)) {
        return Err(Error::InvalidParameter("dilution schedule outside pump range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x1, x2) = match exp.strain {
        Strain::Fast => (exp.initial, 0.0),
        Strain::Slow => (0.0, exp.initial),
    };
    let mut state = PlantState::fresh(x1, x2, 0.0, p);
    let steps = exp.duration.floor() as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut schedule_start: Option<f64> = None;
    for k in 0..=steps {
        let t = k as f64;
        let m = plant::measure(&state, p, t, &mut rng);
        if schedule_start.is_none() && m.y1 >= exp.growth_threshold {
            schedule_start = Some(t);
        }
        let d1 = match (schedule_start, exp.dilutions.last()) {
            (Some(t0), Some(&last)) => {
                let seg = ((t - t0) / exp.segment).floor() as usize;
                exp.dilutions.get(seg).copied().unwrap_or(last)
            }
            _ => 0.0,
        };
        rows.push(TraceRow {
            t,
            x1: state.x1,
            x2: state.x2,
            s1: state.s1,
            x2r: state.x2r,
            s2: state.s2,
            y1: m.y1,
            y2: m.y2,
            d1,
            ..Default::default()
        });
        if k < steps {
            state = plant::step(&state, &ControlInput::new(d1, 0.0, 0.0), p, 1.0, exp.model)?;
        }
    }
    Ok(ScenarioTrace {
        meta: TraceMeta {
            scenario: "openloop".into(),
            seed,
            mixing_controller: "openloop".into(),
            reservoir_controller: "none".into(),
            config_hash: String::new(),
            monoculture: Some(exp.strain),
        },
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub starts: usize,
    pub seed: u64,
    pub mu_bounds: (f64, f64),
    pub tau_bounds: (f64, f64),
    pub max_iters: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { starts: 5, seed: 0, mu_bounds: (0.001, 0.1), tau_bounds: (0.05, 1.0), max_iters: 3000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub mu1_star: f64,
    pub mu2_star: f64,
    pub tau: f64,
    /// Per-trace RMSE in OD units, in input order.
    pub rmse: Vec<f64>,
    /// False when every trace was run without dilution.
    pub tau_identifiable: bool,
    /// Total sum of squared residuals at the optimum.
    pub sse: f64,
}

struct Series {
    strain: Strain,
    t: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Series {
    fn from_trace(tr: &ScenarioTrace) -> Result<Self> {
        let strain = tr.meta.monoculture.ok_or_else(|| {
            Error::InsufficientData(format!("trace `{}` is not marked as a monoculture", tr.meta.scenario))
        })?;
        if tr.rows.len() < 2 {
            return Err(Error::InsufficientData("identification traces need at least two rows".into()));
        }
        Ok(Self {
            strain,
            t: tr.rows.iter().map(|r| r.t).collect(),
            y: tr.rows.iter().map(|r| r.y1).collect(),
            d: tr.rows.iter().map(|r| r.d1).collect(),
        })
    }

    /// Unit-initial-density trajectory under `(mu, tau)`.
    fn shape(&self, mu: f64, tau: f64) -> Vec<f64> {
        let mut log_x = 0.0;
        let mut g = Vec::with_capacity(self.t.len());
        g.push(1.0);
        for k in 1..self.t.len() {
            log_x += (mu - self.d[k - 1] / tau) * (self.t[k] - self.t[k - 1]);
            g.push(log_x.exp());
        }
        g
    }

    /// Sum of squared residuals with the best non-negative initial density.
    fn sse(&self, mu: f64, tau: f64) -> f64 {
        let g = self.shape(mu, tau);
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let gy: f64 = g.iter().zip(&self.y).map(|(a, b)| a * b).sum();
        let x0 = if gg > 0.0 { (gy / gg).max(0.0) } else { 0.0 };
        g.iter().zip(&self.y).map(|(a, y)| (y - x0 * a).powi(2)).sum()
    }
}

struct Objective<'a> {
    series: &'a [Series],
    lo: [f64; 3],
    hi: [f64; 3],
    fixed_tau: Option<f64>,
}

impl Objective<'_> {
    fn unpack(&self, z: &[f64]) -> (f64, f64, f64, f64) {
        let mut penalty = 0.0;
        let v: Vec<f64> = (0..3)
            .map(|i| {
                let c = z[i].clamp(self.lo[i], self.hi[i]);
                penalty += (z[i] - c).powi(2);
                c.exp()
            })
            .collect();
        (v[0], v[1], self.fixed_tau.unwrap_or(v[2]), penalty)
    }

    fn total(&self, z: &[f64]) -> f64 {
        let (mu1, mu2, tau, penalty) = self.unpack(z);
        let sse: f64 = self
            .series
            .iter()
            .map(|s| match s.strain {
                Strain::Fast => s.sse(mu1, tau),
                Strain::Slow => s.sse(mu2, tau),
            })
            .sum();
        sse * (1.0 + 1e3 * penalty) + 1e3 * penalty
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, z: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.total(z))
    }
}

/// Least-squares fit of `(mu1_star, mu2_star, tau)` to monoculture traces of
/// both strains.
pub fn fit_growth_params(traces: &[ScenarioTrace], opts: &FitOptions) -> Result<FitReport> {
    let series = traces.iter().map(Series::from_trace).collect::<Result<Vec<_>>>()?;
    for strain in [Strain::Fast, Strain::Slow] {
        if !series.iter().any(|s| s.strain == strain) {
            return Err(Error::InsufficientData(format!("no {strain:?} monoculture trace")));
        }
    }
    let excited = series.iter().any(|s| s.d.iter().any(|&d| d != 0.0));
    if !excited {
        log::warn!("all dilution commands are zero: tau is not identifiable");
    }
    let lo = [opts.mu_bounds.0.ln(), opts.mu_bounds.0.ln(), opts.tau_bounds.0.ln()];
    let hi = [opts.mu_bounds.1.ln(), opts.mu_bounds.1.ln(), opts.tau_bounds.1.ln()];
    let fixed_tau = (!excited).then(|| (opts.tau_bounds.0 * opts.tau_bounds.1).sqrt());
    let objective = Objective { series: &series, lo, hi, fixed_tau };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..opts.starts.max(1) {
        let start: Vec<f64> = (0..3).map(|i| rng.gen_range(lo[i]..hi[i])).collect();
        let mut simplex = vec![start.clone()];
        for i in 0..3 {
            let mut v = start.clone();
            let step = 0.25 * (hi[i] - lo[i]);
            v[i] = if v[i] + step <= hi[i] { v[i] + step } else { v[i] - step };
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex).with_sd_tolerance(1e-14).map_err(|e| Error::FitFailed(e.to_string()))?;
        let res = Executor::new(Objective { series: &series, lo, hi, fixed_tau }, solver)
            .configure(|s| s.max_iters(opts.max_iters))
            .run()
            .map_err(|e| Error::FitFailed(e.to_string()))?;
        let state = res.state();
        if let Some(param) = state.best_param.clone() {
            let cost = objective.total(&param);
            if cost.is_finite() && best.as_ref().is_none_or(|b| cost < b.1) {
                best = Some((param, cost));
            }
        }
    }
    let (z, _) = best.ok_or_else(|| Error::FitFailed("no start produced a finite cost".into()))?;
    let (mu1, mu2, tau, _) = objective.unpack(&z);
    let mut sse = 0.0;
    let rmse = series
        .iter()
        .map(|s| {
            let e = s.sse(if s.strain == Strain::Fast { mu1 } else { mu2 }, tau);
            sse += e;
            (e / s.y.len() as f64).sqrt()
        })
        .collect();
    Ok(FitReport { mu1_star: mu1, mu2_star: mu2, tau, rmse, tau_identifiable: excited, sse })
}

/// Standard identification data set: one trace per strain with a random
/// 30-minute dilution schedule.
pub fn synthetic_identification_set(p: &PlantParams, seed: u64) -> Result<Vec<ScenarioTrace>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fast = OpenLoopExperiment::new(Strain::Fast, random_schedule(8, 0.008, &mut rng), 300.0);
    let slow = OpenLoopExperiment {
        initial: 0.6,
        ..OpenLoopExperiment::new(Strain::Slow, random_schedule(8, 0.005, &mut rng), 300.0)
    };
    Ok(vec![generate_openloop_trace(p, &fast, rng.gen())?, generate_openloop_trace(p, &slow, rng.gen())?])
}

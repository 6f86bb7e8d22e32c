//! Extended Kalman filter reconstructing the two mixing-chamber strains from
//! the aggregate OD reading `y1 = x1 + x2`.
//!
//! The mean is propagated by integrating the abundant-substrate model over
//! the sampling interval; the covariance uses the Euler-discretized Jacobian
//! `F = I + A dt`. The reservoir density entering the transfer term is taken
//! as a known constant (its setpoint).

use nalgebra::{Matrix2, RowVector2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::harness::trace::ScenarioTrace;
use crate::plant::{ControlInput, PlantParams, MAX_SUBSTEP};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EkfConfig {
    /// Process noise scale, applied as `q * I`.
    pub q: f64,
    /// Measurement noise variance.
    pub r: f64,
    /// Initial covariance scale, applied as `p0 * I`.
    pub p0: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self { q: 1e-5, r: 5.0, p0: 0.072 }
    }
}

impl EkfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q > 0.0 && self.r > 0.0 && self.p0 > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("EKF q, r and p0 must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfEstimate {
    pub x1_hat: f64,
    pub x2_hat: f64,
    pub p: Matrix2<f64>,
    pub t: f64,
}

impl EkfEstimate {
    /// Splits a total-biomass reading according to a ratio `x2/x1`.
    pub fn from_measurement(y1: f64, ratio: f64, p0: f64, t: f64) -> Self {
        let y = y1.max(0.0);
        Self { x1_hat: y / (1.0 + ratio), x2_hat: y * ratio / (1.0 + ratio), p: Matrix2::identity() * p0, t }
    }
}

/// Jacobian of `h` and of its Lie derivative along the abundant-substrate
/// mixing dynamics, for effective dilution rates.
pub fn observability_matrix(mu1_star: f64, mu2_star: f64, d1_eff: f64, d2_eff: f64) -> Matrix2<f64> {
    let d = d1_eff + d2_eff;
    Matrix2::new(1.0, 1.0, mu1_star - d, mu2_star - d)
}

pub fn observability_rank(o: &Matrix2<f64>) -> usize {
    let scale = o.abs().max().max(1.0);
    o.rank(1e-12 * scale)
}

fn mixing_rate(x: Vector2<f64>, d1: f64, d2: f64, x2r: f64, p: &PlantParams) -> Vector2<f64> {
    Vector2::new((p.mu1_star - d1 - d2) * x[0], (p.mu2_star - d1) * x[1] + d2 * (x2r - x[1]))
}

fn propagate_mean(x: Vector2<f64>, d1: f64, d2: f64, x2r: f64, p: &PlantParams, dt: f64) -> Vector2<f64> {
    let n = (dt / MAX_SUBSTEP).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let f = |v: Vector2<f64>| mixing_rate(v, d1, d2, x2r, p);
    let mut v = x;
    for _ in 0..n {
        let k1 = f(v);
        let k2 = f(v + k1 * (h / 2.0));
        let k3 = f(v + k2 * (h / 2.0));
        let k4 = f(v + k3 * h);
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    v
}

/// One predict/update cycle over `dt` minutes with the input `u` held
/// during the interval and reservoir density `x2r` assumed constant.
pub fn ekf_step(
    est: &EkfEstimate,
    u: &ControlInput,
    y1: f64,
    x2r: f64,
    p: &PlantParams,
    cfg: &EkfConfig,
    dt: f64,
) -> Result<EkfEstimate> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("EKF dt must be > 0, got {dt}")));
    }
    if !y1.is_finite() {
        return Err(Error::Numerical("non-finite measurement".into()));
    }
    let (d1, d2) = (p.effective(u.d1), p.effective(u.d2));

    let x_pred = propagate_mean(Vector2::new(est.x1_hat, est.x2_hat), d1, d2, x2r, p, dt);
    let a = Matrix2::new(p.mu1_star - d1 - d2, 0.0, 0.0, p.mu2_star - d1 - d2);
    let f = Matrix2::identity() + a * dt;
    let p_pred = f * est.p * f.transpose() + Matrix2::identity() * (cfg.q * dt);

    let h = RowVector2::new(1.0, 1.0);
    let s = (h * p_pred * h.transpose())[(0, 0)] + cfg.r;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Numerical(format!("innovation covariance {s} is not positive")));
    }
    let k = p_pred * h.transpose() / s;
    let innovation = y1 - (x_pred[0] + x_pred[1]);
    let x_new = x_pred + k * innovation;
    let p_new = (Matrix2::identity() - k * h) * p_pred;
    let p_sym = (p_new + p_new.transpose()) * 0.5;

    Ok(EkfEstimate { x1_hat: x_new[0].max(0.0), x2_hat: x_new[1].max(0.0), p: p_sym, t: est.t + dt })
}

/// Online filter: initialises from the first reading and remembers the input
/// applied since the last reading.
#[derive(Debug, Clone)]
pub struct Ekf {
    pub cfg: EkfConfig,
    pub params: PlantParams,
    initial_ratio: f64,
    est: Option<EkfEstimate>,
    pending: Option<(ControlInput, f64)>,
}

impl Ekf {
    pub fn new(cfg: EkfConfig, params: PlantParams) -> Self {
        Self { cfg, params, initial_ratio: 1.0, est: None, pending: None }
    }

    /// Known initial `x2/x1` used to split the first reading (default 1).
    pub fn with_initial_ratio(mut self, ratio: f64) -> Self {
        self.initial_ratio = ratio;
        self
    }

    pub fn estimate(&self) -> Option<&EkfEstimate> {
        self.est.as_ref()
    }

    pub fn observe(&mut self, t: f64, y1: f64) -> Result<EkfEstimate> {
        let next = match (&self.est, self.pending) {
            (Some(prev), Some((u, x2r))) if t > prev.t => {
                ekf_step(prev, &u, y1, x2r, &self.params, &self.cfg, t - prev.t)?
            }
            (Some(prev), _) => *prev,
            (None, _) => EkfEstimate::from_measurement(y1, self.initial_ratio, self.cfg.p0, t),
        };
        self.est = Some(next);
        self.pending = None;
        Ok(next)
    }

    /// Records the input held until the next reading and the reservoir
    /// density assumed meanwhile.
    pub fn commit(&mut self, u: ControlInput, x2r: f64) {
        self.pending = Some((u, x2r));
    }
}

/// Re-runs the filter over a recorded trace, returning `(x1_hat, x2_hat)` per row.
pub fn replay(trace: &ScenarioTrace, p: &PlantParams, cfg: &EkfConfig) -> Result<Vec<(f64, f64)>> {
    let mut ekf = Ekf::new(*cfg, *p);
    let mut out = Vec::with_capacity(trace.rows.len());
    for row in &trace.rows {
        let e = ekf.observe(row.t, row.y1)?;
        out.push((e.x1_hat, e.x2_hat));
        ekf.commit(ControlInput::new(row.d1, row.d2, row.dr), row.x2r_d);
    }
    Ok(out)
}

/// Per-species mean squared errors `(mse_x1, mse_x2)` of a replay against the
/// trace's ground truth.
pub fn estimation_mse(trace: &ScenarioTrace, p: &PlantParams, cfg: &EkfConfig) -> Result<(f64, f64)> {
    let est = replay(trace, p, cfg)?;
    let n = est.len().max(1) as f64;
    let (mut e1, mut e2) = (0.0, 0.0);
    for (row, (a, b)) in trace.rows.iter().zip(est) {
        e1 += (a - row.x1).powi(2);
        e2 += (b - row.x2).powi(2);
    }
    Ok((e1 / n, e2 / n))
}

fn tuning_loss(traces: &[ScenarioTrace], p: &PlantParams, cfg: &EkfConfig) -> f64 {
    let mut total = 0.0;
    for tr in traces {
        match estimation_mse(tr, p, cfg) {
            Ok((a, b)) => total += 0.5 * (a + b),
            Err(_) => return f64::INFINITY,
        }
    }
    total / traces.len() as f64
}

const POPULATION: usize = 20;
const ELITE: usize = 4;

/// Evolutionary search over `(q, r, p0)` in log space minimising the mean
/// squared estimation error on traces with ground truth. The default
/// configuration seeds the population, so the result is never worse than it.
pub fn tune_ekf(traces: &[ScenarioTrace], search_budget: usize, p: &PlantParams, seed: u64) -> Result<EkfConfig> {
    if traces.is_empty() || traces.iter().all(|t| t.rows.is_empty()) {
        return Err(Error::InsufficientData("EKF tuning needs at least one trace".into()));
    }
    let default = EkfConfig::default();
    if search_budget == 0 {
        return Ok(default);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let to_log = |c: &EkfConfig| [c.q.ln(), c.r.ln(), c.p0.ln()];
    let from_log = |g: &[f64; 3]| EkfConfig { q: g[0].exp(), r: g[1].exp(), p0: g[2].exp() };
    let gauss = |rng: &mut ChaCha8Rng, sigma: f64| sigma * rng.sample::<f64, _>(StandardNormal);

    let mut evals = 0usize;
    let mut pop: Vec<([f64; 3], f64)> = Vec::with_capacity(POPULATION);
    let g0 = to_log(&default);
    pop.push((g0, tuning_loss(traces, p, &default)));
    evals += 1;
    while pop.len() < POPULATION && evals < search_budget {
        let g = std::array::from_fn(|i| g0[i] + gauss(&mut rng, 2.0));
        pop.push((g, tuning_loss(traces, p, &from_log(&g))));
        evals += 1;
    }
    while evals < search_budget {
        pop.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut next: Vec<([f64; 3], f64)> = pop.iter().take(ELITE).cloned().collect();
        let parents = pop.len().div_ceil(2);
        while next.len() < POPULATION && evals < search_budget {
            let a = &pop[rng.gen_range(0..parents)].0;
            let b = &pop[rng.gen_range(0..parents)].0;
            let g = std::array::from_fn(|i| {
                let base = if rng.gen_bool(0.5) { a[i] } else { b[i] };
                base + gauss(&mut rng, 0.5)
            });
            next.push((g, tuning_loss(traces, p, &from_log(&g))));
            evals += 1;
        }
        pop = next;
    }
    pop.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(from_log(&pop[0].0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn observability_examples() {
        let o = observability_matrix(0.015, 0.015, 0.03, 0.01);
        assert_eq!(observability_rank(&o), 1);
        let o = observability_matrix(0.021, 0.011, 0.05, 0.02);
        assert!((o.determinant() - (0.011 - 0.021)).abs() < 1e-15);
        assert_eq!(observability_rank(&o), 2);
    }

    proptest! {
        #[test]
        fn determinant_independent_of_dilution(d1 in 0.0f64..0.1, d2 in 0.0f64..0.1) {
            let o = observability_matrix(0.021, 0.011, d1, d2);
            prop_assert!((o.determinant() + 0.01).abs() < 1e-14);
        }

        #[test]
        fn covariance_stays_symmetric_psd(
            x1 in 0.05f64..1.0, x2 in 0.05f64..1.0, y in 0.0f64..1.5,
            d1 in 0.0f64..0.02, d2 in 0.0f64..0.02, steps in 1usize..30,
        ) {
            let p = PlantParams::default();
            let cfg = EkfConfig::default();
            let mut est = EkfEstimate { x1_hat: x1, x2_hat: x2, p: Matrix2::identity() * cfg.p0, t: 0.0 };
            for _ in 0..steps {
                est = ekf_step(&est, &ControlInput::new(d1, d2, 0.0), y, 0.9, &p, &cfg, 1.0).unwrap();
                let asym = (est.p - est.p.transpose()).abs().max();
                prop_assert!(asym < 1e-12);
                let eig = est.p.symmetric_eigenvalues();
                prop_assert!(eig.min() >= -1e-15);
                prop_assert!(est.x1_hat >= 0.0 && est.x2_hat >= 0.0);
            }
        }
    }

    #[test]
    fn zero_gain_follows_model() {
        let p = PlantParams::default();
        let cfg = EkfConfig { q: 1e-300, r: 1.0, p0: 1e-300 };
        let est = EkfEstimate { x1_hat: 0.3, x2_hat: 0.2, p: Matrix2::identity() * cfg.p0, t: 0.0 };
        let out = ekf_step(&est, &ControlInput::ZERO, 5.0, 0.9, &p, &cfg, 1.0).unwrap();
        assert!((out.x1_hat - 0.3 * p.mu1_star.exp()).abs() < 1e-12);
        assert!((out.x2_hat - 0.2 * p.mu2_star.exp()).abs() < 1e-12);
    }

    #[test]
    fn perfect_measurement_enforces_output() {
        let p = PlantParams::default();
        let cfg = EkfConfig { r: 1e-300, ..Default::default() };
        let est = EkfEstimate { x1_hat: 0.3, x2_hat: 0.3, p: Matrix2::identity() * cfg.p0, t: 0.0 };
        let out = ekf_step(&est, &ControlInput::ZERO, 0.7, 0.9, &p, &cfg, 1.0).unwrap();
        assert!((out.x1_hat + out.x2_hat - 0.7).abs() < 1e-9);
    }

    #[test]
    fn one_cycle_matches_scalar_oracle() {
        // Independent scalar arithmetic for u = 0, dt = 1.
        let p = PlantParams::default();
        let cfg = EkfConfig::default();
        let (m1, m2) = (p.mu1_star, p.mu2_star);
        let xp1 = 0.3 * m1.exp();
        let xp2 = 0.3 * m2.exp();
        let (f1, f2) = (1.0 + m1, 1.0 + m2);
        let p11 = f1 * f1 * 0.072 + 1e-5;
        let p22 = f2 * f2 * 0.072 + 1e-5;
        let s = p11 + p22 + 5.0;
        let (k1, k2) = (p11 / s, p22 / s);
        let innov = 0.65 - xp1 - xp2;
        let e1 = xp1 + k1 * innov;
        let e2 = xp2 + k2 * innov;
        let q11 = p11 - k1 * p11;
        let q12 = -k1 * p22;
        let q22 = p22 - k2 * p22;

        let est = EkfEstimate { x1_hat: 0.3, x2_hat: 0.3, p: Matrix2::identity() * 0.072, t: 0.0 };
        let out = ekf_step(&est, &ControlInput::ZERO, 0.65, 0.9, &p, &cfg, 1.0).unwrap();
        assert!((out.x1_hat - e1).abs() < 1e-12);
        assert!((out.x2_hat - e2).abs() < 1e-12);
        assert!((out.p[(0, 0)] - q11).abs() < 1e-12);
        assert!((out.p[(0, 1)] - q12).abs() < 1e-12);
        assert!((out.p[(1, 0)] - q12).abs() < 1e-12);
        assert!((out.p[(1, 1)] - q22).abs() < 1e-12);
        assert_eq!(out.t, 1.0);
    }

    #[test]
    fn rejects_bad_dt() {
        let p = PlantParams::default();
        let est = EkfEstimate::from_measurement(0.6, 1.0, 0.072, 0.0);
        assert!(ekf_step(&est, &ControlInput::ZERO, 0.6, 0.9, &p, &EkfConfig::default(), 0.0).is_err());
    }

    #[test]
    fn tune_with_zero_budget_returns_defaults_and_empty_errors() {
        let p = PlantParams::default();
        let tr = ScenarioTrace { rows: vec![Default::default()], ..Default::default() };
        assert_eq!(tune_ekf(&[tr], 0, &p, 0).unwrap(), EkfConfig::default());
        assert!(tune_ekf(&[], 10, &p, 0).is_err());
    }
}

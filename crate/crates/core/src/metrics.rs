//! Run-quality metrics: steady state, settling time, NRMSE and the paired
//! two-tailed t-test used to compare controllers across replicates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// Half-width of the settling band relative to the steady-state value.
pub const SETTLING_BAND: f64 = 0.2;

/// Mean of the last `ceil(0.2 N)` samples.
pub fn steady_state_value(signal: &[f64]) -> Result<f64> {
    if signal.is_empty() {
        return Err(Error::InsufficientData("steady state of an empty signal".into()));
    }
    let n = (0.2 * signal.len() as f64).ceil() as usize;
    let tail = &signal[signal.len() - n..];
    Ok(tail.iter().sum::<f64>() / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Settling {
    Settled(f64),
    /// The last sample is outside the band; carries the final time.
    NotSettled(f64),
}

impl Settling {
    pub fn time(self) -> f64 {
        match self {
            Settling::Settled(t) | Settling::NotSettled(t) => t,
        }
    }

    pub fn is_settled(self) -> bool {
        matches!(self, Settling::Settled(_))
    }
}

/// Earliest sample time after which every sample stays within
/// `+-20%` of the steady-state value.
pub fn settling_time(signal: &[f64], times: &[f64]) -> Result<Settling> {
    check_lengths(signal, times)?;
    let ss = steady_state_value(signal)?;
    settling_time_to(signal, times, ss)
}

/// Settling time with respect to an explicit target value.
pub fn settling_time_to(signal: &[f64], times: &[f64], target: f64) -> Result<Settling> {
    check_lengths(signal, times)?;
    if signal.is_empty() {
        return Err(Error::InsufficientData("settling time of an empty signal".into()));
    }
    if target == 0.0 || !target.is_finite() {
        return Err(Error::Domain(format!("settling band undefined around {target}")));
    }
    let half = SETTLING_BAND * target.abs();
    let inside = |v: f64| (v - target).abs() <= half;
    match signal.iter().rposition(|&v| !inside(v)) {
        None => Ok(Settling::Settled(times[0])),
        Some(i) if i + 1 == signal.len() => Ok(Settling::NotSettled(times[i])),
        Some(i) => Ok(Settling::Settled(times[i + 1])),
    }
}

/// Mean of `|x - x_d| / sqrt(x_d)` over samples with `t >= t_s`.
pub fn nrmse(signal: &[f64], times: &[f64], x_d: f64, t_s: f64) -> Result<f64> {
    check_lengths(signal, times)?;
    if !(x_d > 0.0) {
        return Err(Error::Domain(format!("NRMSE needs x_d > 0, got {x_d}")));
    }
    let norm = x_d.sqrt();
    let (sum, n) = signal
        .iter()
        .zip(times)
        .filter(|(_, &t)| t >= t_s)
        .fold((0.0, 0usize), |(s, n), (&x, _)| (s + (x - x_d).abs() / norm, n + 1));
    if n == 0 {
        return Err(Error::InsufficientData(format!("no samples at or after t = {t_s}")));
    }
    Ok(sum / n as f64)
}

/// NRMSE against a time-varying reference, averaged over `t >= t_s`.
pub fn nrmse_tracking(signal: &[f64], times: &[f64], reference: &[f64], t_s: f64) -> Result<f64> {
    check_lengths(signal, times)?;
    check_lengths(signal, reference)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((&x, &t), &r) in signal.iter().zip(times).zip(reference) {
        if t < t_s {
            continue;
        }
        if !(r > 0.0) {
            return Err(Error::Domain(format!("NRMSE needs a positive reference, got {r}")));
        }
        sum += (x - r).abs() / r.sqrt();
        n += 1;
    }
    if n == 0 {
        return Err(Error::InsufficientData(format!("no samples at or after t = {t_s}")));
    }
    Ok(sum / n as f64)
}

/// Two-tailed p-value of the paired t-test on `a - b`.
///
/// Zero-variance differences give `p = 1` when the mean difference is zero
/// and `p = 0` otherwise.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("paired t-test needs n >= 2, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok(if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist =
        StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::Numerical(format!("t distribution: {e}")))?;
    Ok((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(())
}

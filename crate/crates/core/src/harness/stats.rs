//! Per-trace metrics for each controlled signal and their aggregation across
//! replicates.
//!
//! A signal is split into segments wherever its reference changes or a
//! perturbation occurs. In each segment the settling time is measured from
//! the segment start and NRMSE is averaged from the settling time to the
//! segment end. Ratio metrics come from emulated flow-cytometry samples (true
//! `x2 / x1` every `facs_interval` minutes); estimate-based ratio metrics are
//! reported separately.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::harness::trace::{ScenarioTrace, TraceRow};
use crate::metrics::{nrmse, paired_ttest, settling_time, Settling};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signal {
    /// True ratio at flow-cytometry sampling times.
    Ratio,
    /// Observer-reconstructed ratio at every sample.
    RatioEstimated,
    /// Measured total biomass in the mixing chamber.
    Od,
    /// Measured reservoir density.
    Reservoir,
}

impl Signal {
    pub fn name(self) -> &'static str {
        match self {
            Signal::Ratio => "ratio",
            Signal::RatioEstimated => "ratio-estimated",
            Signal::Od => "od",
            Signal::Reservoir => "reservoir",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentMetrics {
    pub start: f64,
    pub end: f64,
    pub reference: f64,
    /// Settling time measured from `start`.
    pub settling: Settling,
    pub nrmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMetrics {
    pub signal: Signal,
    pub segments: Vec<SegmentMetrics>,
}

impl SignalMetrics {
    pub fn all_settled(&self) -> bool {
        self.segments.iter().all(|s| s.settling.is_settled())
    }

    pub fn mean_settling(&self) -> f64 {
        mean(self.segments.iter().map(|s| s.settling.time()))
    }

    pub fn mean_nrmse(&self) -> f64 {
        mean(self.segments.iter().map(|s| s.nrmse))
    }

    pub fn max_settling(&self) -> f64 {
        self.segments.iter().map(|s| s.settling.time()).fold(0.0, f64::max)
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn is_facs_time(t: f64, facs_interval: f64) -> bool {
    let k = (t / facs_interval).round();
    (t - k * facs_interval).abs() < 1e-9
}

/// `(t, value, reference)` samples of a signal.
pub fn signal_samples(trace: &ScenarioTrace, signal: Signal, facs_interval: f64) -> Vec<(f64, f64, f64)> {
    let pick = |r: &TraceRow| -> Option<(f64, f64, f64)> {
        match signal {
            Signal::Ratio => (is_facs_time(r.t, facs_interval) && r.x1 > 0.0).then(|| (r.t, r.x2 / r.x1, r.r_d)),
            Signal::RatioEstimated => (r.x1_hat > 0.0).then(|| (r.t, r.x2_hat / r.x1_hat, r.r_d)),
            Signal::Od => Some((r.t, r.y1, r.od_d)),
            Signal::Reservoir => Some((r.t, r.y2, r.x2r_d)),
        }
    };
    trace.rows.iter().filter_map(pick).collect()
}

/// Segmented settling time and NRMSE of one signal. `breaks` adds segment
/// boundaries besides reference changes (e.g. perturbation times).
pub fn signal_metrics(
    trace: &ScenarioTrace,
    signal: Signal,
    facs_interval: f64,
    breaks: &[f64],
) -> Result<SignalMetrics> {
    let samples = signal_samples(trace, signal, facs_interval);
    let reference_of = |r: &TraceRow| match signal {
        Signal::Ratio | Signal::RatioEstimated => r.r_d,
        Signal::Od => r.od_d,
        Signal::Reservoir => r.x2r_d,
    };
    let mut bounds: Vec<f64> = trace
        .rows
        .windows(2)
        .filter(|w| reference_of(&w[0]) != reference_of(&w[1]))
        .map(|w| w[1].t)
        .chain(breaks.iter().copied())
        .collect();
    bounds.sort_by(f64::total_cmp);
    bounds.dedup();
    let t_end = trace.rows.last().map_or(0.0, |r| r.t);

    let mut segments = Vec::new();
    let mut start = trace.rows.first().map_or(0.0, |r| r.t);
    for end in bounds.into_iter().chain(std::iter::once(f64::INFINITY)) {
        let seg: Vec<&(f64, f64, f64)> = samples.iter().filter(|s| s.0 >= start && s.0 < end).collect();
        if !seg.is_empty() {
            let t: Vec<f64> = seg.iter().map(|s| s.0 - start).collect();
            let x: Vec<f64> = seg.iter().map(|s| s.1).collect();
            let reference = seg[0].2;
            let settling = settling_time(&x, &t)?;
            let e = nrmse(&x, &t, reference, settling.time())?;
            segments.push(SegmentMetrics { start, end: end.min(t_end), reference, settling, nrmse: e });
        }
        start = end;
    }
    Ok(SignalMetrics { signal, segments })
}

/// Signals that apply to the trace: mixing-chamber signals only when a
/// mixing controller was active.
pub fn applicable_signals(trace: &ScenarioTrace) -> Vec<Signal> {
    if trace.meta.mixing_controller == "none" {
        vec![Signal::Reservoir]
    } else {
        vec![Signal::Ratio, Signal::RatioEstimated, Signal::Od, Signal::Reservoir]
    }
}

pub fn evaluate_trace(trace: &ScenarioTrace, facs_interval: f64, breaks: &[f64]) -> Result<Vec<SignalMetrics>> {
    applicable_signals(trace).into_iter().map(|s| signal_metrics(trace, s, facs_interval, breaks)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub std: f64,
    pub n: usize,
    /// Replicates left out because the metric was undefined.
    pub excluded: usize,
}

impl Summary {
    pub fn of(values: &[Option<f64>]) -> Self {
        let v: Vec<f64> = values.iter().flatten().copied().collect();
        let n = v.len();
        let m = mean(v.iter().copied());
        let std = if n > 1 { (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Self { mean: m, std, n, excluded: values.len() - n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub label: String,
    /// Per signal: `(settling, nrmse)` summaries.
    pub signals: BTreeMap<Signal, (Summary, Summary)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestRow {
    pub signal: Signal,
    pub metric: String,
    pub a: String,
    pub b: String,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub groups: Vec<GroupStats>,
    pub ttests: Vec<TTestRow>,
}

/// Aggregates replicate traces per labelled group (e.g. one group per
/// controller) and runs paired t-tests between every pair of groups.
/// A replicate whose signal never settles is excluded from that signal.
pub fn replicate_stats(
    groups: &[(String, Vec<ScenarioTrace>)],
    facs_interval: f64,
    breaks: &[f64],
) -> Result<StatsReport> {
    // signal -> per replicate (settling, nrmse), one map per group
    type PerSignal = BTreeMap<Signal, Vec<Option<(f64, f64)>>>;
    let mut values: Vec<PerSignal> = Vec::new();
    for (_, traces) in groups {
        let mut per_signal = PerSignal::new();
        for tr in traces {
            for m in evaluate_trace(tr, facs_interval, breaks)? {
                let v = m.all_settled().then(|| (m.mean_settling(), m.mean_nrmse()));
                per_signal.entry(m.signal).or_default().push(v);
            }
        }
        values.push(per_signal);
    }
    let stats = groups
        .iter()
        .zip(&values)
        .map(|((label, _), per_signal)| GroupStats {
            label: label.clone(),
            signals: per_signal
                .iter()
                .map(|(s, v)| {
                    let ts: Vec<Option<f64>> = v.iter().map(|o| o.map(|x| x.0)).collect();
                    let e: Vec<Option<f64>> = v.iter().map(|o| o.map(|x| x.1)).collect();
                    (*s, (Summary::of(&ts), Summary::of(&e)))
                })
                .collect(),
        })
        .collect();

    let mut ttests = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            for (signal, a) in &values[i] {
                let Some(b) = values[j].get(signal) else { continue };
                for (metric, pick) in [("settling", 0usize), ("nrmse", 1usize)] {
                    let pairs: Vec<(f64, f64)> = a
                        .iter()
                        .zip(b)
                        .filter_map(|(x, y)| Some((x.as_ref()?, y.as_ref()?)))
                        .map(|(x, y)| if pick == 0 { (x.0, y.0) } else { (x.1, y.1) })
                        .collect();
                    let (xa, xb): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                    ttests.push(TTestRow {
                        signal: *signal,
                        metric: metric.into(),
                        a: groups[i].0.clone(),
                        b: groups[j].0.clone(),
                        p: paired_ttest(&xa, &xb).ok(),
                    });
                }
            }
        }
    }
    Ok(StatsReport { groups: stats, ttests })
}

/// Smallest true biomass over active chambers after `after` minutes.
pub fn min_biomass_after(trace: &ScenarioTrace, after: f64) -> f64 {
    let mixing = trace.meta.mixing_controller != "none";
    trace
        .rows
        .iter()
        .filter(|r| r.t >= after)
        .map(|r| if mixing { r.x1.min(r.x2).min(r.x2r) } else { r.x2r })
        .fold(f64::INFINITY, f64::min)
}

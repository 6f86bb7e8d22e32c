//! Per-run time series and its CSV representation.
//!
//! Trace CSV layout: optional `# key=value` metadata lines, then a header and
//! one row per sampling interval with the columns in [`COLUMNS`] order. Values
//! are decimal with 9 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const COLUMNS: [&str; 16] =
    ["t", "x1", "x2", "s1", "x2r", "s2", "y1", "y2", "x1_hat", "x2_hat", "d1", "d2", "dr", "r_d", "od_d", "x2r_d"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strain {
    Fast,
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub s1: f64,
    pub x2r: f64,
    pub s2: f64,
    pub y1: f64,
    pub y2: f64,
    pub x1_hat: f64,
    pub x2_hat: f64,
    pub d1: f64,
    pub d2: f64,
    pub dr: f64,
    pub r_d: f64,
    pub od_d: f64,
    pub x2r_d: f64,
}

impl TraceRow {
    fn values(&self) -> [f64; 16] {
        [
            self.t,
            self.x1,
            self.x2,
            self.s1,
            self.x2r,
            self.s2,
            self.y1,
            self.y2,
            self.x1_hat,
            self.x2_hat,
            self.d1,
            self.d2,
            self.dr,
            self.r_d,
            self.od_d,
            self.x2r_d,
        ]
    }

    fn from_values(v: &[f64]) -> Self {
        Self {
            t: v[0],
            x1: v[1],
            x2: v[2],
            s1: v[3],
            x2r: v[4],
            s2: v[5],
            y1: v[6],
            y2: v[7],
            x1_hat: v[8],
            x2_hat: v[9],
            d1: v[10],
            d2: v[11],
            dr: v[12],
            r_d: v[13],
            od_d: v[14],
            x2r_d: v[15],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scenario: String,
    pub seed: u64,
    pub mixing_controller: String,
    pub reservoir_controller: String,
    pub config_hash: String,
    /// Set for open-loop monoculture traces used in identification.
    pub monoculture: Option<Strain>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
}

/// Formats `v` in plain decimal notation with 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { format!("{v}") };
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (8 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // 9.9999999995 rounds up a digit; re-check with the rounded magnitude.
    let rounded: f64 = s.parse().unwrap_or(v);
    let mag2 = rounded.abs().log10().floor() as i32;
    if mag2 != mag && rounded != 0.0 {
        let decimals = (8 - mag2).max(0) as usize;
        return format!("{v:.decimals$}");
    }
    s
}

impl ScenarioTrace {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn column(&self, f: impl Fn(&TraceRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let m = &self.meta;
        writeln!(w, "# scenario={}", m.scenario)?;
        writeln!(w, "# seed={}", m.seed)?;
        writeln!(w, "# mixing_controller={}", m.mixing_controller)?;
        writeln!(w, "# reservoir_controller={}", m.reservoir_controller)?;
        writeln!(w, "# config_hash={}", m.config_hash)?;
        if let Some(s) = m.monoculture {
            let s = match s {
                Strain::Fast => "fast",
                Strain::Slow => "slow",
            };
            writeln!(w, "# monoculture={s}")?;
        }
        writeln!(w, "{}", COLUMNS.join(","))?;
        for r in &self.rows {
            let line: Vec<String> = r.values().iter().map(|v| format_sig9(*v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let malformed = |reason: String| Error::Malformed { path: path.to_path_buf(), reason };
        let mut meta = TraceMeta::default();
        let file = BufReader::new(File::open(path)?);
        for line in file.lines() {
            let line = line?;
            let Some(kv) = line.strip_prefix('#') else { break };
            let Some((k, v)) = kv.trim().split_once('=') else { continue };
            match k {
                "scenario" => meta.scenario = v.to_string(),
                "seed" => meta.seed = v.parse().map_err(|_| malformed(format!("bad seed `{v}`")))?,
                "mixing_controller" => meta.mixing_controller = v.to_string(),
                "reservoir_controller" => meta.reservoir_controller = v.to_string(),
                "config_hash" => meta.config_hash = v.to_string(),
                "monoculture" => {
                    meta.monoculture = match v {
                        "fast" => Some(Strain::Fast),
                        "slow" => Some(Strain::Slow),
                        _ => return Err(malformed(format!("bad monoculture `{v}`"))),
                    }
                }
                _ => {}
            }
        }
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != COLUMNS {
            return Err(malformed("unexpected header".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| malformed(e.to_string()))?;
            if vals.len() != COLUMNS.len() {
                return Err(malformed(format!("row with {} fields", vals.len())));
            }
            rows.push(TraceRow::from_values(&vals));
        }
        Ok(Self { meta, rows })
    }

    /// Long-format `t,series,value` CSV for plotting.
    pub fn write_long_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "t,series,value")?;
        for r in &self.rows {
            let t = format_sig9(r.t);
            for (name, v) in COLUMNS.iter().zip(r.values()).skip(1) {
                writeln!(w, "{t},{name},{}", format_sig9(v))?;
            }
            if r.x1 > 0.0 {
                writeln!(w, "{t},ratio,{}", format_sig9(r.x2 / r.x1))?;
            }
            if r.x1_hat > 0.0 {
                writeln!(w, "{t},ratio_hat,{}", format_sig9(r.x2_hat / r.x1_hat))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(0.123456789123), "0.123456789");
        assert_eq!(format_sig9(240.0), "240.000000");
        assert_eq!(format_sig9(-0.0025), "-0.00250000000");
        assert_eq!(format_sig9(9.9999999999), "10.0000000");
    }

    proptest! {
        #[test]
        fn sig9_relative_precision(v in -1e4f64..1e4) {
            prop_assume!(v.abs() > 1e-6);
            let back: f64 = format_sig9(v).parse().unwrap();
            prop_assert!(((back - v) / v).abs() <= 5e-9);
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let trace = ScenarioTrace {
            meta: TraceMeta {
                scenario: "x".into(),
                seed: 3,
                mixing_controller: "switching".into(),
                reservoir_controller: "pi".into(),
                config_hash: "abc".into(),
                monoculture: Some(Strain::Slow),
            },
            rows: vec![
                TraceRow { t: 0.0, x1: 0.4, y1: 0.81, ..Default::default() },
                TraceRow { t: 1.0, x1: 0.41, d1: 0.01, ..Default::default() },
            ],
        };
        trace.write_csv(&path).unwrap();
        let back = ScenarioTrace::read_csv(&path).unwrap();
        assert_eq!(back, trace);
    }
}

use serde::{Deserialize, Serialize};

use crate::plant::PlantParams;
use crate::{Error, Result};

/// Set-points for both chambers. `r_d` is the ratio `x2 / x1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub r_d: f64,
    pub od_d: f64,
    pub x2r_d: f64,
}

impl Reference {
    pub fn validate(&self, p: &PlantParams) -> Result<()> {
        if !(self.r_d > 0.0) {
            return Err(Error::InvalidParameter(format!("r_d must be > 0, got {}", self.r_d)));
        }
        if !(self.od_d > 2.0 * p.x_min && self.od_d <= p.x_max) {
            return Err(Error::InvalidParameter(format!(
                "od_d must lie in ({}, {}], got {}",
                2.0 * p.x_min,
                p.x_max,
                self.od_d
            )));
        }
        if !(self.x2r_d >= p.x_min && self.x2r_d <= p.x_max) {
            return Err(Error::InvalidParameter(format!(
                "x2r_d must lie in [{}, {}], got {}",
                p.x_min, p.x_max, self.x2r_d
            )));
        }
        Ok(())
    }
}

/// Splits total biomass `od_d` into `(x1_d, x2_d)` with `x2_d / x1_d = r_d`.
pub fn desired_split(reference: &Reference) -> Result<(f64, f64)> {
    let Reference { r_d, od_d, .. } = *reference;
    if !(r_d > 0.0) {
        return Err(Error::InvalidParameter(format!("r_d must be > 0, got {r_d}")));
    }
    let x1 = od_d / (1.0 + r_d);
    let x2 = r_d * od_d / (1.0 + r_d);
    Ok((x1, x2))
}

/// Piecewise-constant signal: each `(start, value)` holds until the next start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule(pub Vec<(f64, f64)>);

impl Schedule {
    pub fn constant(v: f64) -> Self {
        Self(vec![(0.0, v)])
    }

    pub fn steps(segments: &[(f64, f64)]) -> Self {
        Self(segments.to_vec())
    }

    pub fn at(&self, t: f64) -> f64 {
        self.0.iter().rev().find(|(start, _)| *start <= t).or(self.0.first()).map(|(_, v)| *v).unwrap_or(f64::NAN)
    }

    /// Times at which the value changes, excluding the first segment.
    pub fn change_times(&self) -> Vec<f64> {
        self.0.iter().skip(1).map(|(t, _)| *t).collect()
    }

    fn covers_origin(&self) -> bool {
        self.0.first().is_some_and(|(t, _)| *t <= 0.0) && self.0.windows(2).all(|w| w[0].0 < w[1].0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSchedule {
    pub r_d: Schedule,
    pub od_d: Schedule,
    pub x2r_d: Schedule,
}

impl ReferenceSchedule {
    pub fn constant(r: Reference) -> Self {
        Self { r_d: Schedule::constant(r.r_d), od_d: Schedule::constant(r.od_d), x2r_d: Schedule::constant(r.x2r_d) }
    }

    pub fn at(&self, t: f64) -> Reference {
        Reference { r_d: self.r_d.at(t), od_d: self.od_d.at(t), x2r_d: self.x2r_d.at(t) }
    }

    pub fn validate(&self, p: &PlantParams) -> Result<()> {
        for s in [&self.r_d, &self.od_d, &self.x2r_d] {
            if !s.covers_origin() {
                return Err(Error::InvalidParameter(
                    "schedules must start at t = 0 with increasing start times".into(),
                ));
            }
        }
        let mut times: Vec<f64> =
            [&self.r_d, &self.od_d, &self.x2r_d].iter().flat_map(|s| s.0.iter().map(|(t, _)| *t)).collect();
        times.push(0.0);
        for t in times {
            self.at(t).validate(p)?;
        }
        Ok(())
    }
}

//! Greedy inference for trained Q-networks in both chambers.

use std::collections::VecDeque;

use crate::plant::ControlInput;
use crate::rl::QNetwork;
use crate::{Error, Result};

pub const HISTORY_LEN: usize = 5;

/// Mixing-chamber actions as `(d1, d2)`; index = `i_d1 * 2 + i_d2`.
pub const MIXING_ACTIONS: [(f64, f64); 6] =
    [(0.0, 0.0), (0.0, 0.02), (0.01, 0.0), (0.01, 0.02), (0.02, 0.0), (0.02, 0.02)];

/// Reservoir actions: 17 evenly spaced commands in `[0, 0.02]`.
pub const RESERVOIR_ACTIONS: [f64; 17] = {
    let mut a = [0.0; 17];
    let mut i = 0;
    while i < 17 {
        a[i] = 0.00125 * i as f64;
        i += 1;
    }
    a
};

/// Sliding window of the latest `(x1 - x1_d, x2 - x2_d)` errors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorHistory {
    buf: VecDeque<(f64, f64)>,
}

impl ErrorHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e1: f64, e2: f64) {
        if self.buf.len() == HISTORY_LEN {
            self.buf.pop_front();
        }
        self.buf.push_back((e1, e2));
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }

    /// Oldest first, interleaved `e1, e2`; short histories repeat the oldest
    /// entry at the front. An empty history yields zeros.
    pub fn features(&self) -> [f64; 2 * HISTORY_LEN] {
        let mut out = [0.0; 2 * HISTORY_LEN];
        let Some(&oldest) = self.buf.front() else {
            return out;
        };
        let pad = HISTORY_LEN - self.buf.len();
        for i in 0..HISTORY_LEN {
            let (a, b) = if i < pad { oldest } else { self.buf[i - pad] };
            out[2 * i] = a;
            out[2 * i + 1] = b;
        }
        out
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy(q: &[f64]) -> Result<usize> {
    let mut best = 0;
    for (i, v) in q.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite Q-value at action {i}")));
        }
        if *v > q[best] {
            best = i;
        }
    }
    Ok(best)
}

fn check_finite(features: &[f64]) -> Result<()> {
    if features.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("non-finite policy input".into()))
    }
}

/// Greedy mixing action; `dr` is left at zero.
pub fn dqn_mixing_action(history: &ErrorHistory, net: &QNetwork) -> Result<(usize, ControlInput)> {
    let features = history.features();
    check_finite(&features)?;
    let a = greedy(&net.forward(&features)?)?;
    let (d1, d2) = *MIXING_ACTIONS
        .get(a)
        .ok_or(Error::DimensionMismatch { expected: MIXING_ACTIONS.len(), got: net.n_outputs() })?;
    Ok((a, ControlInput::new(d1, d2, 0.0)))
}

/// Greedy reservoir command from `(x2r, x2r_d)`.
pub fn dqn_reservoir_action(x2r: f64, x2r_d: f64, net: &QNetwork) -> Result<f64> {
    let features = [x2r, x2r_d];
    check_finite(&features)?;
    let a = greedy(&net.forward(&features)?)?;
    RESERVOIR_ACTIONS
        .get(a)
        .copied()
        .ok_or(Error::DimensionMismatch { expected: RESERVOIR_ACTIONS.len(), got: net.n_outputs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::{MIXING_DIMS, RESERVOIR_DIMS};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn action_grids() {
        assert_eq!(RESERVOIR_ACTIONS[0], 0.0);
        assert!((RESERVOIR_ACTIONS[16] - 0.02).abs() < 1e-15);
        assert_eq!(MIXING_ACTIONS[3], (0.01, 0.02));
    }

    #[test]
    fn history_padding_repeats_oldest() {
        let mut h = ErrorHistory::new();
        assert_eq!(h.features(), [0.0; 10]);
        h.push(1.0, 2.0);
        h.push(3.0, 4.0);
        assert_eq!(h.features(), [1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 3.0, 4.0]);
        for i in 0..6 {
            h.push(i as f64, -(i as f64));
        }
        assert_eq!(h.len(), 5);
        assert_eq!(h.features()[0], 1.0);
        assert_eq!(h.features()[9], -5.0);
    }

    #[test]
    fn zero_networks_pick_first_action() {
        let mut h = ErrorHistory::new();
        h.push(0.1, -0.1);
        let (a, u) = dqn_mixing_action(&h, &QNetwork::zeros(&MIXING_DIMS)).unwrap();
        assert_eq!(a, 0);
        assert_eq!(u, ControlInput::ZERO);
        assert_eq!(dqn_reservoir_action(0.7, 0.5, &QNetwork::zeros(&RESERVOIR_DIMS)).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let net = QNetwork::zeros(&RESERVOIR_DIMS);
        assert!(dqn_reservoir_action(f64::NAN, 0.5, &net).is_err());
        let mut h = ErrorHistory::new();
        h.push(f64::INFINITY, 0.0);
        assert!(dqn_mixing_action(&h, &QNetwork::zeros(&MIXING_DIMS)).is_err());
    }

    #[test]
    fn greedy_breaks_ties_low() {
        assert_eq!(greedy(&[1.0, 3.0, 3.0, 2.0]).unwrap(), 1);
    }

    proptest! {
        #[test]
        fn actions_stay_on_grid(seed in 0u64..500, e in proptest::array::uniform10(-1.0f64..1.0)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = QNetwork::random(&MIXING_DIMS, &mut rng);
            let mut h = ErrorHistory::new();
            for k in 0..5 {
                h.push(e[2 * k], e[2 * k + 1]);
            }
            let (a, u) = dqn_mixing_action(&h, &net).unwrap();
            prop_assert_eq!((u.d1, u.d2), MIXING_ACTIONS[a]);
            let rnet = QNetwork::random(&RESERVOIR_DIMS, &mut rng);
            let d = dqn_reservoir_action(e[0].abs(), e[1].abs(), &rnet).unwrap();
            prop_assert!(RESERVOIR_ACTIONS.contains(&d));
        }
    }
}

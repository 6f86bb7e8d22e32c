//! Dense ReLU action-value network with analytic gradients for the Huber TD
//! loss, an Adam optimiser, and a flat text weight format.
//!
//! Weight file format (whitespace separated, one item per line):
//!
//! ```text
//! QNET 1
//! <n_0> <n_1> ... <n_L>          layer widths, input first
//! <w row 0 of layer 1>            n_1 lines of n_0 values, row-major (out x in)
//! ...
//! <b of layer 1>                  one line of n_1 values
//! ... repeated for each layer
//! ```
//!
//! Values are printed in the shortest form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::{Error, Result};

pub const HIDDEN: usize = 64;
pub const MIXING_DIMS: [usize; 4] = [10, HIDDEN, HIDDEN, 6];
pub const RESERVOIR_DIMS: [usize; 4] = [2, HIDDEN, HIDDEN, 17];

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub layers: Vec<Dense>,
}

/// Parameter-shaped buffer (gradients, optimiser moments).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

impl Gradients {
    fn zeros_like(net: &QNetwork) -> Self {
        Self {
            w: net.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            b: net.layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
        }
    }
}

fn huber(e: f64) -> f64 {
    if e.abs() <= 1.0 {
        0.5 * e * e
    } else {
        e.abs() - 0.5
    }
}

fn huber_grad(e: f64) -> f64 {
    e.clamp(-1.0, 1.0)
}

impl QNetwork {
    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            layers: dims.windows(2).map(|w| Dense { w: Array2::zeros((w[1], w[0])), b: Array1::zeros(w[1]) }).collect(),
        }
    }

    /// He-uniform hidden layers, small uniform output layer, zero biases.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let limit = if i + 1 == n { (1.0 / w[0] as f64).sqrt() } else { (6.0 / w[0] as f64).sqrt() };
                Dense {
                    w: Array2::from_shape_fn((w[1], w[0]), |_| rng.gen_range(-limit..limit)),
                    b: Array1::zeros(w[1]),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.n_inputs()];
        d.extend(self.layers.iter().map(|l| l.b.len()));
        d
    }

    pub fn n_inputs(&self) -> usize {
        self.layers.first().map_or(0, |l| l.w.ncols())
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.b.len())
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch { expected: self.n_inputs(), got: features.len() });
        }
        let x = ArrayView2::from_shape((1, features.len()), features).expect("row shape");
        Ok(self.forward_batch(x).row(0).to_vec())
    }

    /// `states` is `batch x inputs`; returns `batch x outputs`.
    pub fn forward_batch(&self, states: ArrayView2<f64>) -> Array2<f64> {
        let n = self.layers.len();
        let mut a = states.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.w.t()) + &l.b;
            if i + 1 < n {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        a
    }

    /// Mean Huber loss of `Q(s, a) - target` over the batch.
    pub fn td_loss(&self, states: ArrayView2<f64>, actions: &[usize], targets: &[f64]) -> f64 {
        let q = self.forward_batch(states);
        let n = actions.len() as f64;
        actions.iter().zip(targets).enumerate().map(|(i, (&a, &y))| huber(q[[i, a]] - y)).sum::<f64>() / n
    }

    /// Loss and its gradient with respect to every weight and bias.
    pub fn td_loss_and_grad(&self, states: ArrayView2<f64>, actions: &[usize], targets: &[f64]) -> (f64, Gradients) {
        let n_layers = self.layers.len();
        let batch = actions.len();
        // Layer inputs; activations[i] feeds layer i.
        let mut activations: Vec<Array2<f64>> = Vec::with_capacity(n_layers + 1);
        activations.push(states.to_owned());
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = activations[i].dot(&l.w.t()) + &l.b;
            if i + 1 < n_layers {
                z.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(z);
        }
        let q = &activations[n_layers];
        let mut delta = Array2::<f64>::zeros(q.raw_dim());
        let mut loss = 0.0;
        for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let e = q[[i, a]] - y;
            loss += huber(e);
            delta[[i, a]] = huber_grad(e) / batch as f64;
        }
        loss /= batch as f64;

        let mut grads = Gradients::zeros_like(self);
        for i in (0..n_layers).rev() {
            grads.w[i] = delta.t().dot(&activations[i]);
            grads.b[i] = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].w);
                // ReLU derivative from the post-activation values.
                ndarray::Zip::from(&mut back).and(&activations[i]).for_each(|g, &h| {
                    if h <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
        }
        (loss, grads)
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("QNET 1\n");
        let dims: Vec<String> = self.dims().iter().map(|d| d.to_string()).collect();
        s.push_str(&dims.join(" "));
        s.push('\n');
        let join = |it: &mut dyn Iterator<Item = &f64>| {
            let v: Vec<String> = it.map(|x| format!("{x:e}")).collect();
            v.join(" ")
        };
        for l in &self.layers {
            for row in l.w.rows() {
                let _ = writeln!(s, "{}", join(&mut row.iter()));
            }
            let _ = writeln!(s, "{}", join(&mut l.b.iter()));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Malformed { path: "<weights>".into(), reason: reason.to_string() };
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("QNET 1") {
            return Err(bad("missing `QNET 1` header"));
        }
        let dims: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("missing dimensions"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad dimension")))
            .collect::<Result<_>>()?;
        if dims.len() < 2 || dims.contains(&0) {
            return Err(bad("need at least two positive dimensions"));
        }
        let mut values = lines.flat_map(str::split_whitespace).map(|t| t.parse::<f64>().map_err(|_| bad("bad value")));
        let mut net = QNetwork::zeros(&dims);
        for l in &mut net.layers {
            for w in l.w.iter_mut().chain(l.b.iter_mut()) {
                *w = values.next().ok_or_else(|| bad("truncated weights"))??;
            }
        }
        if values.next().is_some() {
            return Err(bad("trailing values"));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|e| match e {
            Error::Malformed { reason, .. } => Error::Malformed { path: path.to_path_buf(), reason },
            other => other,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &QNetwork, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut QNetwork, g: &Gradients) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.lr;
        let eps = self.eps;
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (i, l) in net.layers.iter_mut().enumerate() {
            ndarray::Zip::from(&mut l.w)
                .and(&g.w[i])
                .and(&mut self.m.w[i])
                .and(&mut self.v.w[i])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut l.b)
                .and(&g.b[i])
                .and(&mut self.m.b[i])
                .and(&mut self.v.b[i])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

/// `-100 tanh^2(w|e1|) - 100 tanh^2(w|e2|)` plus a single `-100` penalty when
/// either strain is below `x_min`.
pub fn mixing_reward(x1: f64, x2: f64, x1_d: f64, x2_d: f64, x_min: f64, w: f64, penalty: f64) -> f64 {
    let shaped = |e: f64| 100.0 * (w * e.abs()).tanh().powi(2);
    let p = if x1 < x_min || x2 < x_min { penalty } else { 0.0 };
    -shaped(x1 - x1_d) - shaped(x2 - x2_d) + p
}

pub fn reservoir_reward(x2r: f64, x2r_d: f64) -> f64 {
    -(x2r - x2r_d).powi(2)
}

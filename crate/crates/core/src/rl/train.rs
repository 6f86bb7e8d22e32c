use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::greedy;
use crate::plant::PlantParams;
use crate::rl::env::{EnvKind, Environment, MixingEnv, ReferenceSets, ReservoirEnv};
use crate::rl::network::{Adam, QNetwork, MIXING_DIMS, RESERVOIR_DIMS};
use crate::rl::replay::{ReplayBuffer, Transition};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Sampling interval (min).
    pub dt: f64,
    pub learning_rate: f64,
    /// Discount factor for the mixing policy.
    pub mixing_gamma: f64,
    /// Discount factor for the reservoir policy.
    pub reservoir_gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Transitions collected before the first gradient step.
    pub warmup: usize,
    /// Gradient steps between target-network copies.
    pub target_sync: usize,
    /// Gradient steps taken after each environment step.
    pub updates_per_step: usize,
    /// Pick the bootstrap action with the online network (double DQN).
    pub double_dqn: bool,
    /// Episodes between greedy validation runs; 0 keeps the final network.
    pub eval_interval: usize,
    /// Fixed-seed episodes per validation run.
    pub eval_episodes: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of all environment steps over which epsilon decays linearly.
    pub eps_decay_fraction: f64,
    pub mu_sigma_fraction: f64,
    pub meas_noise_var: f64,
    pub reward_width: f64,
    pub penalty: f64,
    /// Multiplier on the mixing reward seen by the learner.
    pub mixing_reward_scale: f64,
    /// Multiplier on the reservoir reward seen by the learner.
    pub reservoir_reward_scale: f64,
    /// Reservoir density held fixed while training the mixing policy.
    pub mixing_x2r: f64,
    /// Per-step probability of a new reservoir set-point within an episode.
    pub reservoir_switch_prob: f64,
    pub sets: ReferenceSets,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 200,
            steps_per_episode: 180,
            dt: 1.0,
            learning_rate: 1e-3,
            mixing_gamma: 0.95,
            reservoir_gamma: 0.99,
            batch_size: 64,
            replay_capacity: 10_000,
            warmup: 500,
            target_sync: 500,
            updates_per_step: 1,
            double_dqn: true,
            eval_interval: 5,
            eval_episodes: 16,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_fraction: 0.5,
            mu_sigma_fraction: 0.15,
            meas_noise_var: 0.001,
            reward_width: 2.0,
            penalty: -100.0,
            mixing_reward_scale: 0.01,
            reservoir_reward_scale: 100.0,
            mixing_x2r: 0.9,
            reservoir_switch_prob: 0.0,
            sets: ReferenceSets::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.steps_per_episode == 0 {
            return bad("steps_per_episode must be > 0");
        }
        if ![self.mixing_gamma, self.reservoir_gamma].iter().all(|g| *g > 0.0 && *g < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0) || !(self.dt > 0.0) {
            return bad("learning_rate and dt must be > 0");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.target_sync == 0 || self.updates_per_step == 0 {
            return bad("batch_size, replay_capacity, target_sync and updates_per_step must be > 0");
        }
        if self.eval_interval > 0 && self.eval_episodes == 0 {
            return bad("eval_episodes must be > 0 when validation is enabled");
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return bad("epsilon bounds must lie in [0, 1]");
        }
        if self.sets.ratios.iter().any(|r| !(*r > 0.0))
            || self.sets.ratios.is_empty()
            || self.sets.reservoir.is_empty()
            || self.sets.initial_od.is_empty()
        {
            return bad("reference sets must be non-empty with positive ratios");
        }
        Ok(())
    }

    fn epsilon(&self, step: usize) -> f64 {
        let total = (self.episodes * self.steps_per_episode) as f64;
        let horizon = (self.eps_decay_fraction * total).max(1.0);
        let frac = (step as f64 / horizon).min(1.0);
        self.eps_start + frac * (self.eps_end - self.eps_start)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Undiscounted, scaled return per episode.
    pub episode_returns: Vec<f64>,
    /// Mean TD loss per episode (NaN before learning starts).
    pub episode_losses: Vec<f64>,
    pub gradient_steps: usize,
    /// (episode, mean greedy return) for every validation run.
    pub validation: Vec<(usize, f64)>,
    /// Episode after which the returned network was taken, if validation ran.
    pub selected_episode: Option<usize>,
}

impl TrainLog {
    /// Mean return over the first and the last `n` episodes.
    pub fn head_tail_means(&self, n: usize) -> (f64, f64) {
        let r = &self.episode_returns;
        let n = n.min(r.len()).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
        (mean(&r[..n.min(r.len())]), mean(&r[r.len().saturating_sub(n)..]))
    }
}

/// Trains a fresh network for the chosen chamber. Deterministic in `seed`.
pub fn train_dqn(kind: EnvKind, p: &PlantParams, cfg: &TrainConfig, seed: u64) -> Result<(QNetwork, TrainLog)> {
    cfg.validate()?;
    match kind {
        EnvKind::Mixing => {
            let mut env = MixingEnv::new(*p, cfg.sets.clone());
            env.sigma_fraction = cfg.mu_sigma_fraction;
            env.noise_var = cfg.meas_noise_var;
            env.x2r = cfg.mixing_x2r;
            env.dt = cfg.dt;
            env.width = cfg.reward_width;
            env.penalty = cfg.penalty;
            env.reward_scale = cfg.mixing_reward_scale;
            train_on(&mut env, &MIXING_DIMS, cfg, cfg.mixing_gamma, seed)
        }
        EnvKind::Reservoir => {
            let mut env = ReservoirEnv::new(*p, cfg.sets.clone());
            env.sigma_fraction = cfg.mu_sigma_fraction;
            env.noise_var = cfg.meas_noise_var;
            env.dt = cfg.dt;
            env.reward_scale = cfg.reservoir_reward_scale;
            env.switch_prob = cfg.reservoir_switch_prob;
            train_on(&mut env, &RESERVOIR_DIMS, cfg, cfg.reservoir_gamma, seed)
        }
    }
}

/// DQN loop on an arbitrary environment: epsilon-greedy behaviour, uniform
/// replay, Huber TD targets from a periodically synchronised target network
/// and Adam updates. With validation enabled the returned network is the
/// checkpoint with the best greedy validation return, not the last one.
pub fn train_on<E: Environment>(
    env: &mut E,
    dims: &[usize],
    cfg: &TrainConfig,
    gamma: f64,
    seed: u64,
) -> Result<(QNetwork, TrainLog)> {
    cfg.validate()?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if dims.first() != Some(&env.n_features()) || dims.last() != Some(&env.n_actions()) {
        return Err(Error::DimensionMismatch { expected: env.n_features(), got: dims.first().copied().unwrap_or(0) });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut online = QNetwork::random(dims, &mut rng);
    let mut log = TrainLog::default();
    if cfg.episodes == 0 {
        return Ok((online, log));
    }
    let mut target = online.clone();
    let mut opt = Adam::new(&online, cfg.learning_rate);
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let n_actions = env.n_actions();
    let n_features = env.n_features();
    let warmup = cfg.warmup.max(cfg.batch_size);
    let mut env_steps = 0usize;
    let mut best: Option<(f64, QNetwork)> = None;

    for episode in 0..cfg.episodes {
        let mut s = env.reset(&mut rng)?;
        let mut ret = 0.0;
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);
        for _ in 0..cfg.steps_per_episode {
            let a = if rng.gen::<f64>() < cfg.epsilon(env_steps) {
                rng.gen_range(0..n_actions)
            } else {
                greedy(&online.forward(&s)?)?
            };
            let (s2, r, terminal) = env.step(a, &mut rng)?;
            env_steps += 1;
            ret += r;
            buffer.push(Transition {
                state: std::mem::replace(&mut s, s2.clone()),
                action: a,
                reward: r,
                next_state: s2,
                terminal,
            });

            for _ in 0..if buffer.len() >= warmup { cfg.updates_per_step } else { 0 } {
                let batch = buffer.sample(cfg.batch_size, &mut rng);
                let b = batch.len();
                let mut states = Array2::zeros((b, n_features));
                let mut next = Array2::zeros((b, n_features));
                for (i, t) in batch.iter().enumerate() {
                    states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.state[..]));
                    next.row_mut(i).assign(&ndarray::ArrayView1::from(&t.next_state[..]));
                }
                let q_next = target.forward_batch(next.view());
                let q_select = if cfg.double_dqn { Some(online.forward_batch(next.view())) } else { None };
                let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
                let mut targets = Vec::with_capacity(b);
                for (i, t) in batch.iter().enumerate() {
                    let best = match &q_select {
                        Some(q) => q_next[[i, greedy(&q.row(i).to_vec())?]],
                        None => q_next.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    };
                    targets.push(t.reward + if t.terminal { 0.0 } else { gamma * best });
                }
                let (loss, grads) = online.td_loss_and_grad(states.view(), &actions, &targets);
                if !loss.is_finite() {
                    return Err(Error::Diverged {
                        episode,
                        reason: format!("TD loss became {loss} after {} gradient steps", log.gradient_steps),
                    });
                }
                opt.step(&mut online, &grads);
                log.gradient_steps += 1;
                loss_sum += loss;
                loss_n += 1;
                if log.gradient_steps % cfg.target_sync == 0 {
                    target = online.clone();
                }
            }
            if terminal {
                break;
            }
        }
        if !online.is_finite() {
            return Err(Error::Diverged { episode, reason: "non-finite network weights".into() });
        }
        log.episode_returns.push(ret);
        log.episode_losses.push(if loss_n > 0 { loss_sum / loss_n as f64 } else { f64::NAN });
        log::debug!("episode {episode}: return {ret:.4}, loss {:.6}", log.episode_losses[episode]);

        if cfg.eval_interval > 0 && (episode + 1) % cfg.eval_interval == 0 && env_steps >= warmup {
            let score = validate(env, &online, cfg, seed)?;
            log::debug!("episode {episode}: validation return {score:.4}");
            log.validation.push((episode, score));
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, online.clone()));
                log.selected_episode = Some(episode);
            }
        }
    }
    Ok((best.map_or(online, |(_, net)| net), log))
}

/// Mean greedy return over a fixed set of episodes. The episodes depend only
/// on `seed`, so every validation run of one training sees the same ones.
fn validate<E: Environment>(env: &mut E, net: &QNetwork, cfg: &TrainConfig, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e_ed0f_7a11);
    let mut total = 0.0;
    for _ in 0..cfg.eval_episodes {
        let mut s = env.reset(&mut rng)?;
        for _ in 0..cfg.steps_per_episode {
            let (s2, r, terminal) = env.step(greedy(&net.forward(&s)?)?, &mut rng)?;
            total += r;
            s = s2;
            if terminal {
                break;
            }
        }
    }
    Ok(total / cfg.eval_episodes.max(1) as f64)
}

//! Deep Q-learning for both chambers: value network, replay buffer, training
//! environments over the abundant-substrate model, rewards and the training
//! loop.

mod env;
mod network;
mod replay;
mod reward;
mod train;

pub use env::{randomize_episode, EnvKind, Environment, MixingEnv, ReferenceSets, ReservoirEnv};
pub use network::{Adam, Dense, Gradients, QNetwork, HIDDEN, MIXING_DIMS, RESERVOIR_DIMS};
pub use replay::{ReplayBuffer, Transition};
pub use reward::{mixing_reward, reservoir_reward};
pub use train::{train_dqn, train_on, TrainConfig, TrainLog};

//! Centralized training: replay memory, exploration noise, critic
//! regression, actor ascent through the critic and soft target updates.

mod buffer;
mod config;
mod noise;
mod trainer;
mod update;

pub use buffer::{ReplayBuffer, Transition};
pub use config::TrainConfig;
pub use noise::{inject_exploration, perturb_raw};
pub use trainer::{moving_average, streams, train, write_metrics, EpisodeMetrics, Learner};
pub use update::{actor_update, critic_update, soft_update, soft_update_critic};

use std::io::Write;

use serde::Serialize;

use super::buffer::{ReplayBuffer, Transition};
use super::config::TrainConfig;
use super::noise::inject_exploration;
use super::update::{actor_update, critic_update, soft_update, soft_update_critic};
use crate::agents::{ActionLayout, ActorArch, ActorSystem, Critic};
use crate::env::{build_observations, env_step, sample_population, state_width, EnvState, SimConfig, StepMode};
use crate::error::{Error, Result};
use crate::numkit::{Optimizer, Rng};

/// RNG stream ids forked from the run seed.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const ENV: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const SAMPLE: u64 = 3;
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Per-slot sum energy averaged over the episode (J).
    #[serde(rename = "sum_energy_J")]
    pub sum_energy_j: f64,
    /// Undiscounted episode return.
    pub reward: f64,
    pub critic_loss: f64,
    pub actor_objective: f64,
    pub sigma2: f64,
    #[serde(skip)]
    pub clamped: usize,
}

/// Online and target networks, optimizers, replay memory and RNG streams.
#[derive(Clone, Debug)]
pub struct Learner<A: ActorSystem> {
    pub actor: A,
    pub actor_target: A,
    pub critic: Critic,
    pub critic_target: Critic,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
    cfg: TrainConfig,
    layout: ActionLayout,
    buffer: ReplayBuffer,
    env_rng: Rng,
    noise_rng: Rng,
    sample_rng: Rng,
    episode: usize,
    updates: usize,
}

impl<A: ActorSystem> Learner<A> {
    /// `init` must be the stream the actor was drawn from; the critic is
    /// drawn next from it.
    pub fn new(
        actor: A,
        arch: &ActorArch,
        sim: &SimConfig,
        cfg: TrainConfig,
        init: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let layout = actor.layout(sim.n_max);
        let critic = Critic::new(
            state_width(sim.n_max),
            layout.width(),
            &arch.critic_hidden,
            arch.critic_activation,
            init,
        )?;
        let root = Rng::new(cfg.seed);
        Ok(Self {
            actor_target: actor.clone(),
            actor,
            critic_target: critic.clone(),
            critic,
            actor_opt: Optimizer::new(cfg.optimizer, cfg.lr_actor),
            critic_opt: Optimizer::new(cfg.optimizer, cfg.lr_critic),
            buffer: ReplayBuffer::new(cfg.replay_capacity, layout)?,
            layout,
            env_rng: root.fork(streams::ENV),
            noise_rng: root.fork(streams::NOISE),
            sample_rng: root.fork(streams::SAMPLE),
            cfg,
            episode: 0,
            updates: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn layout(&self) -> ActionLayout {
        self.layout
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    pub fn updates_done(&self) -> usize {
        self.updates
    }

    /// Critic, actor and target updates on one sampled batch.
    fn update(&mut self, sim: &SimConfig) -> Result<(f64, f64)> {
        let batch = self.buffer.sample(self.cfg.batch_size, &mut self.sample_rng)?;
        let loss = critic_update(
            &mut self.critic,
            &self.critic_target,
            &self.actor_target,
            &mut self.critic_opt,
            &batch,
            self.cfg.discount,
            sim,
        )?;
        let objective = actor_update(&mut self.actor, &self.critic, &mut self.actor_opt, &batch, sim)?;
        soft_update_critic(&mut self.critic_target, &self.critic, self.cfg.kappa_critic)?;
        soft_update(&mut self.actor_target, &self.actor, self.cfg.kappa_actor)?;
        self.updates += 1;
        Ok((loss, objective))
    }

    /// Draws a population, rolls one block of slots with exploration and
    /// updates after every slot.
    pub fn run_episode(&mut self, sim: &SimConfig) -> Result<EpisodeMetrics> {
        self.episode += 1;
        let sigma2 = self.cfg.noise_at(self.episode);
        let mask = sample_population(sim, &mut self.env_rng);
        let mut env = EnvState::reset(sim, &mask, &mut self.env_rng)?;
        let mut state = build_observations(&env, sim).state_vector();
        let (mut energy, mut reward, mut loss, mut objective) = (0.0, 0.0, 0.0, 0.0);
        let mut clamped = 0;
        let mut updated = 0usize;
        for _ in 0..sim.slots {
            let clean = self.actor.act(&state, &mask, sim)?;
            let action = inject_exploration(&clean, sigma2, &mut self.noise_rng, &state, &mask, sim)?;
            let (next_env, out) =
                env_step(&env, &action.solution(), sim, &mut self.env_rng, StepMode::ClampOffload)?;
            let next_state = build_observations(&next_env, sim).state_vector();
            energy += out.total_energy();
            reward += out.reward;
            clamped += out.clamped;
            self.buffer.push(Transition {
                state: std::mem::take(&mut state),
                action: self.layout.encode(&action, sim)?,
                reward: out.reward * self.cfg.reward_scale,
                next_state: next_state.clone(),
                mask: mask.clone(),
            })?;
            if self.buffer.len() >= self.cfg.warmup {
                let (l, j) = self.update(sim)?;
                loss += l;
                objective += j;
                updated += 1;
            }
            env = next_env;
            state = next_state;
        }
        let per = |x: f64| if updated > 0 { x / updated as f64 } else { 0.0 };
        Ok(EpisodeMetrics {
            episode: self.episode,
            n: mask.iter().filter(|&&a| a).count(),
            sum_energy_j: energy / sim.slots as f64,
            reward,
            critic_loss: per(loss),
            actor_objective: per(objective),
            sigma2,
            clamped,
        })
    }
}

/// Runs the configured number of episodes. `on_episode` sees every row as
/// soon as it is produced.
pub fn train<A, F>(learner: &mut Learner<A>, sim: &SimConfig, mut on_episode: F) -> Result<Vec<EpisodeMetrics>>
where
    A: ActorSystem,
    F: FnMut(&EpisodeMetrics, &Learner<A>) -> Result<()>,
{
    let mut log = Vec::with_capacity(learner.cfg.episodes);
    while learner.episode < learner.cfg.episodes {
        let m = learner.run_episode(sim)?;
        on_episode(&m, learner)?;
        log.push(m);
    }
    Ok(log)
}

/// Writes the metrics log as CSV.
pub fn write_metrics<W: Write>(out: W, rows: &[EpisodeMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Training(format!("metrics serialization: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))
}

/// Moving average with a trailing window (shorter at the start).
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut acc = 0.0;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            acc += x;
            if i >= w {
                acc -= xs[i - w];
            }
            acc / (i + 1).min(w) as f64
        })
        .collect()
}

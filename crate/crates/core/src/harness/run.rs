use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::model::Model;
use crate::agents::{ActorSystem, Policy, Scheme};
use crate::config::ExperimentConfig;
use crate::env::{build_observations, env_step, sample_population, EnvState, SimConfig, StepMode};
use crate::error::{Error, Result};
use crate::numkit::Rng;
use crate::training::{moving_average, streams, train, write_metrics, EpisodeMetrics, Learner};

/// `<out>/<scheme>/seed-<seed>`.
pub fn run_dir(out: &Path, scheme: Scheme, seed: u64) -> PathBuf {
    out.join(scheme.tag()).join(format!("seed-{seed}"))
}

/// Result of one training run.
#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub model: Model,
    pub metrics: Vec<EpisodeMetrics>,
    pub seconds: f64,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn train_actor<A: ActorSystem>(
    actor: A,
    cfg: &ExperimentConfig,
    sim: &SimConfig,
    seed: u64,
    init: &mut Rng,
    log: &mut Vec<EpisodeMetrics>,
    on_episode: &mut dyn FnMut(&EpisodeMetrics),
) -> Result<A> {
    let train_cfg = crate::training::TrainConfig { seed, ..cfg.train.clone() };
    let mut learner = Learner::new(actor, &cfg.arch, sim, train_cfg, init)?;
    // `train` only hands rows out on success, so collect them here too.
    let rows = train(&mut learner, sim, |m, _| {
        log.push(m.clone());
        on_episode(m);
        Ok(())
    });
    rows.map(|_| learner.actor)
}

/// Trains `cfg.scheme` with `seed` and writes the run directory under `out`.
/// On failure the directory keeps whatever was produced plus a `PARTIAL`
/// file holding the error.
pub fn run_training(
    cfg: &ExperimentConfig,
    seed: u64,
    out: &Path,
    mut on_episode: impl FnMut(&EpisodeMetrics),
) -> Result<TrainedRun> {
    let sim = cfg.validate()?;
    if !cfg.scheme.is_trainable() {
        return Err(Error::Config(format!("scheme {} has nothing to train", cfg.scheme)));
    }
    let dir = run_dir(out, cfg.scheme, seed);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let partial = dir.join("PARTIAL");
    write(&partial, "run in progress\n")?;
    let echo = ExperimentConfig { seeds: vec![seed], ..cfg.clone() };
    write(&dir.join("config.toml"), &format!("# seed = {seed}\n{}", echo.to_toml()))?;

    let started = Instant::now();
    let mut log = Vec::with_capacity(cfg.train.episodes);
    let mut init = Rng::new(seed).fork(streams::INIT);
    let trained = Model::init(cfg.scheme, &cfg.arch, &sim, &mut init).and_then(|m| {
        let cb = &mut on_episode;
        match m {
            Model::Cooperative(a) => train_actor(a, cfg, &sim, seed, &mut init, &mut log, cb).map(Model::Cooperative),
            Model::Vanilla(a) => train_actor(a, cfg, &sim, seed, &mut init, &mut log, cb).map(Model::Vanilla),
            Model::Super(a) => train_actor(a, cfg, &sim, seed, &mut init, &mut log, cb).map(Model::Super),
            Model::Naive => unreachable!(),
        }
    });
    let seconds = started.elapsed().as_secs_f64();

    let artifacts = (|| -> Result<()> {
        let path = dir.join("metrics.csv");
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_metrics(file, &log)?;
        let energy: Vec<f64> = log.iter().map(|m| m.sum_energy_j).collect();
        let mut ma = String::from("episode,moving_average_J\n");
        for (i, v) in moving_average(&energy, cfg.eval.window).iter().enumerate() {
            ma.push_str(&format!("{},{v}\n", i + 1));
        }
        write(&dir.join("moving_average.csv"), &ma)
    })();

    match trained {
        Ok(model) => {
            artifacts?;
            if let Some(ck) = model.checkpoint(&cfg.arch) {
                ck.save(&dir.join("checkpoint"))?;
            }
            fs::remove_file(&partial).map_err(|e| Error::io(&partial, e))?;
            Ok(TrainedRun { model, metrics: log, seconds })
        }
        Err(e) => {
            write(&partial, &format!("{e}\n"))?;
            Err(e)
        }
    }
}

/// Greedy evaluation summary. Energies are per-slot sums averaged over each
/// episode, then over episodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalSummary {
    pub episodes: usize,
    #[serde(rename = "mean_energy_J")]
    pub mean_energy_j: f64,
    #[serde(rename = "std_energy_J")]
    pub std_energy_j: f64,
    /// Wall-clock per joint decision, measured around the policy call only.
    pub ms_per_decision: f64,
    /// Offload ratios the environment had to cut back to the feasible bound.
    pub clamped: usize,
}

/// Copy of `sim` whose every episode has exactly `n` devices.
pub fn fixed_population(sim: &SimConfig, n: usize) -> SimConfig {
    SimConfig { n_min: n, n_max: n, ..sim.clone() }
}

/// Noise-free rollouts of `model`. Episodes depend only on `seed`, so two
/// policies evaluated with the same seed see the same populations, tasks and
/// device trajectories.
pub fn run_eval<P: Policy + ?Sized>(model: &P, sim: &SimConfig, episodes: usize, seed: u64) -> Result<EvalSummary> {
    let mut rng = Rng::new(seed);
    let mut energies = Vec::with_capacity(episodes);
    let mut clamped = 0;
    let mut decisions = 0usize;
    let mut busy = 0.0;
    for _ in 0..episodes {
        let mask = sample_population(sim, &mut rng);
        let mut env = EnvState::reset(sim, &mask, &mut rng)?;
        let mut energy = 0.0;
        for _ in 0..sim.slots {
            let state = build_observations(&env, sim).state_vector();
            let t = Instant::now();
            let action = model.act(&state, &mask, sim)?;
            busy += t.elapsed().as_secs_f64();
            decisions += 1;
            let (next, outcome) = env_step(&env, &action.solution(), sim, &mut rng, StepMode::ClampOffload)?;
            energy += outcome.total_energy();
            clamped += outcome.clamped;
            env = next;
        }
        energies.push(energy / sim.slots as f64);
    }
    let n = energies.len().max(1) as f64;
    let mean = energies.iter().sum::<f64>() / n;
    let var = energies.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    Ok(EvalSummary {
        episodes,
        mean_energy_j: mean,
        std_energy_j: var.sqrt(),
        ms_per_decision: 1e3 * busy / decisions.max(1) as f64,
        clamped,
    })
}

/// [`run_eval`] with the config's episode count and evaluation seed stream.
pub fn eval_at<P: Policy + ?Sized>(model: &P, cfg: &ExperimentConfig, sim: &SimConfig, seed: u64) -> Result<EvalSummary> {
    run_eval(model, sim, cfg.eval.episodes, seed.wrapping_add(cfg.eval.seed_offset))
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cmaddpg::agents::Scheme;
use cmaddpg::config::ExperimentConfig;
use cmaddpg::env::SimParams;
use cmaddpg::harness::{eval_at, run_dir, run_training, sweep, EvalSummary, Model};
use cmaddpg::{gradcheck, oracle};

/// UAV-aided mobile edge computing with cooperative multi-agent DDPG.
///
/// Without --config the desk-scale profile is used. Any config key can be
/// overridden through MEC_<SECTION>__<KEY> environment variables, for
/// example MEC_TRAIN__EPISODES=50 or MEC_SIM__F_MAX_HZ=2e9.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Train one model per seed and write run directories.
    Train(Common),
    /// Greedy evaluation of trained checkpoints (naive needs none).
    Eval(Common),
    /// Evaluate over the configured sweep, training missing checkpoints first.
    Sweep(Common),
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Cross-check the simulator against the scalar reference implementation.
    OracleVerify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// cmaddpg, gs, vanilla, saddpg or naive.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    episodes: Option<usize>,
    /// Device count `N` or range `LO..HI` (inclusive).
    #[arg(long = "n-ids", value_parser = parse_range)]
    n_ids: Option<(usize, usize)>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    if lo == 0 || lo > hi {
        return Err(format!("need 1 <= LO <= HI, got {s}"));
    }
    Ok((lo, hi))
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::from_toml_with(&ExperimentConfig::desk().to_toml(), std::env::vars())?,
    })
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = load_config(self.config.as_deref())?;
        if let Some(s) = self.scheme {
            cfg.scheme = s;
        }
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(e) = self.episodes {
            cfg.train.episodes = e;
        }
        if let Some((lo, hi)) = self.n_ids {
            cfg.sim = SimParams { n_min: lo, n_max: hi, ..cfg.sim };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn train_all(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    for &seed in &cfg.seeds {
        let every = (cfg.train.episodes / 20).max(1);
        let run = run_training(cfg, seed, out, |m| {
            if m.episode % every == 0 {
                eprintln!(
                    "[{} seed {seed}] episode {} energy {:.4} J critic loss {:.4} σ² {:.4}",
                    cfg.scheme, m.episode, m.sum_energy_j, m.critic_loss, m.sigma2
                );
            }
        })
        .with_context(|| format!("training {} seed {seed}", cfg.scheme))?;
        println!(
            "{} seed {seed}: {} episodes in {:.1} s -> {}",
            cfg.scheme,
            run.metrics.len(),
            run.seconds,
            run_dir(out, cfg.scheme, seed).display()
        );
    }
    Ok(())
}

fn load_model(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<Model> {
    let base = run_dir(out, cfg.scheme, seed).join("checkpoint");
    Model::load(&base, cfg.scheme, &cfg.arch).with_context(|| format!("loading {}", base.display()))
}

fn eval_all(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let sim = cfg.validate()?;
    let dir = out.join(cfg.scheme.tag());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("eval.csv");
    let mut w = csv_writer(&path)?;
    for &seed in &cfg.seeds {
        let model = load_model(cfg, out, seed)?;
        let s: EvalSummary = eval_at(&model, cfg, &sim, seed)?;
        println!(
            "{} seed {seed}: N {}..{} energy {:.4} ± {:.4} J, {:.3} ms/decision, {} clamped",
            cfg.scheme, sim.n_min, sim.n_max, s.mean_energy_j, s.std_energy_j, s.ms_per_decision, s.clamped
        );
        w.write_record([
            seed.to_string(),
            sim.n_min.to_string(),
            sim.n_max.to_string(),
            s.episodes.to_string(),
            s.mean_energy_j.to_string(),
            s.std_energy_j.to_string(),
            s.ms_per_decision.to_string(),
            s.clamped.to_string(),
        ])?;
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["seed", "n_min", "n_max", "episodes", "mean_energy_J", "std_energy_J", "ms_per_decision", "clamped"])?;
    Ok(w)
}

fn sweep_all(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let mut models = Vec::new();
    for &seed in &cfg.seeds {
        let model = if cfg.scheme == Scheme::Naive {
            Model::Naive
        } else if run_dir(out, cfg.scheme, seed).join("checkpoint.manifest.json").exists() {
            load_model(cfg, out, seed)?
        } else {
            run_training(cfg, seed, out, |_| {})?.model
        };
        models.push((seed, model));
    }
    let dir = out.join(cfg.scheme.tag());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let partial = dir.join("sweep.PARTIAL");
    fs::write(&partial, "sweep in progress\n")?;
    let table = match sweep(cfg, &models) {
        Ok(t) => t,
        Err(e) => {
            fs::write(&partial, format!("{e}\n"))?;
            bail!(e);
        }
    };
    let csv_path = dir.join("sweep.csv");
    table.write_csv(fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?)?;
    let series_path = dir.join("series.dat");
    table.write_series(cfg.scheme, fs::File::create(&series_path).with_context(|| format!("creating {}", series_path.display()))?)?;
    fs::remove_file(&partial)?;
    for (v, e) in table.series(cfg.scheme) {
        println!("{v}\t{e:.4}");
    }
    println!("wrote {} and {}", csv_path.display(), series_path.display());
    Ok(())
}

fn run_gradcheck(seed: u64) -> Result<()> {
    let mut failed = 0;
    let mut report = |label: &str, err: f64, tol: f64| {
        let ok = err < tol;
        failed += usize::from(!ok);
        println!("{} {label}: {err:.3e} (< {tol:e})", if ok { "ok  " } else { "FAIL" });
    };
    for c in gradcheck::check_random_nets(20, seed)? {
        report(&c.label, c.rel_error, 1e-4);
    }
    for c in gradcheck::check_end_to_end(3, seed)? {
        report(&c.label, c.rel_error, 1e-3);
    }
    if failed > 0 {
        bail!("{failed} gradient checks failed");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().verb {
        Verb::Train(c) => {
            let cfg = c.resolve()?;
            if !cfg.scheme.is_trainable() {
                bail!("scheme {} is training-free", cfg.scheme);
            }
            train_all(&cfg, &c.out)
        }
        Verb::Eval(c) => eval_all(&c.resolve()?, &c.out),
        Verb::Sweep(c) => sweep_all(&c.resolve()?, &c.out),
        Verb::Gradcheck { seed } => run_gradcheck(seed),
        Verb::OracleVerify { config, seed, steps } => {
            let cfg = load_config(config.as_deref())?;
            let r = oracle::verify(&cfg.sim, steps, seed)?;
            println!("{} steps, max relative deviation {:.3e} ({})", r.steps, r.max_rel_dev, r.worst);
            if r.max_rel_dev >= 1e-12 {
                bail!("simulator deviates from the reference implementation");
            }
            Ok(())
        }
    }
}

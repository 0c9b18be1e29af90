use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use super::model::Model;
use super::run::{eval_at, fixed_population};
use crate::agents::{Policy, Scheme};
use crate::config::{ExperimentConfig, SweepSpec};
use crate::env::{build_observations, env_step, EnvState, SimConfig, StepMode};
use crate::error::{contract, Error, Result};
use crate::numkit::Rng;

/// One (sweep value, seed) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub scheme: String,
    pub variable: String,
    pub value: f64,
    pub seed: u64,
    #[serde(rename = "mean_energy_J")]
    pub mean_energy_j: f64,
    #[serde(rename = "std_energy_J")]
    pub std_energy_j: f64,
    pub ms_per_decision: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    /// Tidy CSV, one row per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Contract(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| Error::io("<metrics table>", e))
    }

    /// Seed-averaged `(value, mean energy)` pairs for one scheme, in order of
    /// first appearance.
    pub fn series(&self, scheme: Scheme) -> Vec<(f64, f64)> {
        let mut acc: Vec<(f64, f64, usize)> = Vec::new();
        for r in self.rows.iter().filter(|r| r.scheme == scheme.tag()) {
            match acc.iter_mut().find(|(v, _, _)| *v == r.value) {
                Some(a) => {
                    a.1 += r.mean_energy_j;
                    a.2 += 1;
                }
                None => acc.push((r.value, r.mean_energy_j, 1)),
            }
        }
        acc.into_iter().map(|(v, s, k)| (v, s / k as f64)).collect()
    }

    /// Whitespace-separated two-column series for plotting tools.
    pub fn write_series<W: Write>(&self, scheme: Scheme, mut out: W) -> Result<()> {
        let io = |e| Error::io("<series>", e);
        writeln!(out, "# {} {}", self.rows.first().map_or("value", |r| r.variable.as_str()), "mean_energy_J").map_err(io)?;
        for (v, e) in self.series(scheme) {
            writeln!(out, "{v} {e}").map_err(io)?;
        }
        Ok(())
    }
}

/// Energy of one slot in a population-schedule trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotEnergy {
    pub slot: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "energy_J")]
    pub energy_j: f64,
}

/// Single-episode trace whose population is `counts[k]` during slots
/// `[k·every, (k+1)·every)`. Slots `0..count` are the active ones, so
/// devices that stay keep their state. New tasks start every block.
pub fn schedule_trace<P: Policy + ?Sized>(
    model: &P,
    sim: &SimConfig,
    counts: &[usize],
    every: usize,
    seed: u64,
) -> Result<Vec<SlotEnergy>> {
    contract!(!counts.is_empty() && every >= 1, "schedule needs counts and a positive period");
    contract!(counts.iter().all(|&c| c >= 1), "schedule counts must be ≥ 1");
    let n_max = *counts.iter().max().unwrap();
    let sim = SimConfig { n_min: 1, n_max, ..sim.clone() };
    let mask_of = |k: usize| (0..n_max).map(|j| j < k).collect::<Vec<bool>>();
    let mut rng = Rng::new(seed);
    let mut env = EnvState::reset(&sim, &mask_of(counts[0]), &mut rng)?;
    let mut trace = Vec::with_capacity(counts.len() * every);
    for slot in 0..counts.len() * every {
        if slot > 0 && slot % every == 0 {
            env.set_population(&mask_of(counts[slot / every]), &sim, &mut rng)?;
        }
        if env.slot == sim.slots {
            env.start_block(&sim, &mut rng);
        }
        let mask = env.active.clone();
        let state = build_observations(&env, &sim).state_vector();
        let action = model.act(&state, &mask, &sim)?;
        let (next, out) = env_step(&env, &action.solution(), &sim, &mut rng, StepMode::ClampOffload)?;
        trace.push(SlotEnergy {
            slot: slot + 1,
            n: env.n_active(),
            energy_j: out.total_energy(),
        });
        env = next;
    }
    Ok(trace)
}

/// Evaluates trained models (one per seed) over `cfg.sweep`.
pub fn sweep(cfg: &ExperimentConfig, models: &[(u64, Model)]) -> Result<MetricsTable> {
    let sim = cfg.validate()?;
    let mut table = MetricsTable::default();
    for (seed, model) in models {
        let scheme = model.scheme().tag().to_string();
        let mut push = |variable: &str, value: f64, mean: f64, std: f64, ms: f64| {
            table.rows.push(MetricsRow {
                scheme: scheme.clone(),
                variable: variable.to_string(),
                value,
                seed: *seed,
                mean_energy_j: mean,
                std_energy_j: std,
                ms_per_decision: ms,
            })
        };
        match &cfg.sweep {
            SweepSpec::N { values } => {
                for &n in values {
                    let s = eval_at(model, cfg, &fixed_population(&sim, n), *seed)?;
                    push("N", n as f64, s.mean_energy_j, s.std_energy_j, s.ms_per_decision);
                }
            }
            SweepSpec::FMax { values } => {
                for &f in values {
                    let s = eval_at(model, cfg, &SimConfig { f_max: f, ..sim.clone() }, *seed)?;
                    push("f_max", f, s.mean_energy_j, s.std_energy_j, s.ms_per_decision);
                }
            }
            SweepSpec::Schedule { counts, every } => {
                let t = Instant::now();
                let trace = schedule_trace(model, &sim, counts, *every, seed.wrapping_add(cfg.eval.seed_offset))?;
                let ms = 1e3 * t.elapsed().as_secs_f64() / trace.len() as f64;
                for s in trace {
                    push("slot", s.slot as f64, s.energy_j, 0.0, ms);
                }
            }
        }
    }
    Ok(table)
}

//! Experiment configuration: one TOML file with `[sim]`, `[arch]`,
//! `[train]`, `[eval]` and `[sweep]` tables plus top-level `scheme` and
//! `seeds`.
//!
//! Environment variables named `MEC_<SECTION>__<KEY>` override single keys
//! after the file is read, e.g. `MEC_TRAIN__EPISODES=50` or
//! `MEC_SIM__N_MAX=8`. Top-level keys use `MEC_<KEY>` (`MEC_SCHEME=naive`).
//! Values are parsed as TOML literals and fall back to plain strings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{ActorArch, Scheme};
use crate::env::{SimConfig, SimParams};
use crate::error::{contract, Error, Result};
use crate::numkit::OptimizerKind;
use crate::training::TrainConfig;

pub const ENV_PREFIX: &str = "MEC_";

/// Greedy evaluation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
    /// Moving-average window for training curves.
    pub window: usize,
    /// Seed offset separating evaluation episodes from training ones.
    pub seed_offset: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            window: 100,
            seed_offset: 1_000_000,
        }
    }
}

/// What a sweep varies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variable", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    /// Device count per evaluation episode.
    N { values: Vec<usize> },
    /// Server CPU budget (Hz).
    FMax { values: Vec<f64> },
    /// Single-episode trace whose population changes every `every` slots.
    Schedule { counts: Vec<usize>, every: usize },
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec::N {
            values: vec![5, 10],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub seeds: Vec<u64>,
    pub sim: SimParams,
    pub arch: ActorArch,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub sweep: SweepSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl ExperimentConfig {
    /// The reference scenario at full size. Not trainable to convergence on
    /// a desktop.
    pub fn reference() -> Self {
        Self {
            scheme: Scheme::CMaddpg,
            seeds: vec![1],
            sim: SimParams::default(),
            arch: ActorArch::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            sweep: SweepSpec::default(),
        }
    }

    /// Desk-scale profile: up to 5 devices, 1–10 Mbit tasks, 3000 episodes,
    /// small networks.
    pub fn desk() -> Self {
        Self {
            scheme: Scheme::CMaddpg,
            seeds: vec![1, 2, 3],
            sim: SimParams {
                n_min: 3,
                n_max: 5,
                task_bits_min: 1e6,
                task_bits_max: 10e6,
                ..SimParams::default()
            },
            arch: ActorArch {
                message_len: 8,
                feature_len: 16,
                message_hidden: vec![32],
                uav_feature_hidden: vec![32],
                id_feature_hidden: vec![32],
                attention_hidden: None,
                trajectory_hidden: vec![32, 32],
                cpu_hidden: vec![32, 32],
                offload_hidden: vec![32, 32],
                critic_hidden: vec![128, 64],
                super_hidden: vec![128, 64],
                critic_messages: false,
                ..ActorArch::default()
            },
            train: TrainConfig {
                episodes: 3000,
                batch_size: 32,
                lr_actor: 1e-3,
                lr_critic: 1e-3,
                noise_var: 0.45,
                noise_decay: 0.9985,
                replay_capacity: 100_000,
                optimizer: OptimizerKind::Adam,
                ..TrainConfig::default()
            },
            eval: EvalConfig::default(),
            sweep: SweepSpec::N {
                values: vec![6, 8, 10],
            },
        }
    }

    pub fn validate(&self) -> Result<SimConfig> {
        contract!(!self.seeds.is_empty(), "at least one seed is required");
        self.arch.validate()?;
        self.train.validate()?;
        contract!(self.eval.episodes > 0, "evaluation needs at least one episode");
        match &self.sweep {
            SweepSpec::N { values } => {
                contract!(!values.is_empty() && values.iter().all(|&n| n >= 1), "N sweep values must be ≥ 1");
            }
            SweepSpec::FMax { values } => {
                contract!(
                    !values.is_empty() && values.iter().all(|&f| f > 0.0),
                    "f_max sweep values must be positive"
                );
            }
            SweepSpec::Schedule { counts, every } => {
                contract!(
                    !counts.is_empty() && counts.iter().all(|&n| n >= 1) && *every >= 1,
                    "schedule needs positive counts and period"
                );
            }
        }
        self.sim.resolve()
    }

    /// Parses TOML text and applies `MEC_` overrides from `vars`.
    pub fn from_toml_with<I>(text: &str, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut value: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        apply_overrides(&mut value, vars)?;
        let cfg: Self = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with(&text, std::env::vars())
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `MEC_SECTION__KEY=value` pairs to a parsed TOML table.
pub fn apply_overrides<I>(table: &mut toml::Table, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut pairs: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    pairs.sort();
    for (k, v) in pairs {
        let path = k[ENV_PREFIX.len()..].to_ascii_lowercase();
        let parts: Vec<&str> = path.split("__").collect();
        let value = parse_literal(&v);
        match parts.as_slice() {
            [key] => {
                table.insert(key.to_string(), value);
            }
            [section, key] => {
                let entry = table
                    .entry(section.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                let t = entry
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("`{section}` is not a table ({k})")))?;
                t.insert(key.to_string(), value);
            }
            _ => return Err(Error::Config(format!("cannot map environment variable {k}"))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn none() -> Vec<(String, String)> {
        Vec::new()
    }

    #[test]
    fn profiles_round_trip_through_toml() {
        for cfg in [ExperimentConfig::reference(), ExperimentConfig::desk()] {
            let text = cfg.to_toml();
            assert_eq!(ExperimentConfig::from_toml_with(&text, none()).unwrap(), cfg);
        }
    }

    #[test]
    fn shipped_files_match_profiles() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let desk = std::fs::read_to_string(root.join("desk.toml")).unwrap();
        let reference = std::fs::read_to_string(root.join("reference.toml")).unwrap();
        assert_eq!(ExperimentConfig::from_toml_with(&desk, none()).unwrap(), ExperimentConfig::desk());
        assert_eq!(ExperimentConfig::from_toml_with(&reference, none()).unwrap(), ExperimentConfig::reference());
    }

    #[test]
    fn environment_overrides() {
        let vars = vec![
            ("MEC_TRAIN__EPISODES".to_string(), "7".to_string()),
            ("MEC_SIM__N_MAX".to_string(), "8".to_string()),
            ("MEC_SCHEME".to_string(), "naive".to_string()),
            ("MEC_SEEDS".to_string(), "[4, 5]".to_string()),
            ("HOME".to_string(), "/x".to_string()),
        ];
        let cfg = ExperimentConfig::from_toml_with("", vars).unwrap();
        assert_eq!(cfg.train.episodes, 7);
        assert_eq!(cfg.sim.n_max, 8);
        assert_eq!(cfg.scheme, Scheme::Naive);
        assert_eq!(cfg.seeds, vec![4, 5]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_toml_with("[train]\nepisodez = 3", none()).is_err());
        assert!(ExperimentConfig::from_toml_with("seeds = []", none()).is_err());
        assert!(ExperimentConfig::from_toml_with("[sweep]\nvariable = \"n\"\nvalues = [0]", none()).is_err());
    }
}

use std::f64::consts::TAU;

use super::config::SimConfig;
use super::Vec3;
use crate::error::{contract, Result};
use crate::numkit::Rng;

/// Ground device state. `prev_*` fields hold what the previous slot left behind.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IdState {
    pub position: Vec3,
    pub speed: f64,
    pub heading: f64,
    pub mean_speed: f64,
    pub mean_heading: f64,
    /// Task size of the current block (bits).
    pub task_bits: f64,
    pub prev_local_bits: f64,
    pub prev_offload_bits: f64,
    pub prev_uplink_rate: f64,
}

/// Global simulator truth: UAV, every device slot and the active mask.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub uav: Vec3,
    pub devices: Vec<IdState>,
    pub active: Vec<bool>,
    /// Slots completed in the current block.
    pub slot: usize,
}

/// Draws a population size uniformly in `[n_min, n_max]` and a random active
/// subset of the `n_max` slots.
pub fn sample_population(cfg: &SimConfig, rng: &mut Rng) -> Vec<bool> {
    let n = rng.int_inclusive(cfg.n_min, cfg.n_max);
    mask_from_indices(cfg.n_max, &rng.subset(cfg.n_max, n))
}

pub(crate) fn mask_from_indices(n_max: usize, idx: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; n_max];
    for &i in idx {
        mask[i] = true;
    }
    mask
}

impl EnvState {
    /// Fresh block with UAV and devices uniformly placed.
    ///
    /// Draw order: UAV x, y, altitude; then per active slot in index order
    /// x, y, mean speed, mean heading, task size.
    pub fn reset(cfg: &SimConfig, active: &[bool], rng: &mut Rng) -> Result<Self> {
        contract!(
            active.len() == cfg.n_max,
            "active mask has {} slots, expected {}",
            active.len(),
            cfg.n_max
        );
        let n = active.iter().filter(|&&a| a).count();
        contract!(n >= 1, "at least one device must be active");
        let uav = [
            rng.uniform(0.0, cfg.area_side),
            rng.uniform(0.0, cfg.area_side),
            rng.uniform(cfg.altitude_min, cfg.altitude_max),
        ];
        let devices = active
            .iter()
            .map(|&a| if a { spawn_device(cfg, rng) } else { IdState::default() })
            .collect();
        Ok(Self {
            uav,
            devices,
            active: active.to_vec(),
            slot: 0,
        })
    }

    pub fn n_max(&self) -> usize {
        self.devices.len()
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&j| self.active[j]).collect()
    }

    /// Starts a new block: new task sizes for every active device and the
    /// previous-slot fields reset to their initial values.
    pub fn start_block(&mut self, cfg: &SimConfig, rng: &mut Rng) {
        for (d, &a) in self.devices.iter_mut().zip(&self.active) {
            if a {
                d.task_bits = rng.uniform(cfg.task_min, cfg.task_max);
                reset_history(d, cfg);
            }
        }
        self.slot = 0;
    }

    /// Changes the active set. Devices that stay active keep their state,
    /// newly active slots get freshly spawned devices, dropped slots are zeroed.
    pub fn set_population(&mut self, active: &[bool], cfg: &SimConfig, rng: &mut Rng) -> Result<()> {
        contract!(
            active.len() == self.devices.len(),
            "active mask has {} slots, expected {}",
            active.len(),
            self.devices.len()
        );
        contract!(active.iter().any(|&a| a), "at least one device must be active");
        for j in 0..active.len() {
            match (self.active[j], active[j]) {
                (false, true) => self.devices[j] = spawn_device(cfg, rng),
                (true, false) => self.devices[j] = IdState::default(),
                _ => {}
            }
        }
        self.active = active.to_vec();
        Ok(())
    }
}

fn reset_history(d: &mut IdState, cfg: &SimConfig) {
    let t = cfg.slots as f64;
    let lam = cfg.initial_offload_ratio;
    d.prev_local_bits = (1.0 - lam) * d.task_bits / t;
    d.prev_offload_bits = lam * d.task_bits / t;
    d.prev_uplink_rate = cfg.initial_uplink_rate;
}

fn spawn_device(cfg: &SimConfig, rng: &mut Rng) -> IdState {
    let x = rng.uniform(0.0, cfg.area_side);
    let y = rng.uniform(0.0, cfg.area_side);
    let mean_speed = rng.uniform(cfg.mean_speed_min, cfg.mean_speed_max);
    let mean_heading = rng.uniform(0.0, TAU);
    let task_bits = rng.uniform(cfg.task_min, cfg.task_max);
    let mut d = IdState {
        position: [x, y, 0.0],
        speed: mean_speed,
        heading: mean_heading,
        mean_speed,
        mean_heading,
        task_bits,
        ..IdState::default()
    };
    reset_history(&mut d, cfg);
    d
}

use super::config::SimConfig;
use super::state::EnvState;
use super::Vec3;
use crate::error::{contract, Result};

/// Features observed by the UAV: its position before the current slot.
pub const UAV_OBS_WIDTH: usize = 3;
/// Features observed by a device: position, previous local and offloaded
/// bits, task size and previous uplink rate.
pub const ID_OBS_WIDTH: usize = 7;

/// Per-agent observations. Positions are divided by the area side, bit counts
/// by the largest task size and rates by the total bandwidth.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    pub uav: [f64; UAV_OBS_WIDTH],
    /// `None` for inactive slots.
    pub devices: Vec<Option<[f64; ID_OBS_WIDTH]>>,
}

impl Observations {
    pub fn mask(&self) -> Vec<bool> {
        self.devices.iter().map(Option::is_some).collect()
    }

    /// Splits a padded state back into per-agent observations.
    pub fn from_state(state: &[f64], mask: &[bool]) -> Result<Self> {
        let view = StateView::new(state)?;
        contract!(
            view.slots() == mask.len(),
            "state has {} slots, mask {}",
            view.slots(),
            mask.len()
        );
        let mut uav = [0.0; UAV_OBS_WIDTH];
        uav.copy_from_slice(view.uav_features());
        let devices = (0..mask.len())
            .map(|j| {
                mask[j].then(|| {
                    let mut o = [0.0; ID_OBS_WIDTH];
                    o.copy_from_slice(view.device_features(j));
                    o
                })
            })
            .collect();
        Ok(Self { uav, devices })
    }

    /// Padded global state: UAV features then every device slot, with
    /// inactive slots left at exactly zero.
    pub fn state_vector(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(UAV_OBS_WIDTH + ID_OBS_WIDTH * self.devices.len());
        s.extend_from_slice(&self.uav);
        for d in &self.devices {
            match d {
                Some(o) => s.extend_from_slice(o),
                None => s.extend_from_slice(&[0.0; ID_OBS_WIDTH]),
            }
        }
        s
    }
}

pub fn build_observations(env: &EnvState, cfg: &SimConfig) -> Observations {
    let a = cfg.area_side;
    let uav = [env.uav[0] / a, env.uav[1] / a, env.uav[2] / a];
    let devices = env
        .devices
        .iter()
        .zip(&env.active)
        .map(|(d, &on)| {
            on.then(|| {
                [
                    d.position[0] / a,
                    d.position[1] / a,
                    d.position[2] / a,
                    d.prev_local_bits / cfg.task_max,
                    d.prev_offload_bits / cfg.task_max,
                    d.task_bits / cfg.task_max,
                    d.prev_uplink_rate / cfg.bandwidth,
                ]
            })
        })
        .collect();
    Observations { uav, devices }
}

/// A device observation mapped back to physical units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviceView {
    pub position: Vec3,
    pub prev_local_bits: f64,
    pub prev_offload_bits: f64,
    pub task_bits: f64,
    pub prev_uplink_rate: f64,
}

impl DeviceView {
    pub fn from_features(o: &[f64], cfg: &SimConfig) -> Self {
        let a = cfg.area_side;
        Self {
            position: [o[0] * a, o[1] * a, o[2] * a],
            prev_local_bits: o[3] * cfg.task_max,
            prev_offload_bits: o[4] * cfg.task_max,
            task_bits: o[5] * cfg.task_max,
            prev_uplink_rate: o[6] * cfg.bandwidth,
        }
    }
}

/// Read-only view over a padded state vector.
#[derive(Clone, Copy, Debug)]
pub struct StateView<'a> {
    state: &'a [f64],
    slots: usize,
}

impl<'a> StateView<'a> {
    pub fn new(state: &'a [f64]) -> Result<Self> {
        contract!(
            state.len() >= UAV_OBS_WIDTH && (state.len() - UAV_OBS_WIDTH) % ID_OBS_WIDTH == 0,
            "state width {} is not 3 + 7k",
            state.len()
        );
        Ok(Self {
            state,
            slots: (state.len() - UAV_OBS_WIDTH) / ID_OBS_WIDTH,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn uav_features(&self) -> &'a [f64] {
        &self.state[..UAV_OBS_WIDTH]
    }

    pub fn device_features(&self, j: usize) -> &'a [f64] {
        let start = UAV_OBS_WIDTH + ID_OBS_WIDTH * j;
        &self.state[start..start + ID_OBS_WIDTH]
    }

    pub fn uav_position(&self, cfg: &SimConfig) -> Vec3 {
        let o = self.uav_features();
        [o[0] * cfg.area_side, o[1] * cfg.area_side, o[2] * cfg.area_side]
    }

    pub fn device(&self, j: usize, cfg: &SimConfig) -> DeviceView {
        DeviceView::from_features(self.device_features(j), cfg)
    }
}

//! Time-slotted UAV-assisted MEC environment.
//!
//! Slot order: the UAV moves first, links are evaluated at the new UAV
//! position, offloading executes, and devices move at the end of the slot.
//! Observations therefore always describe the state left by the previous slot.

pub mod channel;
mod config;
pub mod energy;
mod mobility;
mod observation;
mod state;
mod step;

pub use config::{db_to_linear, dbm_to_watts, SimConfig, SimParams};
pub use mobility::{clamp_to_area, step_id_mobility, step_uav, Trajectory};
pub use observation::{
    build_observations, DeviceView, Observations, StateView, ID_OBS_WIDTH, UAV_OBS_WIDTH,
};
pub use state::{sample_population, EnvState, IdState};
pub use step::{env_step, probe_links, Solution, StepMode, StepOutcome};

/// Cartesian position in metres.
pub type Vec3 = [f64; 3];

/// Width of the padded global state for `n_max` device slots.
pub fn state_width(n_max: usize) -> usize {
    UAV_OBS_WIDTH + ID_OBS_WIDTH * n_max
}

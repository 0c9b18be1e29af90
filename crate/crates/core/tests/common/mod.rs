#![allow(dead_code)]

use cmaddpg::agents::ActorArch;
use cmaddpg::env::{build_observations, EnvState, SimConfig, SimParams, ID_OBS_WIDTH, UAV_OBS_WIDTH};
use cmaddpg::numkit::Rng;

pub fn small_arch() -> ActorArch {
    ActorArch {
        message_len: 4,
        feature_len: 6,
        message_hidden: vec![8],
        uav_feature_hidden: vec![8],
        id_feature_hidden: vec![8],
        trajectory_hidden: vec![8],
        super_hidden: vec![8],
        cpu_hidden: vec![8],
        offload_hidden: vec![8],
        critic_hidden: vec![16, 8],
        ..ActorArch::default()
    }
}

pub fn sim(n_min: usize, n_max: usize) -> SimConfig {
    SimParams {
        n_min,
        n_max,
        task_bits_min: 1e6,
        task_bits_max: 1e7,
        ..SimParams::default()
    }
    .resolve()
    .unwrap()
}

/// Reset state with random history features.
pub fn random_env(cfg: &SimConfig, mask: &[bool], rng: &mut Rng) -> EnvState {
    let mut env = EnvState::reset(cfg, mask, rng).unwrap();
    for (d, _) in env.devices.iter_mut().zip(mask).filter(|(_, &a)| a) {
        d.prev_local_bits = rng.uniform(0.0, d.task_bits) / cfg.slots as f64;
        d.prev_offload_bits = rng.uniform(0.0, d.task_bits) / cfg.slots as f64;
        d.prev_uplink_rate = rng.uniform(0.0, cfg.bandwidth);
    }
    env
}

pub fn random_state(cfg: &SimConfig, mask: &[bool], rng: &mut Rng) -> Vec<f64> {
    build_observations(&random_env(cfg, mask, rng), cfg).state_vector()
}

/// Moves device slot `perm[j]` to slot `j`.
pub fn permute_state(state: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut out = state[..UAV_OBS_WIDTH].to_vec();
    for &p in perm {
        let at = UAV_OBS_WIDTH + p * ID_OBS_WIDTH;
        out.extend_from_slice(&state[at..at + ID_OBS_WIDTH]);
    }
    out
}

/// Largest absolute difference over paired slices.
pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

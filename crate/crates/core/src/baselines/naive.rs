use std::f64::consts::{PI, TAU};

use crate::agents::{ActionBundle, LambdaCpu, Policy, RawOutputs, SolutionHead, AZIMUTH_MAX};
use crate::env::{SimConfig, StateView};
use crate::error::{contract, Result};

/// Flies toward the device centroid at the mid altitude, splits the CPU
/// evenly and lets every device offload up to its bound.
#[derive(Clone, Copy, Debug, Default)]
pub struct NaivePolicy;

impl Policy for NaivePolicy {
    fn act(&self, state: &[f64], mask: &[bool], cfg: &SimConfig) -> Result<ActionBundle> {
        naive_policy(state, mask, cfg)
    }
}

pub fn naive_policy(state: &[f64], mask: &[bool], cfg: &SimConfig) -> Result<ActionBundle> {
    let view = StateView::new(state)?;
    let active: Vec<usize> = (0..mask.len()).filter(|&j| mask[j]).collect();
    contract!(!active.is_empty(), "naive policy needs an active device");
    let uav = view.uav_position(cfg);
    let n = active.len() as f64;
    let (mut cx, mut cy) = (0.0, 0.0);
    for &j in &active {
        let p = view.device(j, cfg).position;
        cx += p[0];
        cy += p[1];
    }
    let target = [cx / n, cy / n, 0.5 * (cfg.altitude_min + cfg.altitude_max)];
    let d = [target[0] - uav[0], target[1] - uav[1], target[2] - uav[2]];
    let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();

    let mut raw = RawOutputs::zeros(mask.len());
    raw.trajectory = if dist > 0.0 {
        let speed = cfg.v_max.min(dist / cfg.tau);
        let azimuth = d[1].atan2(d[0]).rem_euclid(TAU).min(AZIMUTH_MAX);
        let polar = (d[2] / dist).clamp(-1.0, 1.0).acos();
        [2.0 * speed / cfg.v_max - 1.0, azimuth / PI - 1.0, 2.0 * polar / PI - 1.0]
    } else {
        [-1.0, -1.0, -1.0]
    };
    for &j in &active {
        raw.cpu_weight[j] = 1.0;
        raw.offload_fraction[j] = 1.0;
    }
    SolutionHead::apply(&raw, state, mask, None, LambdaCpu::Own, cfg).map(|(b, _)| b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{env_step, Observations, StepMode, ID_OBS_WIDTH};
    use crate::numkit::Rng;

    fn state_with(uav: [f64; 3], devices: &[[f64; 3]], cfg: &SimConfig) -> Vec<f64> {
        let a = cfg.area_side;
        let mut s = vec![uav[0] / a, uav[1] / a, uav[2] / a];
        for p in devices {
            let mut o = [0.0; ID_OBS_WIDTH];
            o[0] = p[0] / a;
            o[1] = p[1] / a;
            o[5] = 0.5;
            s.extend_from_slice(&o);
        }
        s
    }

    #[test]
    fn hovers_at_centroid() {
        let cfg = SimConfig::default();
        let mid = 0.5 * (cfg.altitude_min + cfg.altitude_max);
        let s = state_with([50.0, 50.0, mid], &[[40.0, 50.0, 0.0], [60.0, 50.0, 0.0]], &cfg);
        let b = naive_policy(&s, &[true, true], &cfg).unwrap();
        assert_eq!(b.trajectory.speed, 0.0);
        assert_eq!(b.cpu_hz, vec![cfg.f_max / 2.0; 2]);
        assert_eq!(b.offload, b.lambda_max);
    }

    #[test]
    fn heads_to_midpoint() {
        let cfg = SimConfig::default();
        let mid = 0.5 * (cfg.altitude_min + cfg.altitude_max);
        let s = state_with([0.0, 0.0, mid], &[[100.0, 0.0, 0.0], [100.0, 200.0, 0.0]], &cfg);
        let b = naive_policy(&s, &[true, true], &cfg).unwrap();
        let t = b.trajectory;
        assert!((t.azimuth - (1.0f64).atan2(1.0)).abs() < 1e-12);
        assert!((t.polar - PI / 2.0).abs() < 1e-12);
        assert!((t.speed - cfg.v_max).abs() < 1e-9);
    }

    #[test]
    fn feasible_in_environment() {
        let cfg = SimConfig::default();
        let mut rng = Rng::new(5);
        for _ in 0..20 {
            let mask = crate::env::sample_population(&cfg, &mut rng);
            let env = crate::env::EnvState::reset(&cfg, &mask, &mut rng).unwrap();
            let obs = crate::env::build_observations(&env, &cfg);
            let b = NaivePolicy.act(&obs.state_vector(), &mask, &cfg).unwrap();
            env_step(&env, &b.solution(), &cfg, &mut rng, StepMode::Strict).unwrap();
            let _ = Observations::from_state(&obs.state_vector(), &mask).unwrap();
        }
    }
}

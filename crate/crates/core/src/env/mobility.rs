use std::f64::consts::{PI, TAU};

use super::config::SimConfig;
use super::state::IdState;
use super::Vec3;
use crate::error::{contract, Result};
use crate::numkit::Rng;

/// UAV motion for one slot: speed, azimuth η ∈ [0, 2π) and polar angle
/// β ∈ [0, π] measured from the vertical.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub speed: f64,
    pub azimuth: f64,
    pub polar: f64,
}

impl Trajectory {
    pub fn validate(&self, cfg: &SimConfig) -> Result<()> {
        contract!(
            (0.0..=cfg.v_max).contains(&self.speed),
            "UAV speed {} outside [0, {}]",
            self.speed,
            cfg.v_max
        );
        contract!(
            (0.0..TAU).contains(&self.azimuth),
            "azimuth {} outside [0, 2π)",
            self.azimuth
        );
        contract!(
            (0.0..=PI).contains(&self.polar),
            "polar angle {} outside [0, π]",
            self.polar
        );
        Ok(())
    }

    /// Unit direction `(sin β cos η, sin β sin η, cos β)`.
    pub fn direction(&self) -> Vec3 {
        let (sb, cb) = self.polar.sin_cos();
        let (se, ce) = self.azimuth.sin_cos();
        [sb * ce, sb * se, cb]
    }
}

/// Clamps a position to the service box.
pub fn clamp_to_area(mut p: Vec3, cfg: &SimConfig, z_range: (f64, f64)) -> Vec3 {
    p[0] = p[0].clamp(0.0, cfg.area_side);
    p[1] = p[1].clamp(0.0, cfg.area_side);
    p[2] = p[2].clamp(z_range.0, z_range.1);
    p
}

/// Moves the UAV by `τ·v·Δ` and clamps it into the area and altitude range.
pub fn step_uav(uav: Vec3, traj: &Trajectory, cfg: &SimConfig) -> Result<Vec3> {
    traj.validate(cfg)?;
    let d = traj.direction();
    let step = cfg.tau * traj.speed;
    let next = [uav[0] + step * d[0], uav[1] + step * d[1], uav[2] + step * d[2]];
    Ok(clamp_to_area(next, cfg, (cfg.altitude_min, cfg.altitude_max)))
}

/// One Gauss–Markov update of a device's speed and heading followed by the
/// position advance. Draws the speed innovation first, then the heading one.
pub fn step_id_mobility(id: &IdState, cfg: &SimConfig, rng: &mut Rng) -> IdState {
    let phi_v = cfg.sigma_v * rng.standard_normal();
    let phi_o = cfg.sigma_o * rng.standard_normal();
    let kv = cfg.kappa_v;
    let ko = cfg.kappa_o;
    let speed = (kv * id.speed + (1.0 - kv) * id.mean_speed + (1.0 - kv * kv).sqrt() * phi_v).max(0.0);
    let heading = ko * id.heading + (1.0 - ko) * id.mean_heading + (1.0 - ko * ko).sqrt() * phi_o;
    let step = cfg.tau * speed;
    let (s, c) = heading.sin_cos();
    let pos = [
        id.position[0] + step * c,
        id.position[1] + step * s,
        0.0,
    ];
    IdState {
        position: clamp_to_area(pos, cfg, (0.0, 0.0)),
        speed,
        heading,
        ..id.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::SimParams;

    fn device() -> IdState {
        IdState {
            position: [50.0, 50.0, 0.0],
            speed: 1.3,
            heading: 0.4,
            mean_speed: 0.7,
            mean_heading: 2.0,
            task_bits: 1e6,
            ..IdState::default()
        }
    }

    fn cfg_with(kv: f64, sv: f64) -> SimConfig {
        SimParams {
            kappa_v: kv,
            sigma_v: sv,
            ..SimParams::default()
        }
        .resolve()
        .unwrap()
    }

    #[test]
    fn full_memory_keeps_speed() {
        let next = step_id_mobility(&device(), &cfg_with(1.0, 0.0), &mut Rng::new(1));
        assert_eq!(next.speed, 1.3);
    }

    #[test]
    fn memoryless_speed_is_mean() {
        let next = step_id_mobility(&device(), &cfg_with(0.0, 0.0), &mut Rng::new(1));
        assert_eq!(next.speed, 0.7);
    }

    #[test]
    fn vertical_motion() {
        let cfg = SimConfig::default();
        let t = Trajectory {
            speed: 20.0,
            azimuth: 1.0,
            polar: 0.0,
        };
        let u = step_uav([10.0, 10.0, 5.0], &t, &cfg).unwrap();
        assert!((u[0] - 10.0).abs() < 1e-15 && (u[1] - 10.0).abs() < 1e-15);
        assert!((u[2] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_and_axis_aligned() {
        let cfg = SimConfig::default();
        let still = Trajectory {
            speed: 0.0,
            azimuth: 2.0,
            polar: 1.0,
        };
        assert_eq!(step_uav([1.0, 2.0, 3.0], &still, &cfg).unwrap(), [1.0, 2.0, 3.0]);
        let east = Trajectory {
            speed: 50.0,
            azimuth: 0.0,
            polar: PI / 2.0,
        };
        let u = step_uav([20.0, 30.0, 40.0], &east, &cfg).unwrap();
        assert!((u[0] - 30.0).abs() < 1e-12);
        assert!((u[1] - 30.0).abs() < 1e-12);
        assert!((u[2] - 40.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_trajectory_rejected() {
        let cfg = SimConfig::default();
        for t in [
            Trajectory { speed: 51.0, azimuth: 0.0, polar: 0.0 },
            Trajectory { speed: 1.0, azimuth: TAU, polar: 0.0 },
            Trajectory { speed: 1.0, azimuth: 0.0, polar: 3.5 },
            Trajectory { speed: -1.0, azimuth: 0.0, polar: 0.0 },
        ] {
            assert!(step_uav([0.0; 3], &t, &cfg).is_err());
        }
    }

    #[test]
    fn clamped_to_box() {
        let cfg = SimConfig::default();
        let t = Trajectory {
            speed: 50.0,
            azimuth: PI,
            polar: PI,
        };
        let u = step_uav([2.0, 50.0, 3.0], &t, &cfg).unwrap();
        assert!(u[0] >= 0.0 && u[2] >= cfg.altitude_min);
    }
}

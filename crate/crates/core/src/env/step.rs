use super::channel::{link, Link};
use super::config::SimConfig;
use super::energy::{lambda_max, local_energy, offload_energy, offload_latency};
use super::mobility::{step_id_mobility, step_uav, Trajectory};
use super::observation::StateView;
use super::state::EnvState;
use super::Vec3;
use crate::error::{contract, Error, Result};
use crate::numkit::Rng;

/// Relative slack when checking the CPU budget and the offload bound.
const BOUND_RTOL: f64 = 1e-9;
/// Absolute slack on the latency bound (s).
pub const LATENCY_ATOL: f64 = 1e-9;

/// Optimization variables applied in one slot. `cpu_hz` and `offload` have
/// one entry per device slot; inactive slots must be zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub cpu_hz: Vec<f64>,
    pub offload: Vec<f64>,
}

/// What to do with an offload ratio above the latency-feasible bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StepMode {
    /// Reject the action with a constraint error.
    #[default]
    Strict,
    /// Clamp to the bound and count the clamp in the outcome.
    ClampOffload,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub local_energy: Vec<f64>,
    pub offload_energy: Vec<f64>,
    pub latency: Vec<f64>,
    pub uplink: Vec<f64>,
    pub downlink: Vec<f64>,
    pub lambda_max: Vec<f64>,
    /// Offload ratios actually executed (after any clamp).
    pub offload: Vec<f64>,
    /// `−Σ_j (E_l + E_o)` over active devices.
    pub reward: f64,
    pub clamped: usize,
}

impl StepOutcome {
    pub fn total_energy(&self) -> f64 {
        -self.reward
    }
}

/// Links every active device would see if the UAV, currently at the
/// position stored in `state`, flew `traj` this slot. Devices read their
/// positions from the same state; inactive slots yield `None`.
pub fn probe_links(
    state: &[f64],
    mask: &[bool],
    traj: &Trajectory,
    cfg: &SimConfig,
) -> Result<Vec<Option<Link>>> {
    let view = StateView::new(state)?;
    contract!(
        view.slots() == mask.len(),
        "state has {} device slots but mask has {}",
        view.slots(),
        mask.len()
    );
    let n = mask.iter().filter(|&&a| a).count();
    contract!(n >= 1, "no active devices");
    let uav = step_uav(view.uav_position(cfg), traj, cfg)?;
    (0..mask.len())
        .map(|j| {
            if mask[j] {
                link(uav, view.device(j, cfg).position, cfg, n).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}

fn links_at(uav: Vec3, env: &EnvState, cfg: &SimConfig) -> Result<Vec<Option<Link>>> {
    let n = env.n_active();
    env.devices
        .iter()
        .zip(&env.active)
        .map(|(d, &a)| if a { link(uav, d.position, cfg, n).map(Some) } else { Ok(None) })
        .collect()
}

/// Advances the environment by one slot.
pub fn env_step(
    env: &EnvState,
    solution: &Solution,
    cfg: &SimConfig,
    rng: &mut Rng,
    mode: StepMode,
) -> Result<(EnvState, StepOutcome)> {
    let n_max = env.n_max();
    contract!(
        solution.cpu_hz.len() == n_max && solution.offload.len() == n_max,
        "solution has {}/{} entries, expected {}",
        solution.cpu_hz.len(),
        solution.offload.len(),
        n_max
    );
    let mut cpu_sum = 0.0;
    for j in 0..n_max {
        let (f, lam) = (solution.cpu_hz[j], solution.offload[j]);
        if !env.active[j] {
            contract!(
                f == 0.0 && lam == 0.0,
                "inactive slot {j} carries a non-zero action"
            );
            continue;
        }
        if !(f.is_finite() && f >= 0.0) {
            return Err(Error::Constraint {
                bound: "cpu_nonnegative",
                detail: format!("device {j} CPU share {f}"),
            });
        }
        if !(0.0..=1.0).contains(&lam) {
            return Err(Error::Constraint {
                bound: "offload_range",
                detail: format!("device {j} offload ratio {lam}"),
            });
        }
        cpu_sum += f;
    }
    if cpu_sum > cfg.f_max * (1.0 + BOUND_RTOL) {
        return Err(Error::Constraint {
            bound: "cpu_budget",
            detail: format!("Σf = {cpu_sum} exceeds f_max = {}", cfg.f_max),
        });
    }

    let uav = step_uav(env.uav, &solution.trajectory, cfg)?;
    let links = links_at(uav, env, cfg)?;

    let zeros = vec![0.0; n_max];
    let mut out = StepOutcome {
        local_energy: zeros.clone(),
        offload_energy: zeros.clone(),
        latency: zeros.clone(),
        uplink: zeros.clone(),
        downlink: zeros.clone(),
        lambda_max: zeros.clone(),
        offload: zeros,
        reward: 0.0,
        clamped: 0,
    };
    let mut total = 0.0;
    for j in 0..n_max {
        let Some(l) = links[j] else { continue };
        let d = &env.devices[j];
        let f = solution.cpu_hz[j];
        let bound = lambda_max(d.task_bits, l.uplink, l.downlink, f, cfg);
        let mut lam = solution.offload[j];
        if lam > bound * (1.0 + BOUND_RTOL) + 1e-12 {
            match mode {
                StepMode::Strict => {
                    return Err(Error::Constraint {
                        bound: "latency",
                        detail: format!("device {j} offload ratio {lam} exceeds feasible {bound}"),
                    })
                }
                StepMode::ClampOffload => {
                    lam = bound;
                    out.clamped += 1;
                }
            }
        }
        let e_l = local_energy(lam, d.task_bits, cfg)?;
        let e_o = offload_energy(lam, d.task_bits, l.uplink, cfg)?;
        let latency = offload_latency(lam, d.task_bits, l.uplink, l.downlink, f, cfg)?;
        if latency > cfg.tau + LATENCY_ATOL {
            return Err(Error::Constraint {
                bound: "latency",
                detail: format!("device {j} latency {latency} s exceeds slot {} s", cfg.tau),
            });
        }
        out.local_energy[j] = e_l;
        out.offload_energy[j] = e_o;
        out.latency[j] = latency;
        out.uplink[j] = l.uplink;
        out.downlink[j] = l.downlink;
        out.lambda_max[j] = bound;
        out.offload[j] = lam;
        total += e_l + e_o;
    }
    out.reward = -total;

    let t = cfg.slots as f64;
    let mut next = env.clone();
    next.uav = uav;
    for j in 0..n_max {
        if !env.active[j] {
            continue;
        }
        let d = &mut next.devices[j];
        d.prev_local_bits = (1.0 - out.offload[j]) * d.task_bits / t;
        d.prev_offload_bits = out.offload[j] * d.task_bits / t;
        d.prev_uplink_rate = out.uplink[j];
        *d = step_id_mobility(d, cfg, rng);
    }
    next.slot += 1;
    Ok((next, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_observations, energy::local_energy};

    fn single_device() -> (SimConfig, EnvState) {
        let cfg = crate::env::SimParams {
            n_min: 1,
            n_max: 3,
            task_bits_min: 1e6,
            task_bits_max: 1e7,
            ..Default::default()
        }
        .resolve()
        .unwrap();
        let env = EnvState::reset(&cfg, &[false, true, false], &mut Rng::new(3)).unwrap();
        (cfg, env)
    }

    fn hover(cpu: Vec<f64>, offload: Vec<f64>) -> Solution {
        Solution {
            trajectory: Trajectory::default(),
            cpu_hz: cpu,
            offload,
        }
    }

    #[test]
    fn local_only_reward() {
        let (cfg, env) = single_device();
        let sol = hover(vec![0.0, cfg.f_max, 0.0], vec![0.0; 3]);
        let (_, out) = env_step(&env, &sol, &cfg, &mut Rng::new(0), StepMode::Strict).unwrap();
        let e = local_energy(0.0, env.devices[1].task_bits, &cfg).unwrap();
        assert_eq!(out.reward, -e);
        assert_eq!(out.offload_energy[1], 0.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let (cfg, env) = single_device();
        let sol = hover(vec![0.0, cfg.f_max, 0.0], vec![0.0, 0.3, 0.0]);
        let a = env_step(&env, &sol, &cfg, &mut Rng::new(5), StepMode::Strict).unwrap();
        let b = env_step(&env, &sol, &cfg, &mut Rng::new(5), StepMode::Strict).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_budget_and_latency_violations() {
        let (cfg, env) = single_device();
        let over = hover(vec![0.0, cfg.f_max * 1.01, 0.0], vec![0.0; 3]);
        let err = env_step(&env, &over, &cfg, &mut Rng::new(0), StepMode::Strict).unwrap_err();
        assert!(matches!(err, Error::Constraint { bound: "cpu_budget", .. }));

        let starving = hover(vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]);
        let err = env_step(&env, &starving, &cfg, &mut Rng::new(0), StepMode::Strict).unwrap_err();
        assert!(matches!(err, Error::Constraint { bound: "latency", .. }));
        let (_, out) =
            env_step(&env, &starving, &cfg, &mut Rng::new(0), StepMode::ClampOffload).unwrap();
        assert_eq!(out.clamped, 1);
        assert!(out.latency[1] <= cfg.tau + LATENCY_ATOL);

        let masked = hover(vec![1.0, cfg.f_max - 1.0, 0.0], vec![0.0; 3]);
        assert!(env_step(&env, &masked, &cfg, &mut Rng::new(0), StepMode::Strict).is_err());
    }

    #[test]
    fn probe_matches_environment_links() {
        let (cfg, env) = single_device();
        let traj = Trajectory {
            speed: 20.0,
            azimuth: 1.0,
            polar: 1.2,
        };
        let obs = build_observations(&env, &cfg);
        let probed = probe_links(&obs.state_vector(), &obs.mask(), &traj, &cfg).unwrap();
        let sol = Solution {
            trajectory: traj,
            cpu_hz: vec![0.0, cfg.f_max, 0.0],
            offload: vec![0.0; 3],
        };
        let (_, out) = env_step(&env, &sol, &cfg, &mut Rng::new(0), StepMode::Strict).unwrap();
        let p = probed[1].unwrap();
        assert!((p.uplink - out.uplink[1]).abs() <= 1e-12 * out.uplink[1]);
        assert!(probed[0].is_none() && probed[2].is_none());
    }

    #[test]
    fn history_and_positions_update() {
        let (cfg, env) = single_device();
        let sol = hover(vec![0.0, cfg.f_max, 0.0], vec![0.0, 0.5, 0.0]);
        let (next, out) = env_step(&env, &sol, &cfg, &mut Rng::new(1), StepMode::Strict).unwrap();
        let d = &next.devices[1];
        assert_eq!(d.prev_uplink_rate, out.uplink[1]);
        assert!((d.prev_offload_bits - 0.5 * d.task_bits / 10.0).abs() < 1e-6);
        assert!(d.position[0] >= 0.0 && d.position[0] <= cfg.area_side);
        assert_eq!(next.slot, 1);
    }
}

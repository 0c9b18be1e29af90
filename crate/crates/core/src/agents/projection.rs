//! Projection of raw actor outputs onto the feasible set, and its gradient.

use std::f64::consts::{PI, TAU};

use super::bundle::{ActionBundle, ActionLayout, MessageSet, RawOutputs};
use crate::env::channel::Link;
use crate::env::energy::{lambda_max, lambda_max_dcpu};
use crate::env::{probe_links, SimConfig, StateView, Trajectory};
use crate::error::{contract, Error, Result};

/// Largest azimuth the affine map may emit; keeps η inside [0, 2π).
pub const AZIMUTH_MAX: f64 = TAU * (1.0 - f64::EPSILON);

/// Which CPU share a device plugs into its offload bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LambdaCpu {
    /// Its actual share, reconstructed from the downlink payload.
    #[default]
    Own,
    /// `f_max/N`, for devices that receive no messages.
    EqualShare,
}

/// Maps tanh outputs in [−1, 1] affinely onto the speed and angle boxes.
pub fn trajectory_from_raw(y: [f64; 3], cfg: &SimConfig) -> Trajectory {
    Trajectory {
        speed: (cfg.v_max * (y[0] + 1.0) / 2.0).clamp(0.0, cfg.v_max),
        azimuth: (PI * (y[1] + 1.0)).clamp(0.0, AZIMUTH_MAX),
        polar: (PI * (y[2] + 1.0) / 2.0).clamp(0.0, PI),
    }
}

/// Critic-side encoding of a trajectory: the velocity divided by `v_max`.
pub fn velocity_features(t: &Trajectory, v_max: f64) -> [f64; 3] {
    let s = t.speed / v_max;
    let d = t.direction();
    [s * d[0], s * d[1], s * d[2]]
}

/// `f_j = f_max·f̃_j / Σ_k f̃_k` over active slots; equal split when every
/// weight is zero. Returns the shares and the weight sum.
pub fn cpu_from_weights(weights: &[f64], mask: &[bool], f_max: f64) -> (Vec<f64>, f64) {
    let n = mask.iter().filter(|&&a| a).count();
    let sum: f64 = weights.iter().zip(mask).filter(|(_, &a)| a).map(|(w, _)| *w).sum();
    let cpu = weights
        .iter()
        .zip(mask)
        .map(|(&w, &a)| match (a, sum > 0.0) {
            (false, _) => 0.0,
            (true, true) => f_max * w / sum,
            (true, false) => f_max / n as f64,
        })
        .collect();
    (cpu, sum)
}

/// Quantities of the projection needed for its backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadTrace {
    mask: Vec<bool>,
    weight_sum: f64,
    cpu: Vec<f64>,
    fraction: Vec<f64>,
    lambda_max: Vec<f64>,
    dlambda_dcpu: Vec<f64>,
    f_max: f64,
    trajectory: Trajectory,
    v_max: f64,
}

/// Gradients of the projection with respect to the raw outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct RawGrads {
    pub trajectory: [f64; 3],
    pub cpu_weight: Vec<f64>,
    pub offload_fraction: Vec<f64>,
}

pub struct SolutionHead;

impl SolutionHead {
    /// Projects raw outputs. Task sizes come from the devices' own
    /// observations in `state`; rates are probed at the post-move UAV
    /// position unless supplied.
    pub fn apply(
        raw: &RawOutputs,
        state: &[f64],
        mask: &[bool],
        rates: Option<&[Option<Link>]>,
        lambda_cpu: LambdaCpu,
        cfg: &SimConfig,
    ) -> Result<(ActionBundle, HeadTrace)> {
        let n_max = mask.len();
        contract!(
            raw.cpu_weight.len() == n_max && raw.offload_fraction.len() == n_max,
            "raw outputs do not match {n_max} slots"
        );
        let n = mask.iter().filter(|&&a| a).count();
        contract!(n >= 1, "no active devices");
        let view = StateView::new(state)?;
        let trajectory = trajectory_from_raw(raw.trajectory, cfg);
        let links = match rates {
            Some(r) => {
                contract!(r.len() == n_max, "rates have {} slots, expected {n_max}", r.len());
                r.to_vec()
            }
            None => probe_links(state, mask, &trajectory, cfg)?,
        };
        let (cpu, weight_sum) = cpu_from_weights(&raw.cpu_weight, mask, cfg.f_max);
        let mut offload = vec![0.0; n_max];
        let mut bound = vec![0.0; n_max];
        let mut dbound = vec![0.0; n_max];
        let mut fraction = vec![0.0; n_max];
        for j in (0..n_max).filter(|&j| mask[j]) {
            let l = links[j].ok_or_else(|| Error::Contract(format!("no link for active device {j}")))?;
            let bits = view.device(j, cfg).task_bits;
            let f = match lambda_cpu {
                LambdaCpu::Own => cpu[j],
                LambdaCpu::EqualShare => cfg.f_max / n as f64,
            };
            bound[j] = lambda_max(bits, l.uplink, l.downlink, f, cfg);
            if lambda_cpu == LambdaCpu::Own {
                dbound[j] = lambda_max_dcpu(bits, l.uplink, l.downlink, f, cfg);
            }
            fraction[j] = raw.offload_fraction[j].clamp(0.0, 1.0);
            offload[j] = bound[j] * fraction[j];
        }
        let bundle = ActionBundle {
            trajectory,
            cpu_hz: cpu.clone(),
            offload,
            lambda_max: bound.clone(),
            links,
            lambda_cpu,
            raw: raw.clone(),
            messages: MessageSet::none(n_max),
        };
        let trace = HeadTrace {
            mask: mask.to_vec(),
            weight_sum,
            cpu,
            fraction,
            lambda_max: bound,
            dlambda_dcpu: dbound,
            f_max: cfg.f_max,
            trajectory,
            v_max: cfg.v_max,
        };
        Ok((bundle, trace))
    }

    /// Pulls the gradient of the encoded action back onto the raw outputs.
    /// Rates are constants; the clamps are treated as identities.
    pub fn backward(trace: &HeadTrace, d_action: &[f64], layout: &ActionLayout) -> RawGrads {
        let f_max = trace.f_max;
        let n_max = trace.mask.len();
        let t = &trace.trajectory;
        let s = t.speed / trace.v_max;
        let (sb, cb) = t.polar.sin_cos();
        let (se, ce) = t.azimuth.sin_cos();
        let g = &d_action[..3];
        // ds/dy0 = 1/2, dη/dy1 = π, dβ/dy2 = π/2.
        let trajectory = [
            0.5 * (g[0] * sb * ce + g[1] * sb * se + g[2] * cb),
            PI * s * sb * (g[1] * ce - g[0] * se),
            0.5 * PI * s * (g[0] * cb * ce + g[1] * cb * se - g[2] * sb),
        ];
        let mut d_cpu = vec![0.0; n_max];
        let mut d_frac = vec![0.0; n_max];
        for j in (0..n_max).filter(|&j| trace.mask[j]) {
            let g_lam = d_action[layout.offload_index(j)];
            d_frac[j] = g_lam * trace.lambda_max[j];
            d_cpu[j] = d_action[layout.cpu_index(j)] / f_max + g_lam * trace.fraction[j] * trace.dlambda_dcpu[j];
        }
        let mut d_weight = vec![0.0; n_max];
        if trace.weight_sum > 0.0 {
            let mean: f64 = (0..n_max)
                .filter(|&j| trace.mask[j])
                .map(|j| d_cpu[j] * trace.cpu[j] / f_max)
                .sum();
            for j in (0..n_max).filter(|&j| trace.mask[j]) {
                d_weight[j] = f_max / trace.weight_sum * (d_cpu[j] - mean);
            }
        }
        RawGrads {
            trajectory,
            cpu_weight: d_weight,
            offload_fraction: d_frac,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_observations, EnvState};
    use crate::numkit::Rng;

    #[test]
    fn trajectory_box_corners() {
        let cfg = SimConfig::default();
        let t = trajectory_from_raw([-1.0, 0.0, 1.0], &cfg);
        assert_eq!(t.speed, 0.0);
        assert!((t.azimuth - PI).abs() < 1e-15);
        assert_eq!(t.polar, PI);
        let t = trajectory_from_raw([1.0, 1.0, -1.0], &cfg);
        assert_eq!(t.speed, cfg.v_max);
        assert!(t.azimuth < TAU);
        assert_eq!(t.polar, 0.0);
    }

    #[test]
    fn cpu_split_cases() {
        let mask = [true, false, true, true];
        let (f, s) = cpu_from_weights(&[1.0, 0.0, 1.0, 1.0], &mask, 30.0);
        assert_eq!(s, 3.0);
        assert_eq!(f, vec![10.0, 0.0, 10.0, 10.0]);
        let (f, s) = cpu_from_weights(&[0.0; 4], &mask, 30.0);
        assert_eq!(s, 0.0);
        assert_eq!(f, vec![10.0, 0.0, 10.0, 10.0]);
        let (f, _) = cpu_from_weights(&[0.2, 0.0, 0.7, 0.1], &mask, 30.0);
        assert!((f.iter().sum::<f64>() - 30.0).abs() < 1e-12);
    }

    fn fixture() -> (SimConfig, Vec<f64>, Vec<bool>) {
        let cfg = crate::env::SimParams {
            n_max: 4,
            n_min: 1,
            task_bits_min: 1e6,
            task_bits_max: 1e7,
            ..Default::default()
        }
        .resolve()
        .unwrap();
        let mask = vec![true, false, true, true];
        let env = EnvState::reset(&cfg, &mask, &mut Rng::new(4)).unwrap();
        let obs = build_observations(&env, &cfg);
        (cfg, obs.state_vector(), mask)
    }

    #[test]
    fn offload_is_fraction_of_bound() {
        let (cfg, state, mask) = fixture();
        let raw = RawOutputs {
            trajectory: [0.1, -0.3, 0.2],
            cpu_weight: vec![0.5, 0.0, 1.5, 0.0],
            offload_fraction: vec![0.5, 0.0, 1.0, 0.25],
        };
        let (b, _) = SolutionHead::apply(&raw, &state, &mask, None, LambdaCpu::Own, &cfg).unwrap();
        assert_eq!(b.offload[0], 0.5 * b.lambda_max[0]);
        assert_eq!(b.offload[2], b.lambda_max[2]);
        assert_eq!(b.cpu_hz[3], 0.0);
        assert_eq!(b.lambda_max[3], 0.0);
        assert_eq!(b.offload[1], 0.0);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (cfg, state, mask) = fixture();
        let layout = ActionLayout::solution_only(4);
        let raw = RawOutputs {
            trajectory: [0.1, -0.3, 0.2],
            cpu_weight: vec![0.5, 0.0, 1.5, 0.7],
            offload_fraction: vec![0.3, 0.0, 0.6, 0.25],
        };
        let (b0, trace) = SolutionHead::apply(&raw, &state, &mask, None, LambdaCpu::Own, &cfg).unwrap();
        let rates = b0.links.clone();
        let mut rng = Rng::new(9);
        let g: Vec<f64> = (0..layout.width()).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let objective = |r: &RawOutputs| {
            let (b, _) =
                SolutionHead::apply(r, &state, &mask, Some(&rates), LambdaCpu::Own, &cfg).unwrap();
            let a = layout.encode(&b, &cfg).unwrap();
            a.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>()
        };
        let grads = SolutionHead::backward(&trace, &g, &layout);
        let h = 1e-6;
        for j in [0, 2, 3] {
            let mut p = raw.clone();
            p.cpu_weight[j] += h;
            let mut m = raw.clone();
            m.cpu_weight[j] -= h;
            let fd = (objective(&p) - objective(&m)) / (2.0 * h);
            assert!((fd - grads.cpu_weight[j]).abs() <= 1e-6 * (1.0 + fd.abs()), "cpu {j}: {fd} vs {}", grads.cpu_weight[j]);
            let mut p = raw.clone();
            p.offload_fraction[j] += h;
            let mut m = raw.clone();
            m.offload_fraction[j] -= h;
            let fd = (objective(&p) - objective(&m)) / (2.0 * h);
            assert!((fd - grads.offload_fraction[j]).abs() <= 1e-6 * (1.0 + fd.abs()));
        }
        for i in 0..3 {
            let mut p = raw.clone();
            p.trajectory[i] += h;
            let mut m = raw.clone();
            m.trajectory[i] -= h;
            let fd = (objective(&p) - objective(&m)) / (2.0 * h);
            assert!((fd - grads.trajectory[i]).abs() <= 1e-6 * (1.0 + fd.abs()));
        }
    }
}

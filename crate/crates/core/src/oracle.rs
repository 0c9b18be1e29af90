//! Scalar re-implementation of one simulator slot, written directly from the
//! model equations in the raw (dB, dBm) parameter units. It shares nothing
//! with [`crate::env`] except the state structs and the order in which the
//! mobility innovations are drawn from the RNG.

use crate::env::{env_step, sample_population, EnvState, SimParams, Solution, StepMode, Trajectory};
use crate::error::Result;
use crate::numkit::Rng;

/// Everything one slot produces, device vectors indexed by slot.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OracleSlot {
    pub uav: [f64; 3],
    pub uplink: Vec<f64>,
    pub downlink: Vec<f64>,
    pub lambda_max: Vec<f64>,
    pub local_energy: Vec<f64>,
    pub offload_energy: Vec<f64>,
    pub latency: Vec<f64>,
    pub reward: f64,
    pub next_positions: Vec<[f64; 3]>,
    pub next_speed: Vec<f64>,
    pub next_heading: Vec<f64>,
}

fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn clamp(x: f64, lo: f64, hi: f64) -> f64 {
    if x < lo {
        lo
    } else if x > hi {
        hi
    } else {
        x
    }
}

/// Feasible offload bound for one device; zero when any resource is zero.
pub fn oracle_lambda_max(p: &SimParams, bits: f64, up: f64, down: f64, cpu: f64) -> f64 {
    if up <= 0.0 || down <= 0.0 || cpu <= 0.0 {
        return 0.0;
    }
    // Latency of the whole per-slot subtask at λ = 1, then scale to τ.
    let sub = bits / p.slots_per_block as f64;
    let full = sub / up + p.cycles_per_bit * sub / cpu + p.output_ratio * sub / down;
    let lm = p.slot_duration_s / full;
    if lm > 1.0 {
        1.0
    } else {
        lm
    }
}

/// Per-device (uplink, downlink) rates for a UAV at `uav`.
pub fn oracle_rates(p: &SimParams, uav: [f64; 3], dev: [f64; 3], n: usize) -> (f64, f64) {
    let (dx, dy, dz) = (uav[0] - dev[0], uav[1] - dev[1], uav[2] - dev[2]);
    let horizontal = (dx * dx + dy * dy).sqrt();
    let mut d = (horizontal * horizontal + dz * dz).sqrt();
    if d < p.min_link_distance_m {
        d = p.min_link_distance_m;
    }
    let elevation = if horizontal == 0.0 {
        90.0
    } else {
        (dz / horizontal).atan() * 180.0 / std::f64::consts::PI
    };
    let p_los = 1.0 / (1.0 + p.los_k1 * (-p.los_k2 * (elevation - p.los_k1)).exp());
    let chi = p_los * from_db(p.chi_los_db) + (1.0 - p_los) * from_db(p.chi_nlos_db);
    let h = from_db(p.rho0_db) / (chi * d.powf(p.path_loss_exponent));
    let noise = p.bandwidth_hz * 10f64.powf(p.noise_dbm / 10.0) / 1000.0;
    let b = p.bandwidth_hz / n as f64;
    let up = b * (1.0 + n as f64 * p.p_uplink_w * h / noise).log2();
    let down = b * (1.0 + n as f64 * p.p_downlink_w * h / noise).log2();
    (up, down)
}

/// Recomputes one slot from scratch. `rng` must be in the state the
/// simulator's RNG was in before the step.
pub fn oracle_step(p: &SimParams, env: &EnvState, sol: &Solution, rng: &mut Rng) -> OracleSlot {
    let n_max = env.devices.len();
    let n = env.active.iter().filter(|&&a| a).count();
    let t = p.slots_per_block as f64;
    let tau = p.slot_duration_s;
    let tr = sol.trajectory;
    let hop = tau * tr.speed;
    let uav = [
        clamp(env.uav[0] + hop * tr.polar.sin() * tr.azimuth.cos(), 0.0, p.area_side_m),
        clamp(env.uav[1] + hop * tr.polar.sin() * tr.azimuth.sin(), 0.0, p.area_side_m),
        clamp(env.uav[2] + hop * tr.polar.cos(), p.altitude_min_m, p.altitude_max_m),
    ];
    let mut out = OracleSlot {
        uav,
        uplink: vec![0.0; n_max],
        downlink: vec![0.0; n_max],
        lambda_max: vec![0.0; n_max],
        local_energy: vec![0.0; n_max],
        offload_energy: vec![0.0; n_max],
        latency: vec![0.0; n_max],
        next_positions: env.devices.iter().map(|d| d.position).collect(),
        next_speed: env.devices.iter().map(|d| d.speed).collect(),
        next_heading: env.devices.iter().map(|d| d.heading).collect(),
        ..OracleSlot::default()
    };
    let mut energy = 0.0;
    for j in 0..n_max {
        if !env.active[j] {
            continue;
        }
        let dev = &env.devices[j];
        let (up, down) = oracle_rates(p, uav, dev.position, n);
        let lam = sol.offload[j];
        let f = sol.cpu_hz[j];
        let sub = dev.task_bits / t;
        let local_cycles = p.cycles_per_bit * (1.0 - lam) * sub;
        let e_l = p.capacitance * local_cycles * local_cycles * local_cycles / (tau * tau);
        let (e_o, lat) = if lam == 0.0 {
            (0.0, 0.0)
        } else {
            let off = lam * sub;
            (
                p.p_uplink_w * off / up,
                off / up + p.cycles_per_bit * off / f + p.output_ratio * off / down,
            )
        };
        out.uplink[j] = up;
        out.downlink[j] = down;
        out.lambda_max[j] = oracle_lambda_max(p, dev.task_bits, up, down, f);
        out.local_energy[j] = e_l;
        out.offload_energy[j] = e_o;
        out.latency[j] = lat;
        energy += e_l + e_o;
    }
    out.reward = -energy;
    for j in 0..n_max {
        if !env.active[j] {
            continue;
        }
        let dev = &env.devices[j];
        let zv = rng.standard_normal();
        let zo = rng.standard_normal();
        let (kv, ko) = (p.kappa_v, p.kappa_o);
        let mut v = kv * dev.speed + (1.0 - kv) * dev.mean_speed + (1.0 - kv * kv).sqrt() * (p.sigma_v * zv);
        if v < 0.0 {
            v = 0.0;
        }
        let o = ko * dev.heading + (1.0 - ko) * dev.mean_heading + (1.0 - ko * ko).sqrt() * (p.sigma_o * zo);
        out.next_positions[j] = [
            clamp(dev.position[0] + tau * v * o.cos(), 0.0, p.area_side_m),
            clamp(dev.position[1] + tau * v * o.sin(), 0.0, p.area_side_m),
            0.0,
        ];
        out.next_speed[j] = v;
        out.next_heading[j] = o;
    }
    out
}

/// Symmetric relative deviation; zero when both values are zero.
pub fn relative_deviation(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub steps: usize,
    pub max_rel_dev: f64,
    /// Quantity and step where the maximum occurred.
    pub worst: String,
}

fn random_solution(p: &SimParams, env: &EnvState, rng: &mut Rng) -> Solution {
    let n_max = env.devices.len();
    let trajectory = Trajectory {
        speed: rng.uniform(0.0, p.v_max_mps),
        azimuth: rng.uniform(0.0, std::f64::consts::TAU),
        polar: rng.uniform(0.0, std::f64::consts::PI),
    };
    let mut weights: Vec<f64> = (0..n_max)
        .map(|j| if env.active[j] { rng.uniform(0.0, 1.0) } else { 0.0 })
        .collect();
    if rng.uniform(0.0, 1.0) < 0.1 {
        // Starve one device completely.
        if let Some(j) = (0..n_max).find(|&j| env.active[j]) {
            weights[j] = 0.0;
        }
    }
    let total: f64 = weights.iter().sum();
    let cpu_hz: Vec<f64> = weights.iter().map(|w| if total > 0.0 { p.f_max_hz * w / total } else { 0.0 }).collect();
    let probe = oracle_step(p, env, &Solution { trajectory, cpu_hz: cpu_hz.clone(), offload: vec![0.0; n_max] }, &mut rng.clone());
    let offload = (0..n_max)
        .map(|j| {
            if !env.active[j] {
                return 0.0;
            }
            match rng.index(4) {
                0 => 0.0,
                1 => probe.lambda_max[j],
                _ => probe.lambda_max[j] * rng.uniform(0.0, 1.0),
            }
        })
        .collect();
    Solution { trajectory, cpu_hz, offload }
}

/// Drives the simulator with random feasible solutions for `steps` slots
/// over random populations and compares every output with the oracle.
pub fn verify(params: &SimParams, steps: usize, seed: u64) -> Result<OracleReport> {
    let cfg = params.resolve()?;
    let mut rng = Rng::new(seed);
    let mut report = OracleReport { steps: 0, max_rel_dev: 0.0, worst: String::new() };
    let mut env: Option<EnvState> = None;
    while report.steps < steps {
        let mut cur = match env.take() {
            Some(e) if e.slot < cfg.slots => e,
            _ => {
                let mask = sample_population(&cfg, &mut rng);
                EnvState::reset(&cfg, &mask, &mut rng)?
            }
        };
        let sol = random_solution(params, &cur, &mut rng);
        let expect = oracle_step(params, &cur, &sol, &mut rng.clone());
        let (next, got) = env_step(&cur, &sol, &cfg, &mut rng, StepMode::Strict)?;
        let mut track = |name: &str, a: f64, b: f64| {
            let d = relative_deviation(a, b);
            if d > report.max_rel_dev || d.is_nan() {
                report.max_rel_dev = if d.is_nan() { f64::INFINITY } else { d };
                report.worst = format!("{name} at step {}: {a} vs {b}", report.steps);
            }
        };
        track("reward", got.reward, expect.reward);
        for k in 0..3 {
            track("uav", next.uav[k], expect.uav[k]);
        }
        for j in 0..cur.devices.len() {
            track("uplink", got.uplink[j], expect.uplink[j]);
            track("downlink", got.downlink[j], expect.downlink[j]);
            track("lambda_max", got.lambda_max[j], expect.lambda_max[j]);
            track("local_energy", got.local_energy[j], expect.local_energy[j]);
            track("offload_energy", got.offload_energy[j], expect.offload_energy[j]);
            track("latency", got.latency[j], expect.latency[j]);
            for k in 0..3 {
                track("position", next.devices[j].position[k], expect.next_positions[j][k]);
            }
            track("speed", next.devices[j].speed, expect.next_speed[j]);
            track("heading", next.devices[j].heading, expect.next_heading[j]);
        }
        cur = next;
        env = Some(cur);
        report.steps += 1;
    }
    Ok(report)
}

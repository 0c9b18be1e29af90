use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simulation parameters in the units people write them in (dB, dBm).
///
/// Defaults are the reference scenario: 0.2 s slots, 10 slots per block,
/// 100 m square area, 40 GHz server, 10 MHz band and 2–20 Gbit tasks.
/// [`SimParams::resolve`] validates and converts to the linear
/// [`SimConfig`] used everywhere else.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Slot duration τ (s).
    pub slot_duration_s: f64,
    /// Slots per block T.
    pub slots_per_block: usize,
    /// Smallest device population drawn per episode.
    pub n_min: usize,
    /// Largest device population; fixes the padded state/action widths.
    pub n_max: usize,
    /// Side of the square service area (m).
    pub area_side_m: f64,
    pub altitude_min_m: f64,
    pub altitude_max_m: f64,
    /// UAV speed limit (m/s).
    pub v_max_mps: f64,
    /// Server CPU budget shared by all devices (cycles/s).
    pub f_max_hz: f64,
    /// Total bandwidth B (Hz).
    pub bandwidth_hz: f64,
    /// Noise power spectral density N₀ (dBm/Hz).
    pub noise_dbm: f64,
    /// Device transmit power (W).
    pub p_uplink_w: f64,
    /// UAV transmit power (W).
    pub p_downlink_w: f64,
    /// Reference channel power gain at 1 m (dB). The gain model divides by
    /// the matching reference loss `10^(-rho0_db/10)`.
    pub rho0_db: f64,
    pub path_loss_exponent: f64,
    /// Excess LoS loss (dB).
    pub chi_los_db: f64,
    /// Excess NLoS loss (dB).
    pub chi_nlos_db: f64,
    /// LoS-probability constants (degree scale).
    pub los_k1: f64,
    pub los_k2: f64,
    /// CPU cycles per task bit.
    pub cycles_per_bit: f64,
    /// Effective switched capacitance of the device CPU.
    pub capacitance: f64,
    /// Output-to-input size ratio of a computed task.
    pub output_ratio: f64,
    /// Task size range per block (bits).
    pub task_bits_min: f64,
    pub task_bits_max: f64,
    /// Gauss–Markov memory factors.
    pub kappa_v: f64,
    pub kappa_o: f64,
    /// Range of per-device mean speeds (m/s).
    pub mean_speed_min_mps: f64,
    pub mean_speed_max_mps: f64,
    /// Standard deviations of the speed and heading innovations.
    pub sigma_v: f64,
    pub sigma_o: f64,
    /// Link distances below this are evaluated at this distance (m).
    pub min_link_distance_m: f64,
    /// Offload ratio assumed for the slot before the first one.
    pub initial_offload_ratio: f64,
    /// Uplink rate assumed for the slot before the first one (bit/s).
    pub initial_uplink_rate_bps: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            slot_duration_s: 0.2,
            slots_per_block: 10,
            n_min: 5,
            n_max: 10,
            area_side_m: 100.0,
            altitude_min_m: 0.0,
            altitude_max_m: 60.0,
            v_max_mps: 50.0,
            f_max_hz: 40e9,
            bandwidth_hz: 10e6,
            noise_dbm: -130.0,
            p_uplink_w: 1.0,
            p_downlink_w: 10.0,
            rho0_db: -38.0,
            path_loss_exponent: 2.0,
            chi_los_db: 3.0,
            chi_nlos_db: 23.0,
            los_k1: 11.95,
            los_k2: 0.14,
            cycles_per_bit: 1550.0,
            capacitance: 1e-28,
            output_ratio: 0.2,
            task_bits_min: 2e9,
            task_bits_max: 20e9,
            kappa_v: 0.8,
            kappa_o: 0.8,
            mean_speed_min_mps: 0.0,
            mean_speed_max_mps: 2.0,
            sigma_v: 0.3,
            sigma_o: 0.3,
            min_link_distance_m: 1.0,
            initial_offload_ratio: 0.0,
            initial_uplink_rate_bps: 0.0,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Linear-unit simulator configuration. Only built through
/// [`SimParams::resolve`], so every instance has passed validation.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub tau: f64,
    pub slots: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub area_side: f64,
    pub altitude_min: f64,
    pub altitude_max: f64,
    pub v_max: f64,
    pub f_max: f64,
    pub bandwidth: f64,
    /// Noise PSD (W/Hz).
    pub noise_psd: f64,
    pub p_up: f64,
    pub p_down: f64,
    /// Reference path loss ρ₀ (linear, ≥ 1 for a negative dB gain).
    pub ref_loss: f64,
    pub path_loss_exponent: f64,
    pub chi_los: f64,
    pub chi_nlos: f64,
    pub los_k1: f64,
    pub los_k2: f64,
    pub cycles_per_bit: f64,
    pub capacitance: f64,
    pub output_ratio: f64,
    pub task_min: f64,
    pub task_max: f64,
    pub kappa_v: f64,
    pub kappa_o: f64,
    pub mean_speed_min: f64,
    pub mean_speed_max: f64,
    pub sigma_v: f64,
    pub sigma_o: f64,
    pub min_link_distance: f64,
    pub initial_offload_ratio: f64,
    pub initial_uplink_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimParams::default()
            .resolve()
            .expect("default parameters are valid")
    }
}

impl SimParams {
    pub fn resolve(&self) -> Result<SimConfig> {
        let p = self;
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("slot_duration_s", p.slot_duration_s),
            ("area_side_m", p.area_side_m),
            ("v_max_mps", p.v_max_mps),
            ("f_max_hz", p.f_max_hz),
            ("bandwidth_hz", p.bandwidth_hz),
            ("p_uplink_w", p.p_uplink_w),
            ("p_downlink_w", p.p_downlink_w),
            ("path_loss_exponent", p.path_loss_exponent),
            ("cycles_per_bit", p.cycles_per_bit),
            ("capacitance", p.capacitance),
            ("task_bits_min", p.task_bits_min),
            ("min_link_distance_m", p.min_link_distance_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("sigma_v", p.sigma_v),
            ("sigma_o", p.sigma_o),
            ("mean_speed_min_mps", p.mean_speed_min_mps),
            ("altitude_min_m", p.altitude_min_m),
            ("initial_uplink_rate_bps", p.initial_uplink_rate_bps),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if p.slots_per_block == 0 {
            return bad("slots_per_block must be at least 1".into());
        }
        if p.n_min == 0 || p.n_min > p.n_max {
            return bad(format!(
                "need 1 <= n_min <= n_max, got n_min={} n_max={}",
                p.n_min, p.n_max
            ));
        }
        if p.altitude_max_m <= p.altitude_min_m {
            return bad("altitude_max_m must exceed altitude_min_m".into());
        }
        if p.task_bits_max < p.task_bits_min {
            return bad("task_bits_max must be >= task_bits_min".into());
        }
        if p.mean_speed_max_mps < p.mean_speed_min_mps {
            return bad("mean_speed_max_mps must be >= mean_speed_min_mps".into());
        }
        if !(p.output_ratio > 0.0 && p.output_ratio <= 1.0) {
            return bad(format!("output_ratio must lie in (0, 1], got {}", p.output_ratio));
        }
        for (name, v) in [("kappa_v", p.kappa_v), ("kappa_o", p.kappa_o)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&p.initial_offload_ratio) {
            return bad("initial_offload_ratio must lie in [0, 1]".into());
        }
        let chi_los = db_to_linear(p.chi_los_db);
        let chi_nlos = db_to_linear(p.chi_nlos_db);
        if !(chi_nlos > chi_los && chi_los > 1.0) {
            return bad(format!(
                "excess losses must satisfy chi_nlos > chi_los > 0 dB, got {} dB / {} dB",
                p.chi_nlos_db, p.chi_los_db
            ));
        }
        if !(p.los_k1 > 0.0 && p.los_k2 > 0.0) {
            return bad("los_k1 and los_k2 must be positive".into());
        }
        Ok(SimConfig {
            tau: p.slot_duration_s,
            slots: p.slots_per_block,
            n_min: p.n_min,
            n_max: p.n_max,
            area_side: p.area_side_m,
            altitude_min: p.altitude_min_m,
            altitude_max: p.altitude_max_m,
            v_max: p.v_max_mps,
            f_max: p.f_max_hz,
            bandwidth: p.bandwidth_hz,
            noise_psd: dbm_to_watts(p.noise_dbm),
            p_up: p.p_uplink_w,
            p_down: p.p_downlink_w,
            ref_loss: db_to_linear(-p.rho0_db),
            path_loss_exponent: p.path_loss_exponent,
            chi_los,
            chi_nlos,
            los_k1: p.los_k1,
            los_k2: p.los_k2,
            cycles_per_bit: p.cycles_per_bit,
            capacitance: p.capacitance,
            output_ratio: p.output_ratio,
            task_min: p.task_bits_min,
            task_max: p.task_bits_max,
            kappa_v: p.kappa_v,
            kappa_o: p.kappa_o,
            mean_speed_min: p.mean_speed_min_mps,
            mean_speed_max: p.mean_speed_max_mps,
            sigma_v: p.sigma_v,
            sigma_o: p.sigma_o,
            min_link_distance: p.min_link_distance_m,
            initial_offload_ratio: p.initial_offload_ratio,
            initial_uplink_rate: p.initial_uplink_rate_bps,
        })
    }
}

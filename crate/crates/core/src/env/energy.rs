//! Per-slot energy and latency of partial offloading.

use super::config::SimConfig;
use crate::error::{contract, Result};

fn check_ratio(lambda: f64) -> Result<()> {
    contract!(
        (0.0..=1.0).contains(&lambda),
        "offload ratio {lambda} outside [0, 1]"
    );
    Ok(())
}

/// Energy (J) to compute the locally kept `(1−λ)·I/T` bits within one slot.
pub fn local_energy(lambda: f64, task_bits: f64, cfg: &SimConfig) -> Result<f64> {
    check_ratio(lambda)?;
    let cycles = cfg.cycles_per_bit * (1.0 - lambda) * task_bits;
    let t = cfg.slots as f64;
    Ok(cfg.capacitance * cycles.powi(3) / (cfg.tau * cfg.tau * t.powi(3)))
}

/// Transmit energy (J) to upload `λ·I/T` bits at rate `uplink`.
pub fn offload_energy(lambda: f64, task_bits: f64, uplink: f64, cfg: &SimConfig) -> Result<f64> {
    check_ratio(lambda)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    contract!(uplink > 0.0, "offloading with zero uplink rate");
    Ok(cfg.p_up * lambda * task_bits / (uplink * cfg.slots as f64))
}

/// Upload + remote compute + download latency (s) of the offloaded part.
pub fn offload_latency(
    lambda: f64,
    task_bits: f64,
    uplink: f64,
    downlink: f64,
    cpu_hz: f64,
    cfg: &SimConfig,
) -> Result<f64> {
    check_ratio(lambda)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    contract!(cpu_hz > 0.0, "offloading with zero server CPU share");
    contract!(uplink > 0.0 && downlink > 0.0, "offloading over a dead link");
    let bits = lambda * task_bits / cfg.slots as f64;
    Ok(bits / uplink + cfg.cycles_per_bit * bits / cpu_hz + cfg.output_ratio * bits / downlink)
}

/// Largest offload ratio that keeps the latency within one slot.
///
/// Zero when any of the rates or the CPU share is zero.
pub fn lambda_max(task_bits: f64, uplink: f64, downlink: f64, cpu_hz: f64, cfg: &SimConfig) -> f64 {
    if uplink <= 0.0 || downlink <= 0.0 || cpu_hz <= 0.0 {
        return 0.0;
    }
    lambda_max_unclamped(task_bits, uplink, downlink, cpu_hz, cfg).min(1.0)
}

/// `τT/I / (1/R_u + δ/R_d + C/f)` before the clamp at 1.
pub fn lambda_max_unclamped(
    task_bits: f64,
    uplink: f64,
    downlink: f64,
    cpu_hz: f64,
    cfg: &SimConfig,
) -> f64 {
    let per_bit = 1.0 / uplink + cfg.output_ratio / downlink + cfg.cycles_per_bit / cpu_hz;
    cfg.tau * cfg.slots as f64 / task_bits / per_bit
}

/// `∂λ_max/∂f`; zero on the clamped branch and at the guards.
pub fn lambda_max_dcpu(task_bits: f64, uplink: f64, downlink: f64, cpu_hz: f64, cfg: &SimConfig) -> f64 {
    if uplink <= 0.0 || downlink <= 0.0 || cpu_hz <= 0.0 {
        return 0.0;
    }
    let per_bit = 1.0 / uplink + cfg.output_ratio / downlink + cfg.cycles_per_bit / cpu_hz;
    let x = cfg.tau * cfg.slots as f64 / task_bits / per_bit;
    if x >= 1.0 {
        return 0.0;
    }
    x / per_bit * cfg.cycles_per_bit / (cpu_hz * cpu_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SimConfig {
        SimConfig::default()
    }

    #[test]
    fn local_energy_cases() {
        let c = cfg();
        assert_eq!(local_energy(1.0, 5e6, &c).unwrap(), 0.0);
        let e0 = local_energy(0.0, 5e6, &c).unwrap();
        let e5 = local_energy(0.5, 5e6, &c).unwrap();
        assert!((e0 / e5 - 8.0).abs() < 1e-12);
        assert!(local_energy(1.1, 5e6, &c).is_err());
    }

    #[test]
    fn local_energy_reference_value() {
        // 1e-28·(1550·0.1·2e9)^3 / (0.2²·10³), exact in rational arithmetic.
        let e = local_energy(0.9, 2e9, &cfg()).unwrap();
        let expect = 1e-28 * (1550.0f64 * 0.1 * 2e9).powi(3) / 40.0;
        assert!((e / expect - 1.0).abs() < 1e-12);
        assert!((e - 74_477.5).abs() / 74_477.5 < 1e-12, "{e}");
    }

    #[test]
    fn offload_energy_cases() {
        let c = cfg();
        assert_eq!(offload_energy(0.0, 1e8, 0.0, &c).unwrap(), 0.0);
        let e = offload_energy(0.5, 1e8, 5e7, &c).unwrap();
        assert!((e - 0.1).abs() < 1e-15);
        let e2 = offload_energy(0.5, 1e8, 1e8, &c).unwrap();
        assert!((e / e2 - 2.0).abs() < 1e-15);
        assert!(offload_energy(0.5, 1e8, 0.0, &c).is_err());
    }

    #[test]
    fn latency_binding_at_lambda_max() {
        let c = cfg();
        let (i, ru, rd, f) = (8e6, 9e6, 2e7, 4e9);
        let lm = lambda_max(i, ru, rd, f, &c);
        assert!(lm < 1.0);
        let l = offload_latency(lm, i, ru, rd, f, &c).unwrap();
        assert!((l - c.tau).abs() < 1e-9);
        assert_eq!(offload_latency(0.0, i, ru, rd, 0.0, &c).unwrap(), 0.0);
        assert!(offload_latency(0.3, i, ru, rd, 0.0, &c).is_err());
    }

    #[test]
    fn lambda_max_guards_and_clamp() {
        let c = cfg();
        assert_eq!(lambda_max(1e6, 1e12, 1e12, 1e15, &c), 1.0);
        assert_eq!(lambda_max(1e6, 1e7, 1e7, 0.0, &c), 0.0);
        assert_eq!(lambda_max(1e6, 0.0, 1e7, 1e9, &c), 0.0);
    }

    #[test]
    fn lambda_max_derivative_matches_difference() {
        let c = cfg();
        let (i, ru, rd, f) = (8e6, 9e6, 2e7, 4e9);
        let h = 1e3;
        let fd = (lambda_max(i, ru, rd, f + h, &c) - lambda_max(i, ru, rd, f - h, &c)) / (2.0 * h);
        let an = lambda_max_dcpu(i, ru, rd, f, &c);
        assert!((fd - an).abs() / an.abs() < 1e-6);
    }
}

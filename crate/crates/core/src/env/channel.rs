//! Air-to-ground channel: LoS probability, large-scale gain, FDMA rates.

use super::config::SimConfig;
use super::Vec3;
use crate::error::{contract, Result};

/// Elevation angle (degrees) of `uav` as seen from `device`.
pub fn elevation_deg(uav: Vec3, device: Vec3) -> f64 {
    let dx = uav[0] - device[0];
    let dy = uav[1] - device[1];
    let dz = uav[2] - device[2];
    let horizontal = (dx * dx + dy * dy).sqrt();
    dz.atan2(horizontal).to_degrees()
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Logistic LoS probability for an elevation angle in degrees.
pub fn los_from_elevation(elevation_deg: f64, cfg: &SimConfig) -> f64 {
    1.0 / (1.0 + cfg.los_k1 * (-cfg.los_k2 * (elevation_deg - cfg.los_k1)).exp())
}

pub fn los_probability(uav: Vec3, device: Vec3, cfg: &SimConfig) -> Result<f64> {
    contract!(
        distance(uav, device) > 0.0,
        "LoS probability undefined for co-located UAV and device"
    );
    Ok(los_from_elevation(elevation_deg(uav, device), cfg))
}

/// Large-scale gain at distance `d` with LoS probability `los`.
pub fn gain_at(d: f64, los: f64, cfg: &SimConfig) -> f64 {
    let excess = los * cfg.chi_los + (1.0 - los) * cfg.chi_nlos;
    d.powf(-cfg.path_loss_exponent) / (cfg.ref_loss * excess)
}

pub fn channel_gain(uav: Vec3, device: Vec3, cfg: &SimConfig) -> Result<f64> {
    let d = distance(uav, device);
    contract!(d > 0.0, "channel gain undefined at zero distance");
    let los = los_from_elevation(elevation_deg(uav, device), cfg);
    Ok(gain_at(d, los, cfg))
}

/// Uplink and downlink rates (bit/s) of one of `n` devices sharing the band equally.
pub fn rates(gain: f64, cfg: &SimConfig, n: usize) -> Result<(f64, f64)> {
    contract!(n >= 1, "rates need at least one device");
    contract!(gain >= 0.0 && gain.is_finite(), "channel gain {gain} must be finite and >= 0");
    let share = cfg.bandwidth / n as f64;
    let noise = cfg.bandwidth * cfg.noise_psd;
    let nf = n as f64;
    let up = share * (1.0 + nf * cfg.p_up * gain / noise).log2();
    let down = share * (1.0 + nf * cfg.p_down * gain / noise).log2();
    Ok((up, down))
}

/// Link state of one device for the current UAV position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub los: f64,
    pub gain: f64,
    pub uplink: f64,
    pub downlink: f64,
}

/// Environment-side link evaluation. Distances shorter than
/// `min_link_distance` are evaluated at that distance, and a device directly
/// below the UAV is at 90° elevation.
pub fn link(uav: Vec3, device: Vec3, cfg: &SimConfig, n: usize) -> Result<Link> {
    let d = distance(uav, device).max(cfg.min_link_distance);
    let dx = uav[0] - device[0];
    let dy = uav[1] - device[1];
    let elevation = if dx == 0.0 && dy == 0.0 {
        90.0
    } else {
        elevation_deg(uav, device)
    };
    let los = los_from_elevation(elevation, cfg);
    let gain = gain_at(d, los, cfg);
    let (uplink, downlink) = rates(gain, cfg, n)?;
    Ok(Link {
        los,
        gain,
        uplink,
        downlink,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn los_at_k1_degrees() {
        let cfg = SimConfig::default();
        let p = los_from_elevation(cfg.los_k1, &cfg);
        assert!((p - 1.0 / 12.95).abs() < 1e-15);
        assert!((p - 0.077220).abs() < 1e-6);
    }

    #[test]
    fn los_overhead() {
        let cfg = SimConfig::default();
        let p = los_probability([10.0, 10.0, 30.0], [10.0, 10.0, 0.0], &cfg).unwrap();
        // 1 / (1 + 11.95·exp(−0.14·78.05)), evaluated with mpmath at 50 digits.
        assert!((p - 0.999_785_346_057_983_6).abs() < 1e-14, "{p}");
    }

    #[test]
    fn los_monotone_in_elevation() {
        let cfg = SimConfig::default();
        let mut prev = 0.0;
        for k in 0..=900 {
            let p = los_from_elevation(k as f64 * 0.1, &cfg);
            assert!(p > prev && p < 1.0);
            prev = p;
        }
    }

    #[test]
    fn co_located_is_contract_error() {
        let cfg = SimConfig::default();
        assert!(los_probability([1.0, 2.0, 0.0], [1.0, 2.0, 0.0], &cfg).is_err());
        assert!(channel_gain([1.0, 2.0, 0.0], [1.0, 2.0, 0.0], &cfg).is_err());
    }

    #[test]
    fn gain_power_law_and_los_boundary() {
        let cfg = SimConfig::default();
        let h1 = gain_at(40.0, 0.6, &cfg);
        let h2 = gain_at(80.0, 0.6, &cfg);
        assert!((h1 / h2 - 4.0).abs() < 1e-12);
        let h = gain_at(1.0, 1.0, &cfg);
        assert!((1.0 / h - cfg.ref_loss * cfg.chi_los).abs() < 1e-9);
    }

    #[test]
    fn rate_unit_snr_gives_share() {
        let cfg = SimConfig::default();
        let n = 4;
        let h = cfg.bandwidth * cfg.noise_psd / (n as f64 * cfg.p_up);
        let (up, _) = rates(h, &cfg, n).unwrap();
        assert!((up - cfg.bandwidth / n as f64).abs() < 1e-6);
        let (up0, down0) = rates(1e-300, &cfg, n).unwrap();
        assert!(up0 < 1e-200 && down0 < 1e-200);
        assert!(rates(1.0, &cfg, 0).is_err());
    }

    #[test]
    fn link_floor_and_overhead() {
        let cfg = SimConfig::default();
        let l = link([5.0, 5.0, 0.0], [5.0, 5.0, 0.0], &cfg, 1).unwrap();
        assert!(l.gain.is_finite() && l.uplink > 0.0);
        let expect = gain_at(cfg.min_link_distance, los_from_elevation(90.0, &cfg), &cfg);
        assert_eq!(l.gain, expect);
    }
}

use std::ops::Range;

use super::projection::{velocity_features, LambdaCpu};
use crate::env::channel::Link;
use crate::env::{SimConfig, Solution, Trajectory};
use crate::error::{contract, Result};

/// Actor outputs before projection onto the feasible set: the three tanh
/// trajectory outputs, the nonnegative CPU weights and the offload
/// fractions in [0, 1]. Inactive slots hold zero.
#[derive(Clone, Debug, PartialEq)]
pub struct RawOutputs {
    pub trajectory: [f64; 3],
    pub cpu_weight: Vec<f64>,
    pub offload_fraction: Vec<f64>,
}

impl RawOutputs {
    pub fn zeros(n_max: usize) -> Self {
        Self {
            trajectory: [0.0; 3],
            cpu_weight: vec![0.0; n_max],
            offload_fraction: vec![0.0; n_max],
        }
    }
}

/// Messages exchanged in one slot. `uplink[j]` is m_j, `downlink[j]` is the
/// w_j multicast back to device j and `uav_internal` is w_0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MessageSet {
    pub uplink: Vec<Option<Vec<f64>>>,
    pub downlink: Vec<Option<Vec<f64>>>,
    pub uav_internal: Option<Vec<f64>>,
}

impl MessageSet {
    pub fn none(n_max: usize) -> Self {
        Self {
            uplink: vec![None; n_max],
            downlink: vec![None; n_max],
            uav_internal: None,
        }
    }

    /// Floats sent device-to-UAV in this slot.
    pub fn uplink_floats(&self) -> usize {
        self.uplink.iter().flatten().map(Vec::len).sum()
    }

    /// Floats multicast UAV-to-devices in this slot.
    pub fn downlink_floats(&self) -> usize {
        self.downlink.iter().flatten().map(Vec::len).sum()
    }
}

/// Everything one slot of inference produces.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionBundle {
    pub trajectory: Trajectory,
    pub cpu_hz: Vec<f64>,
    pub offload: Vec<f64>,
    /// The offload bound each device applied.
    pub lambda_max: Vec<f64>,
    /// Links the devices measured after the trajectory was fixed.
    pub links: Vec<Option<Link>>,
    pub lambda_cpu: LambdaCpu,
    pub raw: RawOutputs,
    pub messages: MessageSet,
}

impl ActionBundle {
    pub fn n_max(&self) -> usize {
        self.cpu_hz.len()
    }

    pub fn solution(&self) -> Solution {
        Solution {
            trajectory: self.trajectory,
            cpu_hz: self.cpu_hz.clone(),
            offload: self.offload.clone(),
        }
    }
}

/// Fixed-width critic encoding of an action:
/// `[v·u/v_max (unit heading u, 3), f/f_max (n_max), λ (n_max), m (n_max·M), w (n_max·E)]`.
/// Schemes without messages, or critics configured to ignore them, use
/// zero-width message segments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActionLayout {
    pub n_max: usize,
    pub message_len: usize,
    pub feature_len: usize,
}

impl ActionLayout {
    pub fn solution_only(n_max: usize) -> Self {
        Self {
            n_max,
            message_len: 0,
            feature_len: 0,
        }
    }

    pub fn width(&self) -> usize {
        3 + 2 * self.n_max + self.n_max * (self.message_len + self.feature_len)
    }

    pub fn cpu_index(&self, j: usize) -> usize {
        3 + j
    }

    pub fn offload_index(&self, j: usize) -> usize {
        3 + self.n_max + j
    }

    pub fn uplink_range(&self, j: usize) -> Range<usize> {
        let s = 3 + 2 * self.n_max + j * self.message_len;
        s..s + self.message_len
    }

    pub fn downlink_range(&self, j: usize) -> Range<usize> {
        let s = 3 + self.n_max * (2 + self.message_len) + j * self.feature_len;
        s..s + self.feature_len
    }

    pub fn encode(&self, a: &ActionBundle, cfg: &SimConfig) -> Result<Vec<f64>> {
        contract!(
            a.n_max() == self.n_max,
            "bundle has {} slots, layout {}",
            a.n_max(),
            self.n_max
        );
        let mut v = vec![0.0; self.width()];
        v[..3].copy_from_slice(&velocity_features(&a.trajectory, cfg.v_max));
        for j in 0..self.n_max {
            v[self.cpu_index(j)] = a.cpu_hz[j] / cfg.f_max;
            v[self.offload_index(j)] = a.offload[j];
            if self.message_len > 0 {
                if let Some(m) = &a.messages.uplink[j] {
                    contract!(m.len() == self.message_len, "uplink message {j} has length {}", m.len());
                    v[self.uplink_range(j)].copy_from_slice(m);
                }
            }
            if self.feature_len > 0 {
                if let Some(w) = &a.messages.downlink[j] {
                    contract!(w.len() == self.feature_len, "downlink message {j} has length {}", w.len());
                    v[self.downlink_range(j)].copy_from_slice(w);
                }
            }
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_tile_the_vector() {
        let l = ActionLayout {
            n_max: 3,
            message_len: 2,
            feature_len: 4,
        };
        let mut covered = vec![0; l.width()];
        for i in 0..3 {
            covered[i] += 1;
        }
        for j in 0..3 {
            covered[l.cpu_index(j)] += 1;
            covered[l.offload_index(j)] += 1;
            for i in l.uplink_range(j).chain(l.downlink_range(j)) {
                covered[i] += 1;
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
        assert_eq!(ActionLayout::solution_only(3).width(), 9);
    }
}

//! Four-phase cooperative inference with agent-local state.
//!
//! 1. every device sends `m_j = μ_I(o_j)`;
//! 2. the UAV extracts features, aggregates them and multicasts `{w_j}`;
//! 3. the UAV picks its trajectory and CPU allocation from `w`;
//! 4. each device rebuilds its CPU share from the multicast payload with its
//!    copy of γ_F, sounds its channel and picks its offload ratio.

use super::bundle::{ActionBundle, MessageSet, RawOutputs};
use super::cooperative::{trajectory_input, CooperativeActors};
use super::projection::{cpu_from_weights, trajectory_from_raw, LambdaCpu};
use crate::env::channel::Link;
use crate::env::energy::lambda_max;
use crate::env::{DeviceView, Observations, SimConfig, Trajectory};
use crate::error::{contract, Error, Result};
use crate::numkit::{sigmoid, DenseNet};

/// What a device holds: the shared message and offload actors and a replica
/// of the UAV's CPU head.
#[derive(Clone, Copy, Debug)]
pub struct IdAgent<'a> {
    message: &'a DenseNet,
    cpu_replica: &'a DenseNet,
    offload: &'a DenseNet,
}

/// Offload decision of one device.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdDecision {
    pub cpu_hz: f64,
    pub lambda_max: f64,
    pub fraction: f64,
    pub offload: f64,
}

impl<'a> IdAgent<'a> {
    pub fn new(actors: &'a CooperativeActors) -> Self {
        Self {
            message: &actors.message,
            cpu_replica: &actors.cpu,
            offload: &actors.offload,
        }
    }

    /// Phase 1.
    pub fn uplink(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.message.infer(obs)
    }

    /// CPU weights of every device in the multicast payload, as the UAV
    /// computed them.
    pub fn replica_weights(&self, payload: &[Vec<f64>]) -> Result<Vec<f64>> {
        payload.iter().map(|w| Ok(self.cpu_replica.infer(w)?[0])).collect()
    }

    /// Phase 4 given the CPU share already recovered from the payload.
    pub fn decide(
        &self,
        own_w: &[f64],
        cpu_hz: f64,
        obs: &[f64],
        link: &Link,
        cfg: &SimConfig,
    ) -> Result<IdDecision> {
        let bits = DeviceView::from_features(obs, cfg).task_bits;
        let bound = lambda_max(bits, link.uplink, link.downlink, cpu_hz, cfg);
        let fraction = sigmoid(self.offload.infer(own_w)?[0]);
        Ok(IdDecision {
            cpu_hz,
            lambda_max: bound,
            fraction,
            offload: bound * fraction.clamp(0.0, 1.0),
        })
    }
}

/// What the UAV holds: feature extractors, aggregator, trajectory and CPU heads.
#[derive(Clone, Copy, Debug)]
pub struct UavAgent<'a> {
    actors: &'a CooperativeActors,
}

impl<'a> UavAgent<'a> {
    pub fn new(actors: &'a CooperativeActors) -> Self {
        Self { actors }
    }

    /// Phase 2: `[w_0, w_1, ...]` from the UAV observation and the received
    /// uplink messages in slot order.
    pub fn downlink(&self, obs: &[f64], uplink: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let a = self.actors;
        for m in uplink {
            contract!(
                m.len() == a.arch.message_len,
                "uplink message has length {}, expected {}",
                m.len(),
                a.arch.message_len
            );
        }
        let mut features = Vec::with_capacity(uplink.len() + 1);
        features.push(a.uav_feature.infer(obs)?);
        for m in uplink {
            features.push(a.id_feature.infer(m)?);
        }
        a.aggregate(&features)
    }

    /// Phase 3: tanh trajectory outputs and one CPU weight per device.
    pub fn solve(&self, w: &[Vec<f64>]) -> Result<([f64; 3], Vec<f64>)> {
        let a = self.actors;
        let y = a.trajectory.infer(&trajectory_input(w))?;
        let weights = w[1..]
            .iter()
            .map(|wj| Ok(a.cpu.infer(wj)?[0]))
            .collect::<Result<Vec<_>>>()?;
        Ok(([y[0], y[1], y[2]], weights))
    }
}

/// Runs one slot of the protocol. `sound` returns each slot's link once the
/// trajectory is known; a device only reads its own entry.
pub fn cooperative_inference<F>(
    actors: &CooperativeActors,
    obs: &Observations,
    sound: F,
    cfg: &SimConfig,
) -> Result<ActionBundle>
where
    F: FnOnce(&Trajectory) -> Result<Vec<Option<Link>>>,
{
    let n_max = obs.devices.len();
    let active: Vec<usize> = (0..n_max).filter(|&j| obs.devices[j].is_some()).collect();
    contract!(!active.is_empty(), "cooperative inference needs an active device");
    let id = IdAgent::new(actors);
    let uav = UavAgent::new(actors);

    let uplink = active
        .iter()
        .map(|&j| id.uplink(obs.devices[j].as_ref().expect("active")))
        .collect::<Result<Vec<_>>>()?;

    let w = uav.downlink(&obs.uav, &uplink)?;

    let (y, weights) = uav.solve(&w)?;
    let trajectory = trajectory_from_raw(y, cfg);
    let mask = obs.mask();
    let mut raw = RawOutputs::zeros(n_max);
    raw.trajectory = y;
    for (i, &j) in active.iter().enumerate() {
        raw.cpu_weight[j] = weights[i];
    }
    let (cpu, _) = cpu_from_weights(&raw.cpu_weight, &mask, cfg.f_max);

    let links = sound(&trajectory)?;
    contract!(links.len() == n_max, "channel sounding returned {} slots", links.len());
    let mut offload = vec![0.0; n_max];
    let mut bound = vec![0.0; n_max];
    let mut messages = MessageSet::none(n_max);
    for (i, &j) in active.iter().enumerate() {
        let link = links[j].ok_or_else(|| Error::Contract(format!("no link for active device {j}")))?;
        let d = id.decide(&w[i + 1], cpu[j], obs.devices[j].as_ref().expect("active"), &link, cfg)?;
        raw.offload_fraction[j] = d.fraction;
        bound[j] = d.lambda_max;
        offload[j] = d.offload;
        messages.uplink[j] = Some(uplink[i].clone());
        messages.downlink[j] = Some(w[i + 1].clone());
    }
    messages.uav_internal = Some(w[0].clone());
    Ok(ActionBundle {
        trajectory,
        cpu_hz: cpu,
        offload,
        lambda_max: bound,
        links,
        lambda_cpu: LambdaCpu::Own,
        raw,
        messages,
    })
}

fn mismatch(what: String) -> Error {
    Error::Contract(format!("locality audit failed: {what}"))
}

/// Recomputes every agent's outputs from its own observation, the messages
/// it received and its own parameters, and checks that they reproduce
/// `bundle` exactly.
pub fn audit_locality(
    actors: &CooperativeActors,
    obs: &Observations,
    bundle: &ActionBundle,
    cfg: &SimConfig,
) -> Result<()> {
    let n_max = obs.devices.len();
    let active: Vec<usize> = (0..n_max).filter(|&j| obs.devices[j].is_some()).collect();
    let id = IdAgent::new(actors);
    let uav = UavAgent::new(actors);
    let received_up: Vec<Vec<f64>> = active
        .iter()
        .map(|&j| bundle.messages.uplink[j].clone().ok_or_else(|| mismatch(format!("no uplink from {j}"))))
        .collect::<Result<_>>()?;
    let payload: Vec<Vec<f64>> = active
        .iter()
        .map(|&j| bundle.messages.downlink[j].clone().ok_or_else(|| mismatch(format!("no downlink for {j}"))))
        .collect::<Result<_>>()?;

    for (i, &j) in active.iter().enumerate() {
        let o = obs.devices[j].as_ref().expect("active");
        if id.uplink(o)? != received_up[i] {
            return Err(mismatch(format!("uplink message of device {j}")));
        }
    }

    let w = uav.downlink(&obs.uav, &received_up)?;
    if w[1..] != payload[..] || bundle.messages.uav_internal.as_ref() != Some(&w[0]) {
        return Err(mismatch("downlink payload".into()));
    }
    let (y, weights) = uav.solve(&w)?;
    if trajectory_from_raw(y, cfg) != bundle.trajectory {
        return Err(mismatch("trajectory".into()));
    }

    let mask = obs.mask();
    for (i, &j) in active.iter().enumerate() {
        let replica = id.replica_weights(&payload)?;
        if replica != weights {
            return Err(mismatch(format!("CPU replica of device {j}")));
        }
        let mut padded = vec![0.0; n_max];
        for (k, &slot) in active.iter().enumerate() {
            padded[slot] = replica[k];
        }
        let (cpu, _) = cpu_from_weights(&padded, &mask, cfg.f_max);
        if cpu[j] != bundle.cpu_hz[j] {
            return Err(mismatch(format!("CPU share of device {j}")));
        }
        let link = bundle.links[j].ok_or_else(|| mismatch(format!("no link for {j}")))?;
        let d = id.decide(&payload[i], cpu[j], obs.devices[j].as_ref().expect("active"), &link, cfg)?;
        if d.offload != bundle.offload[j] || d.lambda_max != bundle.lambda_max[j] {
            return Err(mismatch(format!("offload ratio of device {j}")));
        }
    }
    Ok(())
}

//! Actor and critic networks, the graph-attention aggregator and the
//! four-phase cooperative inference protocol.
//!
//! Every scheme produces an [`ActionBundle`]. Its feasible part is what the
//! environment executes; its raw part is what exploration noise perturbs.

mod arch;
mod bundle;
mod checkpoint;
mod cooperative;
mod critic;
pub mod gat;
mod inference;
mod projection;

pub use arch::{ActorArch, Scheme};
pub use bundle::{ActionBundle, ActionLayout, MessageSet, RawOutputs};
pub use checkpoint::{load_params, save_params, Checkpoint};
pub use cooperative::{Aggregator, CoopTrace, CooperativeActors};
pub(crate) use cooperative::set_output_bias;
pub use critic::Critic;
pub use inference::{audit_locality, cooperative_inference, IdAgent, UavAgent};
pub use projection::{
    cpu_from_weights, trajectory_from_raw, velocity_features, HeadTrace, LambdaCpu, SolutionHead, AZIMUTH_MAX,
};

use crate::env::channel::Link;
use crate::env::SimConfig;
use crate::error::Result;
use crate::numkit::{DenseNet, ParamSet};

/// Anything that maps a padded state to a feasible action.
pub trait Policy {
    fn act(&self, state: &[f64], mask: &[bool], cfg: &SimConfig) -> Result<ActionBundle>;
}

/// A trainable actor: traced forward pass and backpropagation of a critic
/// gradient into every network it owns.
pub trait ActorSystem: Policy + Clone {
    type Trace;

    fn layout(&self, n_max: usize) -> ActionLayout;

    /// Forward pass that records what [`ActorSystem::backward`] needs. Rates
    /// used for the offload bound are probed from `state` unless given.
    fn act_traced(
        &self,
        state: &[f64],
        mask: &[bool],
        rates: Option<&[Option<Link>]>,
        cfg: &SimConfig,
    ) -> Result<(ActionBundle, Self::Trace)>;

    /// Accumulates `∂(a · d_action)/∂θ` into `grads`, one entry per network
    /// in [`ActorSystem::nets`] order. Rates are held constant.
    fn backward(&self, trace: &Self::Trace, d_action: &[f64], grads: &mut [ParamSet]) -> Result<()>;

    fn nets(&self) -> Vec<&DenseNet>;

    fn nets_mut(&mut self) -> Vec<&mut DenseNet>;

    fn net_names(&self) -> Vec<&'static str>;

    fn param_count(&self) -> usize {
        self.nets().iter().map(|n| n.param_count()).sum()
    }

    fn zero_grads(&self) -> Vec<ParamSet> {
        self.nets().iter().map(|n| n.zero_grads()).collect()
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::ActorArch;
    use crate::env::{build_observations, EnvState, SimConfig, SimParams};
    use crate::numkit::Rng;

    pub fn tiny_arch() -> ActorArch {
        ActorArch {
            message_len: 3,
            feature_len: 4,
            message_hidden: vec![5],
            uav_feature_hidden: vec![5],
            id_feature_hidden: vec![5],
            trajectory_hidden: vec![6],
            super_hidden: vec![6],
            cpu_hidden: vec![5],
            offload_hidden: vec![5],
            critic_hidden: vec![8, 6],
            ..ActorArch::default()
        }
    }

    pub fn small_sim(n_max: usize) -> SimConfig {
        SimParams {
            n_min: 1,
            n_max,
            task_bits_min: 1e6,
            task_bits_max: 1e7,
            ..Default::default()
        }
        .resolve()
        .unwrap()
    }

    /// A state after a few random slots so the history features are non-zero.
    pub fn random_state(cfg: &SimConfig, mask: &[bool], rng: &mut Rng) -> Vec<f64> {
        let mut env = EnvState::reset(cfg, mask, rng).unwrap();
        for d in env.devices.iter_mut().zip(mask).filter(|(_, &a)| a).map(|(d, _)| d) {
            d.prev_local_bits = rng.uniform(0.0, d.task_bits) / cfg.slots as f64;
            d.prev_offload_bits = rng.uniform(0.0, d.task_bits) / cfg.slots as f64;
            d.prev_uplink_rate = rng.uniform(0.0, cfg.bandwidth);
        }
        build_observations(&env, cfg).state_vector()
    }
}

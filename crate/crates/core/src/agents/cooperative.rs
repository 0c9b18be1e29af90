//! Actors of the cooperative schemes: shared device message actor, UAV
//! feature extractors and aggregator, UAV trajectory and CPU heads, and the
//! shared device offload actor.

use super::arch::ActorArch;
use super::bundle::{ActionBundle, ActionLayout, MessageSet, RawOutputs};
use super::gat::{self, AttentionTrace};
use super::inference::cooperative_inference;
use super::projection::{HeadTrace, LambdaCpu, SolutionHead};
use super::{ActorSystem, Policy};
use crate::baselines::{gs_aggregate, gs_aggregate_backward};
use crate::env::channel::Link;
use crate::env::{probe_links, Observations, SimConfig, StateView, ID_OBS_WIDTH, UAV_OBS_WIDTH};
use crate::error::{contract, Result};
use crate::numkit::{sigmoid, Activation, DenseNet, ParamSet, Rng, Tensor2, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregator {
    /// Single-iteration graph attention.
    Gat,
    /// Own feature concatenated with the sum of the others.
    GraphSage,
}

#[derive(Clone, Debug)]
pub struct CooperativeActors {
    pub(crate) aggregator: Aggregator,
    pub(crate) arch: ActorArch,
    /// μ_I: device observation → uplink message.
    pub(crate) message: DenseNet,
    /// ε_U: UAV observation → feature.
    pub(crate) uav_feature: DenseNet,
    /// ε_I: uplink message → feature.
    pub(crate) id_feature: DenseNet,
    /// ε_A, present for [`Aggregator::Gat`] only.
    pub(crate) scorer: Option<DenseNet>,
    /// γ_V: `[w_0; Σ_j w_j]` → three tanh outputs.
    pub(crate) trajectory: DenseNet,
    /// γ_F: `w_j` → nonnegative CPU weight.
    pub(crate) cpu: DenseNet,
    /// π_I: `w_j` → offload logit.
    pub(crate) offload: DenseNet,
}

impl CooperativeActors {
    pub fn new(aggregator: Aggregator, arch: &ActorArch, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let e = arch.feature_len;
        let node = match aggregator {
            Aggregator::Gat => e,
            Aggregator::GraphSage => {
                contract!(e % 2 == 0, "GraphSage needs an even feature length, got {e}");
                e / 2
            }
        };
        let m = arch.message_len;
        let message = DenseNet::new(
            ID_OBS_WIDTH,
            &arch.stack(&arch.message_hidden, m, arch.message_activation),
            rng,
        )?;
        let uav_feature = DenseNet::new(
            UAV_OBS_WIDTH,
            &arch.stack(&arch.uav_feature_hidden, node, arch.message_activation),
            rng,
        )?;
        let id_feature = DenseNet::new(
            m,
            &arch.stack(&arch.id_feature_hidden, node, arch.message_activation),
            rng,
        )?;
        let scorer = match aggregator {
            Aggregator::Gat => Some(gat::new_scorer(e, arch.attention_width(), rng)?),
            Aggregator::GraphSage => None,
        };
        let trajectory = DenseNet::new(
            2 * e,
            &arch.stack(&arch.trajectory_hidden, 3, Activation::Tanh),
            rng,
        )?;
        let mut cpu = DenseNet::new(e, &arch.stack(&arch.cpu_hidden, 1, Activation::Relu), rng)?;
        set_output_bias(&mut cpu, arch.cpu_bias_init);
        let offload = DenseNet::new(
            e,
            &arch.stack(&arch.offload_hidden, 1, Activation::Identity),
            rng,
        )?;
        Ok(Self {
            aggregator,
            arch: arch.clone(),
            message,
            uav_feature,
            id_feature,
            scorer,
            trajectory,
            cpu,
            offload,
        })
    }

    pub fn aggregator(&self) -> Aggregator {
        self.aggregator
    }

    pub fn arch(&self) -> &ActorArch {
        &self.arch
    }

    /// Aggregated vectors `w_0, w_1, ...` for node features `e_0, e_1, ...`.
    pub fn aggregate(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match (&self.scorer, self.aggregator) {
            (Some(s), Aggregator::Gat) => {
                let z = gat::attention_scores(s, features)?;
                gat::gat_aggregate(features, &z)
            }
            _ => gs_aggregate(features),
        }
    }

    fn index_offset(&self) -> usize {
        if self.scorer.is_some() {
            4
        } else {
            3
        }
    }
}

/// Sets every bias of the last layer.
pub(crate) fn set_output_bias(net: &mut DenseNet, value: f64) {
    let last = net.params().len() - 1;
    net.params_mut().tensor_mut(last).fill(value);
}

/// Input of the trajectory head: `[w_0; Σ_{j≥1} w_j]`.
pub(crate) fn trajectory_input(w: &[Vec<f64>]) -> Vec<f64> {
    let e = w[0].len();
    let mut x = w[0].clone();
    x.resize(2 * e, 0.0);
    for wj in &w[1..] {
        for (xi, v) in x[e..].iter_mut().zip(wj) {
            *xi += v;
        }
    }
    x
}

#[derive(Clone, Debug)]
pub struct CoopTrace {
    active: Vec<usize>,
    message: Vec<Trace>,
    uav_feature: Trace,
    id_feature: Vec<Trace>,
    features: Vec<Vec<f64>>,
    attention: Option<(Tensor2, AttentionTrace)>,
    trajectory: Trace,
    cpu: Vec<Trace>,
    offload: Vec<Trace>,
    fraction: Vec<f64>,
    head: HeadTrace,
    layout: ActionLayout,
}

impl Policy for CooperativeActors {
    /// Runs the decentralized protocol with channel sounding taken from the
    /// padded state.
    fn act(&self, state: &[f64], mask: &[bool], cfg: &SimConfig) -> Result<ActionBundle> {
        let obs = Observations::from_state(state, mask)?;
        cooperative_inference(self, &obs, |traj| probe_links(state, mask, traj, cfg), cfg)
    }
}

impl ActorSystem for CooperativeActors {
    type Trace = CoopTrace;

    fn layout(&self, n_max: usize) -> ActionLayout {
        let (m, e) = if self.arch.critic_messages {
            (self.arch.message_len, self.arch.feature_len)
        } else {
            (0, 0)
        };
        ActionLayout {
            n_max,
            message_len: m,
            feature_len: e,
        }
    }

    fn act_traced(
        &self,
        state: &[f64],
        mask: &[bool],
        rates: Option<&[Option<Link>]>,
        cfg: &SimConfig,
    ) -> Result<(ActionBundle, CoopTrace)> {
        let view = StateView::new(state)?;
        contract!(
            view.slots() == mask.len(),
            "state has {} slots, mask {}",
            view.slots(),
            mask.len()
        );
        let n_max = mask.len();
        let active: Vec<usize> = (0..n_max).filter(|&j| mask[j]).collect();
        contract!(!active.is_empty(), "cooperative inference needs an active device");

        let mut messages = Vec::with_capacity(active.len());
        let mut message_tr = Vec::with_capacity(active.len());
        for &j in &active {
            let (m, t) = self.message.forward_traced(view.device_features(j))?;
            messages.push(m);
            message_tr.push(t);
        }
        let (e0, uav_feature_tr) = self.uav_feature.forward_traced(view.uav_features())?;
        let mut features = vec![e0];
        let mut id_feature_tr = Vec::with_capacity(active.len());
        for m in &messages {
            let (e, t) = self.id_feature.forward_traced(m)?;
            features.push(e);
            id_feature_tr.push(t);
        }
        let (w, attention) = match &self.scorer {
            Some(s) => {
                let (z, t) = gat::attention_traced(s, &features)?;
                (gat::gat_aggregate(&features, &z)?, Some((z, t)))
            }
            None => (gs_aggregate(&features)?, None),
        };

        let (y, trajectory_tr) = self.trajectory.forward_traced(&trajectory_input(&w))?;
        let mut raw = RawOutputs::zeros(n_max);
        raw.trajectory = [y[0], y[1], y[2]];
        let mut cpu_tr = Vec::with_capacity(active.len());
        let mut offload_tr = Vec::with_capacity(active.len());
        let mut fraction = vec![0.0; n_max];
        for (i, &j) in active.iter().enumerate() {
            let (f, t) = self.cpu.forward_traced(&w[i + 1])?;
            raw.cpu_weight[j] = f[0];
            cpu_tr.push(t);
            let (u, t) = self.offload.forward_traced(&w[i + 1])?;
            fraction[j] = sigmoid(u[0]);
            raw.offload_fraction[j] = fraction[j];
            offload_tr.push(t);
        }
        let (mut bundle, head) = SolutionHead::apply(&raw, state, mask, rates, LambdaCpu::Own, cfg)?;
        let mut set = MessageSet::none(n_max);
        for (i, &j) in active.iter().enumerate() {
            set.uplink[j] = Some(messages[i].clone());
            set.downlink[j] = Some(w[i + 1].clone());
        }
        set.uav_internal = Some(w[0].clone());
        bundle.messages = set;

        let trace = CoopTrace {
            active,
            message: message_tr,
            uav_feature: uav_feature_tr,
            id_feature: id_feature_tr,
            features,
            attention,
            trajectory: trajectory_tr,
            cpu: cpu_tr,
            offload: offload_tr,
            fraction,
            head,
            layout: self.layout(n_max),
        };
        Ok((bundle, trace))
    }

    fn backward(&self, tr: &CoopTrace, d_action: &[f64], grads: &mut [ParamSet]) -> Result<()> {
        let layout = tr.layout;
        contract!(
            d_action.len() == layout.width(),
            "action gradient has length {}, expected {}",
            d_action.len(),
            layout.width()
        );
        contract!(grads.len() == self.nets().len(), "gradient list does not match the actor nets");
        let e = self.arch.feature_len;
        let nodes = tr.features.len();
        let off = self.index_offset();
        let g_raw = SolutionHead::backward(&tr.head, d_action, &layout);

        let mut d_w = vec![vec![0.0; e]; nodes];
        if layout.feature_len > 0 {
            for (i, &j) in tr.active.iter().enumerate() {
                for (d, g) in d_w[i + 1].iter_mut().zip(&d_action[layout.downlink_range(j)]) {
                    *d += g;
                }
            }
        }
        let d_in = self
            .trajectory
            .backward_into(&tr.trajectory, &g_raw.trajectory, &mut grads[off])?;
        for (d, g) in d_w[0].iter_mut().zip(&d_in[..e]) {
            *d += g;
        }
        for dw in &mut d_w[1..] {
            for (d, g) in dw.iter_mut().zip(&d_in[e..]) {
                *d += g;
            }
        }
        for (i, &j) in tr.active.iter().enumerate() {
            let g = self
                .cpu
                .backward_into(&tr.cpu[i], &[g_raw.cpu_weight[j]], &mut grads[off + 1])?;
            let s = tr.fraction[j];
            let du = g_raw.offload_fraction[j] * s * (1.0 - s);
            let h = self.offload.backward_into(&tr.offload[i], &[du], &mut grads[off + 2])?;
            for ((d, a), b) in d_w[i + 1].iter_mut().zip(&g).zip(&h) {
                *d += a + b;
            }
        }

        let node_len = tr.features[0].len();
        let mut d_e = vec![vec![0.0; node_len]; nodes];
        match (&self.scorer, &tr.attention) {
            (Some(s), Some((z, at))) => {
                let d_z = gat::aggregate_backward(&tr.features, z, &d_w, &mut d_e);
                gat::attention_backward(s, &tr.features, z, at, &d_z, &mut grads[3], &mut d_e)?;
            }
            _ => gs_aggregate_backward(&d_w, &mut d_e),
        }
        self.uav_feature
            .backward_into(&tr.uav_feature, &d_e[0], &mut grads[1])?;
        for (i, &j) in tr.active.iter().enumerate() {
            let mut d_m = self
                .id_feature
                .backward_into(&tr.id_feature[i], &d_e[i + 1], &mut grads[2])?;
            if layout.message_len > 0 {
                for (d, g) in d_m.iter_mut().zip(&d_action[layout.uplink_range(j)]) {
                    *d += g;
                }
            }
            self.message.backward_into(&tr.message[i], &d_m, &mut grads[0])?;
        }
        Ok(())
    }

    fn nets(&self) -> Vec<&DenseNet> {
        let mut v = vec![&self.message, &self.uav_feature, &self.id_feature];
        v.extend(self.scorer.as_ref());
        v.extend([&self.trajectory, &self.cpu, &self.offload]);
        v
    }

    fn nets_mut(&mut self) -> Vec<&mut DenseNet> {
        let mut v = vec![&mut self.message, &mut self.uav_feature, &mut self.id_feature];
        v.extend(self.scorer.as_mut());
        v.extend([&mut self.trajectory, &mut self.cpu, &mut self.offload]);
        v
    }

    fn net_names(&self) -> Vec<&'static str> {
        let mut v = vec!["message", "uav_feature", "id_feature"];
        if self.scorer.is_some() {
            v.push("scorer");
        }
        v.extend(["trajectory", "cpu", "offload"]);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::fixtures::{random_state, small_sim, tiny_arch};
    use crate::agents::{audit_locality, Critic};
    use crate::gradcheck::{check_actor_through_critic, randomize_biases};
    use crate::numkit::Rng;

    #[test]
    fn protocol_matches_traced_path_bitwise() {
        let cfg = small_sim(5);
        let mut rng = Rng::new(11);
        for agg in [Aggregator::Gat, Aggregator::GraphSage] {
            let actors = CooperativeActors::new(agg, &tiny_arch(), &mut rng).unwrap();
            for _ in 0..20 {
                let mask = crate::env::sample_population(&cfg, &mut rng);
                let s = random_state(&cfg, &mask, &mut rng);
                let (traced, _) = actors.act_traced(&s, &mask, None, &cfg).unwrap();
                let decentralized = actors.act(&s, &mask, &cfg).unwrap();
                assert_eq!(traced, decentralized);
                let obs = Observations::from_state(&s, &mask).unwrap();
                audit_locality(&actors, &obs, &decentralized, &cfg).unwrap();
            }
        }
    }

    #[test]
    fn audit_catches_tampering() {
        let cfg = small_sim(3);
        let mut rng = Rng::new(12);
        let actors = CooperativeActors::new(Aggregator::Gat, &tiny_arch(), &mut rng).unwrap();
        let mask = vec![true, true, false];
        let s = random_state(&cfg, &mask, &mut rng);
        let obs = Observations::from_state(&s, &mask).unwrap();
        let mut b = actors.act(&s, &mask, &cfg).unwrap();
        b.messages.downlink[1].as_mut().unwrap()[0] += 1e-9;
        assert!(audit_locality(&actors, &obs, &b, &cfg).is_err());
    }

    #[test]
    fn payload_sizes_and_parameter_sharing() {
        let mut rng = Rng::new(13);
        let arch = tiny_arch();
        let actors = CooperativeActors::new(Aggregator::Gat, &arch, &mut rng).unwrap();
        let count = actors.param_count();
        for n in [1, 4, 9] {
            let cfg = small_sim(n);
            let mask = vec![true; n];
            let s = random_state(&cfg, &mask, &mut rng);
            let b = actors.act(&s, &mask, &cfg).unwrap();
            assert_eq!(b.messages.uplink_floats(), n * arch.message_len);
            assert_eq!(b.messages.downlink_floats(), n * arch.feature_len);
            assert!((b.cpu_hz.iter().sum::<f64>() - cfg.f_max).abs() <= 1e-6 * cfg.f_max);
            assert_eq!(actors.param_count(), count);
        }
    }

    #[test]
    fn identical_devices_get_equal_cpu() {
        let cfg = small_sim(4);
        let mut rng = Rng::new(14);
        let actors = CooperativeActors::new(Aggregator::Gat, &tiny_arch(), &mut rng).unwrap();
        let mask = vec![true; 4];
        let mut s = random_state(&cfg, &mask, &mut rng);
        let first: Vec<f64> = s[3..10].to_vec();
        for j in 1..4 {
            s[3 + 7 * j..10 + 7 * j].copy_from_slice(&first);
        }
        let b = actors.act(&s, &mask, &cfg).unwrap();
        for f in &b.cpu_hz {
            assert!((f - cfg.f_max / 4.0).abs() <= 1e-9 * cfg.f_max);
        }
    }

    #[test]
    fn end_to_end_gradient_matches_finite_differences() {
        let cfg = small_sim(4);
        let mut rng = Rng::new(15);
        let mask = vec![true, false, true, true];
        for agg in [Aggregator::Gat, Aggregator::GraphSage] {
            let arch = tiny_arch();
            let mut checked = 0;
            while checked < 3 {
                let mut actors = CooperativeActors::new(agg, &arch, &mut rng).unwrap();
                randomize_biases(actors.nets_mut(), 0.2, &mut rng);
                let layout = actors.layout(4);
                let critic = Critic::new(
                    crate::env::state_width(4),
                    layout.width(),
                    &arch.critic_hidden,
                    Activation::Tanh,
                    &mut rng,
                )
                .unwrap();
                let s = random_state(&cfg, &mask, &mut rng);
                let (b, _) = actors.act_traced(&s, &mask, None, &cfg).unwrap();
                // The equal-split fallback and a zero CPU weight are kinks.
                if !mask.iter().zip(&b.raw.cpu_weight).all(|(&a, &w)| !a || w > 0.0) {
                    continue;
                }
                let case = check_actor_through_critic(&actors, &critic, &s, &mask, &cfg).unwrap();
                assert!(case.rel_error < 1e-3, "{agg:?}: {}", case.rel_error);
                checked += 1;
            }
        }
    }

    #[test]
    fn masked_slots_get_no_gradient_from_their_action_entries() {
        let cfg = small_sim(3);
        let mut rng = Rng::new(16);
        let actors = CooperativeActors::new(Aggregator::Gat, &tiny_arch(), &mut rng).unwrap();
        let layout = actors.layout(3);
        let mask = vec![true, false, true];
        let s = random_state(&cfg, &mask, &mut rng);
        let (_, tr) = actors.act_traced(&s, &mask, None, &cfg).unwrap();
        let mut d = vec![0.0; layout.width()];
        d[layout.cpu_index(1)] = 1.0;
        d[layout.offload_index(1)] = 1.0;
        for i in layout.uplink_range(1).chain(layout.downlink_range(1)) {
            d[i] = 1.0;
        }
        let mut g = actors.zero_grads();
        actors.backward(&tr, &d, &mut g).unwrap();
        assert!(g.iter().all(|p| p.flatten().iter().all(|&x| x == 0.0)));
    }
}

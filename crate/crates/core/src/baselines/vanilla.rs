use crate::agents::{
    ActionBundle, ActionLayout, ActorArch, ActorSystem, HeadTrace, LambdaCpu, Policy, RawOutputs,
    SolutionHead,
};
use crate::env::channel::Link;
use crate::env::{SimConfig, StateView, ID_OBS_WIDTH, UAV_OBS_WIDTH};
use crate::error::{contract, Result};
use crate::numkit::{sigmoid, Activation, DenseNet, ParamSet, Rng, Trace};

/// MADDPG without message exchange. The UAV decides from its own
/// observation only, so its CPU head sees the same embedding in every slot
/// and the split is even; devices bound their offload assuming `f_max/N`.
#[derive(Clone, Debug)]
pub struct VanillaActors {
    trajectory: DenseNet,
    embed: DenseNet,
    cpu: DenseNet,
    offload: DenseNet,
}

#[derive(Clone, Debug)]
pub struct VanillaTrace {
    active: Vec<usize>,
    trajectory: Trace,
    embed: Trace,
    cpu: Trace,
    offload: Vec<Trace>,
    fraction: Vec<f64>,
    head: HeadTrace,
    layout: ActionLayout,
}

impl VanillaActors {
    pub fn new(arch: &ActorArch, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let e = arch.feature_len;
        let mut cpu = DenseNet::new(e, &arch.stack(&arch.cpu_hidden, 1, Activation::Relu), rng)?;
        crate::agents::set_output_bias(&mut cpu, arch.cpu_bias_init);
        Ok(Self {
            trajectory: DenseNet::new(
                UAV_OBS_WIDTH,
                &arch.stack(&arch.trajectory_hidden, 3, Activation::Tanh),
                rng,
            )?,
            embed: DenseNet::new(
                UAV_OBS_WIDTH,
                &arch.stack(&arch.uav_feature_hidden, e, arch.message_activation),
                rng,
            )?,
            cpu,
            offload: DenseNet::new(
                ID_OBS_WIDTH,
                &arch.stack(&arch.offload_hidden, 1, Activation::Identity),
                rng,
            )?,
        })
    }
}

impl Policy for VanillaActors {
    fn act(&self, state: &[f64], mask: &[bool], cfg: &SimConfig) -> Result<ActionBundle> {
        self.act_traced(state, mask, None, cfg).map(|(b, _)| b)
    }
}

impl ActorSystem for VanillaActors {
    type Trace = VanillaTrace;

    fn layout(&self, n_max: usize) -> ActionLayout {
        ActionLayout::solution_only(n_max)
    }

    fn act_traced(
        &self,
        state: &[f64],
        mask: &[bool],
        rates: Option<&[Option<Link>]>,
        cfg: &SimConfig,
    ) -> Result<(ActionBundle, VanillaTrace)> {
        let view = StateView::new(state)?;
        contract!(view.slots() == mask.len(), "state and mask disagree on slot count");
        let n_max = mask.len();
        let active: Vec<usize> = (0..n_max).filter(|&j| mask[j]).collect();
        let o0 = view.uav_features();
        let (y, trajectory) = self.trajectory.forward_traced(o0)?;
        let (emb, embed) = self.embed.forward_traced(o0)?;
        let (f, cpu) = self.cpu.forward_traced(&emb)?;
        let mut raw = RawOutputs::zeros(n_max);
        raw.trajectory = [y[0], y[1], y[2]];
        let mut offload = Vec::with_capacity(active.len());
        let mut fraction = vec![0.0; n_max];
        for &j in &active {
            raw.cpu_weight[j] = f[0];
            let (u, t) = self.offload.forward_traced(view.device_features(j))?;
            fraction[j] = sigmoid(u[0]);
            raw.offload_fraction[j] = fraction[j];
            offload.push(t);
        }
        let (bundle, head) =
            SolutionHead::apply(&raw, state, mask, rates, LambdaCpu::EqualShare, cfg)?;
        Ok((
            bundle,
            VanillaTrace {
                active,
                trajectory,
                embed,
                cpu,
                offload,
                fraction,
                head,
                layout: self.layout(n_max),
            },
        ))
    }

    fn backward(&self, tr: &VanillaTrace, d_action: &[f64], grads: &mut [ParamSet]) -> Result<()> {
        contract!(d_action.len() == tr.layout.width(), "action gradient width mismatch");
        contract!(grads.len() == 4, "gradient list does not match the actor nets");
        let g = SolutionHead::backward(&tr.head, d_action, &tr.layout);
        self.trajectory
            .backward_into(&tr.trajectory, &g.trajectory, &mut grads[0])?;
        let d_f: f64 = tr.active.iter().map(|&j| g.cpu_weight[j]).sum();
        let d_emb = self.cpu.backward_into(&tr.cpu, &[d_f], &mut grads[2])?;
        self.embed.backward_into(&tr.embed, &d_emb, &mut grads[1])?;
        for (i, &j) in tr.active.iter().enumerate() {
            let s = tr.fraction[j];
            let du = g.offload_fraction[j] * s * (1.0 - s);
            self.offload.backward_into(&tr.offload[i], &[du], &mut grads[3])?;
        }
        Ok(())
    }

    fn nets(&self) -> Vec<&DenseNet> {
        vec![&self.trajectory, &self.embed, &self.cpu, &self.offload]
    }

    fn nets_mut(&mut self) -> Vec<&mut DenseNet> {
        vec![&mut self.trajectory, &mut self.embed, &mut self.cpu, &mut self.offload]
    }

    fn net_names(&self) -> Vec<&'static str> {
        vec!["trajectory", "embed", "cpu", "offload"]
    }
}

use crate::agents::{
    ActionBundle, ActionLayout, ActorArch, ActorSystem, HeadTrace, LambdaCpu, Policy, RawOutputs,
    SolutionHead,
};
use crate::env::channel::Link;
use crate::env::{state_width, SimConfig};
use crate::error::{contract, Result};
use crate::numkit::{sigmoid, Activation, DenseNet, ParamSet, Rng, Trace};

/// One network from the full state to every solution action, for a fixed
/// device count. Outputs are `[y (3, tanh), f̃ (N, relu), u (N, logit)]`.
#[derive(Clone, Debug)]
pub struct SuperActor {
    n: usize,
    net: DenseNet,
}

#[derive(Clone, Debug)]
pub struct SuperTrace {
    trace: Trace,
    out: Vec<f64>,
    head: HeadTrace,
    layout: ActionLayout,
}

impl SuperActor {
    pub fn new(n: usize, arch: &ActorArch, rng: &mut Rng) -> Result<Self> {
        contract!(n >= 1, "super actor needs at least one device");
        arch.validate()?;
        let mut net = DenseNet::new(
            state_width(n),
            &arch.stack(&arch.super_hidden, 3 + 2 * n, Activation::Identity),
            rng,
        )?;
        let last = net.params().len() - 1;
        let bias = net.params_mut().tensor_mut(last).as_mut_slice();
        bias[3..3 + n].fill(arch.cpu_bias_init);
        Ok(Self { n, net })
    }

    pub fn devices(&self) -> usize {
        self.n
    }

    pub fn input_width(&self) -> usize {
        self.net.input_width()
    }

    fn check(&self, state: &[f64], mask: &[bool]) -> Result<()> {
        contract!(
            mask.len() == self.n && mask.iter().all(|&a| a) && state.len() == state_width(self.n),
            "super actor was built for exactly {} active devices",
            self.n
        );
        Ok(())
    }

    fn raw_from(&self, out: &[f64]) -> RawOutputs {
        let n = self.n;
        RawOutputs {
            trajectory: [out[0].tanh(), out[1].tanh(), out[2].tanh()],
            cpu_weight: out[3..3 + n].iter().map(|&x| x.max(0.0)).collect(),
            offload_fraction: out[3 + n..].iter().map(|&x| sigmoid(x)).collect(),
        }
    }
}

impl Policy for SuperActor {
    fn act(&self, state: &[f64], mask: &[bool], cfg: &SimConfig) -> Result<ActionBundle> {
        self.act_traced(state, mask, None, cfg).map(|(b, _)| b)
    }
}

impl ActorSystem for SuperActor {
    type Trace = SuperTrace;

    fn layout(&self, n_max: usize) -> ActionLayout {
        ActionLayout::solution_only(n_max)
    }

    fn act_traced(
        &self,
        state: &[f64],
        mask: &[bool],
        rates: Option<&[Option<Link>]>,
        cfg: &SimConfig,
    ) -> Result<(ActionBundle, SuperTrace)> {
        self.check(state, mask)?;
        let (out, trace) = self.net.forward_traced(state)?;
        let raw = self.raw_from(&out);
        let (bundle, head) = SolutionHead::apply(&raw, state, mask, rates, LambdaCpu::Own, cfg)?;
        Ok((
            bundle,
            SuperTrace {
                trace,
                out,
                head,
                layout: self.layout(self.n),
            },
        ))
    }

    fn backward(&self, tr: &SuperTrace, d_action: &[f64], grads: &mut [ParamSet]) -> Result<()> {
        contract!(d_action.len() == tr.layout.width(), "action gradient width mismatch");
        contract!(grads.len() == 1, "gradient list does not match the actor nets");
        let n = self.n;
        let g = SolutionHead::backward(&tr.head, d_action, &tr.layout);
        let out = &tr.out;
        let mut d = vec![0.0; 3 + 2 * n];
        for i in 0..3 {
            let y = out[i].tanh();
            d[i] = g.trajectory[i] * (1.0 - y * y);
        }
        for j in 0..n {
            d[3 + j] = if out[3 + j] > 0.0 { g.cpu_weight[j] } else { 0.0 };
            let s = sigmoid(out[3 + n + j]);
            d[3 + n + j] = g.offload_fraction[j] * s * (1.0 - s);
        }
        self.net.backward_into(&tr.trace, &d, &mut grads[0])?;
        Ok(())
    }

    fn nets(&self) -> Vec<&DenseNet> {
        vec![&self.net]
    }

    fn nets_mut(&mut self) -> Vec<&mut DenseNet> {
        vec![&mut self.net]
    }

    fn net_names(&self) -> Vec<&'static str> {
        vec!["super"]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::fixtures::{random_state, small_sim, tiny_arch};
    use crate::agents::Critic;
    use crate::error::Error;
    use crate::gradcheck::{check_actor_through_critic, randomize_biases};

    #[test]
    fn fixed_device_count() {
        let mut rng = Rng::new(31);
        let a = SuperActor::new(3, &tiny_arch(), &mut rng).unwrap();
        assert_eq!(a.input_width(), 3 + 7 * 3);
        let cfg = small_sim(3);
        let s = random_state(&cfg, &[true; 3], &mut rng);
        let b = a.act(&s, &[true; 3], &cfg).unwrap();
        assert!((b.cpu_hz.iter().sum::<f64>() - cfg.f_max).abs() <= 1e-6 * cfg.f_max);
        assert!(matches!(a.act(&s, &[true, false, true], &cfg), Err(Error::Contract(_))));
        let cfg4 = small_sim(4);
        let s4 = random_state(&cfg4, &[true; 4], &mut rng);
        assert!(matches!(a.act(&s4, &[true; 4], &cfg4), Err(Error::Contract(_))));
    }

    #[test]
    fn input_width_grows_linearly() {
        let mut rng = Rng::new(32);
        let w: Vec<usize> = (1..=4)
            .map(|n| SuperActor::new(n, &tiny_arch(), &mut rng).unwrap().input_width())
            .collect();
        assert!(w.windows(2).all(|p| p[1] - p[0] == 7));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = small_sim(3);
        let mut rng = Rng::new(33);
        let mut a = SuperActor::new(3, &tiny_arch(), &mut rng).unwrap();
        randomize_biases(a.nets_mut(), 0.2, &mut rng);
        let last = a.net.params().len() - 1;
        a.net.params_mut().tensor_mut(last).as_mut_slice()[3..6].fill(1.0);
        let c = Critic::new(24, 9, &[8], Activation::Tanh, &mut rng).unwrap();
        let s = random_state(&cfg, &[true; 3], &mut rng);
        let case = check_actor_through_critic(&a, &c, &s, &[true; 3], &cfg).unwrap();
        assert!(case.rel_error < 1e-3, "{}", case.rel_error);
    }
}

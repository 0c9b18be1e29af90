use crate::error::{contract, Result};
use crate::numkit::{Activation, DenseNet, ParamSet, Rng, Trace};

/// Centralized Q-network over the padded state and the encoded joint action.
#[derive(Clone, Debug)]
pub struct Critic {
    net: DenseNet,
    state_width: usize,
    action_width: usize,
}

impl Critic {
    pub fn new(
        state_width: usize,
        action_width: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let layers: Vec<(usize, Activation)> = hidden
            .iter()
            .map(|&w| (w, activation))
            .chain(std::iter::once((1, Activation::Identity)))
            .collect();
        Ok(Self {
            net: DenseNet::new(state_width + action_width, &layers, rng)?,
            state_width,
            action_width,
        })
    }

    pub fn from_net(net: DenseNet, state_width: usize) -> Result<Self> {
        contract!(
            net.input_width() > state_width && net.output_width() == 1,
            "critic net must map more than {state_width} inputs to one value"
        );
        let action_width = net.input_width() - state_width;
        Ok(Self {
            net,
            state_width,
            action_width,
        })
    }

    pub fn state_width(&self) -> usize {
        self.state_width
    }

    pub fn action_width(&self) -> usize {
        self.action_width
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    fn input(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        contract!(
            state.len() == self.state_width && action.len() == self.action_width,
            "critic expects state {} and action {}, got {} and {}",
            self.state_width,
            self.action_width,
            state.len(),
            action.len()
        );
        let mut x = Vec::with_capacity(state.len() + action.len());
        x.extend_from_slice(state);
        x.extend_from_slice(action);
        Ok(x)
    }

    pub fn value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.net.infer(&self.input(state, action)?)?[0])
    }

    pub fn forward_traced(&self, state: &[f64], action: &[f64]) -> Result<(f64, Trace)> {
        let (q, t) = self.net.forward_traced(&self.input(state, action)?)?;
        Ok((q[0], t))
    }

    /// Accumulates `dq·∂Q/∂φ` into `grads`.
    pub fn backward_into(&self, trace: &Trace, dq: f64, grads: &mut ParamSet) -> Result<()> {
        self.net.backward_into(trace, &[dq], grads).map(|_| ())
    }

    /// `dq·∂Q/∂a` without forming parameter gradients.
    pub fn action_gradient(&self, trace: &Trace, dq: f64) -> Result<Vec<f64>> {
        let mut g = self.net.input_gradient(trace, &[dq])?;
        Ok(g.split_off(self.state_width))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_and_determinism() {
        let mut rng = Rng::new(1);
        let c = Critic::new(10, 4, &[8, 8], Activation::Relu, &mut rng).unwrap();
        let s = vec![0.1; 10];
        let a = vec![0.2; 4];
        assert_eq!(c.value(&s, &a).unwrap(), c.value(&s, &a).unwrap());
        assert!(c.value(&s, &a[..3]).is_err());
        let (q, t) = c.forward_traced(&s, &a).unwrap();
        assert_eq!(q, c.value(&s, &a).unwrap());
        assert_eq!(c.action_gradient(&t, 1.0).unwrap().len(), 4);
    }

    #[test]
    fn default_hidden_layers() {
        let mut rng = Rng::new(2);
        let h = crate::agents::ActorArch::default().critic_hidden;
        let c = Critic::new(73, 10, &h, Activation::Relu, &mut rng).unwrap();
        let widths: Vec<usize> = c.net().layers().iter().map(|l| l.outputs).collect();
        assert_eq!(widths, vec![512, 256, 128, 64, 1]);
    }
}

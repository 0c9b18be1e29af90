use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use super::rng::Rng;
use super::tensor::Tensor2;
use crate::error::{contract, Error, Result};

/// Slope of the negative half of [`Activation::LeakyRelu`].
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    LeakyRelu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x` whose activation value is `y`.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

/// Intermediate values of one forward pass, needed by the backward pass.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    /// Input of every layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[f64] {
        &self.inputs[0]
    }
}

/// Fully connected feed-forward network. Parameters are stored as
/// `w{l}` (outputs × inputs) and `b{l}` (outputs × 1) per layer.
#[derive(Clone, Debug)]
pub struct DenseNet {
    layers: Vec<LayerShape>,
    params: ParamSet,
    cache: Option<Trace>,
}

impl DenseNet {
    /// Builds a network with Glorot-uniform weights and zero biases.
    ///
    /// `layers` lists `(width, activation)` for each layer after the input.
    pub fn new(input: usize, layers: &[(usize, Activation)], rng: &mut Rng) -> Result<Self> {
        contract!(input > 0, "network input width must be positive");
        contract!(!layers.is_empty(), "network needs at least one layer");
        let mut shapes = Vec::with_capacity(layers.len());
        let mut params = ParamSet::new();
        let mut fan_in = input;
        for (l, &(width, activation)) in layers.iter().enumerate() {
            contract!(width > 0, "layer {l} has zero width");
            let bound = (6.0 / (fan_in + width) as f64).sqrt();
            let mut w = Tensor2::zeros(width, fan_in);
            for x in w.as_mut_slice() {
                *x = rng.uniform(-bound, bound);
            }
            params.push(format!("w{l}"), w);
            params.push(format!("b{l}"), Tensor2::zeros(width, 1));
            shapes.push(LayerShape {
                inputs: fan_in,
                outputs: width,
                activation,
            });
            fan_in = width;
        }
        Ok(Self {
            layers: shapes,
            params,
            cache: None,
        })
    }

    /// Rebuilds a network from explicit shapes and parameters.
    pub fn from_parts(layers: Vec<LayerShape>, params: ParamSet) -> Result<Self> {
        contract!(!layers.is_empty(), "network needs at least one layer");
        contract!(
            params.len() == 2 * layers.len(),
            "expected {} parameter tensors, got {}",
            2 * layers.len(),
            params.len()
        );
        for (l, s) in layers.iter().enumerate() {
            if l > 0 {
                contract!(
                    layers[l - 1].outputs == s.inputs,
                    "layer {l} input {} does not chain with previous output {}",
                    s.inputs,
                    layers[l - 1].outputs
                );
            }
            contract!(
                params.tensor(2 * l).shape() == (s.outputs, s.inputs)
                    && params.tensor(2 * l + 1).shape() == (s.outputs, 1),
                "parameter shapes of layer {l} do not match {}x{}",
                s.outputs,
                s.inputs
            );
        }
        Ok(Self {
            layers,
            params,
            cache: None,
        })
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    pub fn zero_grads(&self) -> ParamSet {
        self.params.zeros_like()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        contract!(
            x.len() == self.input_width(),
            "network input has length {}, expected {}",
            x.len(),
            self.input_width()
        );
        Ok(())
    }

    /// Forward pass without recording intermediates.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        for (l, shape) in self.layers.iter().enumerate() {
            let w = self.params.tensor(2 * l);
            let b = self.params.tensor(2 * l + 1).as_slice();
            let mut next = vec![0.0; shape.outputs];
            w.matvec_into(&cur, &mut next);
            for (n, bi) in next.iter_mut().zip(b) {
                *n = shape.activation.apply(*n + bi);
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Forward pass returning the output and the trace for [`DenseNet::backward_into`].
    pub fn forward_traced(&self, x: &[f64]) -> Result<(Vec<f64>, Trace)> {
        self.check_input(x)?;
        let n = self.layers.len();
        let mut trace = Trace {
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            post: Vec::with_capacity(n),
        };
        let mut cur = x.to_vec();
        for (l, shape) in self.layers.iter().enumerate() {
            let w = self.params.tensor(2 * l);
            let b = self.params.tensor(2 * l + 1).as_slice();
            let mut pre = vec![0.0; shape.outputs];
            w.matvec_into(&cur, &mut pre);
            for (p, bi) in pre.iter_mut().zip(b) {
                *p += bi;
            }
            let post: Vec<f64> = pre.iter().map(|&p| shape.activation.apply(p)).collect();
            trace.inputs.push(cur);
            trace.pre.push(pre);
            cur = post.clone();
            trace.post.push(post);
        }
        Ok((cur, trace))
    }

    /// Accumulates `∂(output · upstream)/∂θ` into `grads` and returns the
    /// gradient with respect to the network input.
    pub fn backward_into(
        &self,
        trace: &Trace,
        upstream: &[f64],
        grads: &mut ParamSet,
    ) -> Result<Vec<f64>> {
        contract!(
            trace.pre.len() == self.layers.len(),
            "trace does not belong to this network"
        );
        contract!(
            upstream.len() == self.output_width(),
            "upstream gradient has length {}, expected {}",
            upstream.len(),
            self.output_width()
        );
        let mut g = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let shape = self.layers[l];
            let pre = &trace.pre[l];
            let post = &trace.post[l];
            for ((gi, &p), &y) in g.iter_mut().zip(pre).zip(post) {
                *gi *= shape.activation.derivative(p, y);
            }
            let input = &trace.inputs[l];
            grads.tensor_mut(2 * l).add_outer(&g, input, 1.0);
            for (bi, gi) in grads.tensor_mut(2 * l + 1).as_mut_slice().iter_mut().zip(&g) {
                *bi += gi;
            }
            let mut g_in = vec![0.0; shape.inputs];
            self.params.tensor(2 * l).matvec_t_acc(&g, &mut g_in);
            g = g_in;
        }
        Ok(g)
    }

    /// Input gradient only; parameter gradients are not formed.
    pub fn input_gradient(&self, trace: &Trace, upstream: &[f64]) -> Result<Vec<f64>> {
        contract!(
            trace.pre.len() == self.layers.len() && upstream.len() == self.output_width(),
            "trace or upstream gradient does not match this network"
        );
        let mut g = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let shape = self.layers[l];
            for ((gi, &p), &y) in g.iter_mut().zip(&trace.pre[l]).zip(&trace.post[l]) {
                *gi *= shape.activation.derivative(p, y);
            }
            let mut g_in = vec![0.0; shape.inputs];
            self.params.tensor(2 * l).matvec_t_acc(&g, &mut g_in);
            g = g_in;
        }
        Ok(g)
    }

    /// Stateful forward: the trace is kept for a later [`DenseNet::backward`].
    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let (y, trace) = self.forward_traced(x)?;
        self.cache = Some(trace);
        Ok(y)
    }

    /// Gradients of `output · upstream` for the most recent [`DenseNet::forward`].
    pub fn backward(&self, upstream: &[f64]) -> Result<(ParamSet, Vec<f64>)> {
        let trace = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        let mut grads = self.zero_grads();
        let g_in = self.backward_into(trace, upstream, &mut grads)?;
        Ok((grads, g_in))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_layer(w: Tensor2, act: Activation) -> DenseNet {
        let (o, i) = w.shape();
        let mut p = ParamSet::new();
        p.push("w0", w);
        p.push("b0", Tensor2::zeros(o, 1));
        DenseNet::from_parts(
            vec![LayerShape {
                inputs: i,
                outputs: o,
                activation: act,
            }],
            p,
        )
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input() {
        let net = single_layer(Tensor2::identity(3), Activation::Identity);
        assert_eq!(net.infer(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn relu_layer_clips_negatives() {
        let net = single_layer(Tensor2::identity(2), Activation::Relu);
        assert_eq!(net.infer(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn wrong_input_width_is_contract_error() {
        let net = single_layer(Tensor2::identity(2), Activation::Relu);
        assert!(matches!(net.infer(&[1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn backward_before_forward_is_state_error() {
        let net = single_layer(Tensor2::identity(2), Activation::Identity);
        assert!(matches!(net.backward(&[1.0, 1.0]), Err(Error::State(_))));
    }

    #[test]
    fn linear_layer_gradients() {
        let w = Tensor2::from_vec(2, 3, vec![0.5, -1.0, 2.0, 1.5, 0.25, -0.75]).unwrap();
        let mut net = single_layer(w.clone(), Activation::Identity);
        let x = [1.0, 2.0, -1.0];
        net.forward(&x).unwrap();
        let g = [0.3, -0.7];
        let (grads, gx) = net.backward(&g).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                assert!((grads.tensor(0).get(r, c) - g[r] * x[c]).abs() < 1e-15);
            }
            assert!((grads.tensor(1).get(r, 0) - g[r]).abs() < 1e-15);
        }
        for c in 0..3 {
            let expect = w.get(0, c) * g[0] + w.get(1, c) * g[1];
            assert!((gx[c] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = Rng::new(5);
        let mut net = DenseNet::new(
            4,
            &[(6, Activation::Tanh), (3, Activation::Sigmoid)],
            &mut rng,
        )
        .unwrap();
        net.forward(&[0.1, 0.2, -0.3, 0.4]).unwrap();
        let (grads, gx) = net.backward(&[0.0; 3]).unwrap();
        assert!(grads.flatten().iter().all(|&v| v == 0.0));
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn traced_and_plain_forward_agree_bitwise() {
        let mut rng = Rng::new(8);
        let net = DenseNet::new(
            5,
            &[(7, Activation::Relu), (4, Activation::LeakyRelu), (2, Activation::Tanh)],
            &mut rng,
        )
        .unwrap();
        let x = [0.3, -0.1, 0.9, 0.0, -2.0];
        let (a, _) = net.forward_traced(&x).unwrap();
        assert_eq!(a, net.infer(&x).unwrap());
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let mut rng = Rng::new(1);
        let net = DenseNet::new(10, &[(20, Activation::Relu)], &mut rng).unwrap();
        let bound = (6.0f64 / 30.0).sqrt();
        assert!(net.params().tensor(0).as_slice().iter().all(|w| w.abs() <= bound));
        assert!(net.params().tensor(1).as_slice().iter().all(|&b| b == 0.0));
        assert_eq!(net.param_count(), 10 * 20 + 20);
    }
}

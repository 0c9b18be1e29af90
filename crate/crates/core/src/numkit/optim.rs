use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Plain mini-batch gradient descent.
    #[default]
    Sgd,
    /// Adaptive moments (β₁ = 0.9, β₂ = 0.999, ε = 1e-8).
    Adam,
}

/// Descent optimizer over a group of parameter sets (one per network).
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: u32,
    first: Vec<ParamSet>,
    second: Vec<ParamSet>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Applies one descent step `θ ← θ − lr·update(g)` to every set in `params`.
    pub fn step(&mut self, params: &mut [&mut ParamSet], grads: &[ParamSet]) -> Result<()> {
        contract!(
            params.len() == grads.len(),
            "optimizer got {} parameter sets but {} gradients",
            params.len(),
            grads.len()
        );
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    p.sgd_step(g, self.lr)?;
                }
            }
            OptimizerKind::Adam => {
                if self.first.is_empty() {
                    self.first = grads.iter().map(ParamSet::zeros_like).collect();
                    self.second = self.first.clone();
                }
                contract!(
                    self.first.len() == grads.len(),
                    "optimizer state tracks {} sets, got {}",
                    self.first.len(),
                    grads.len()
                );
                self.step += 1;
                let t = self.step as i32;
                let c1 = 1.0 - BETA1.powi(t);
                let c2 = 1.0 - BETA2.powi(t);
                for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    p.check_compatible(g)?;
                    let m = &mut self.first[i];
                    let v = &mut self.second[i];
                    for k in 0..g.len() {
                        let gs = g.tensor(k).as_slice();
                        let ms = m.tensor_mut(k).as_mut_slice();
                        let vs = v.tensor_mut(k).as_mut_slice();
                        let ps = p.tensor_mut(k).as_mut_slice();
                        for j in 0..gs.len() {
                            ms[j] = BETA1 * ms[j] + (1.0 - BETA1) * gs[j];
                            vs[j] = BETA2 * vs[j] + (1.0 - BETA2) * gs[j] * gs[j];
                            let mh = ms[j] / c1;
                            let vh = vs[j] / c2;
                            ps[j] -= self.lr * mh / (vh.sqrt() + EPS);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

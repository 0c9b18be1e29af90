use super::tensor::{axpy, Tensor2};
use crate::error::{contract, Error, Result};

/// Ordered, named collection of parameter tensors.
///
/// Two sets built from the same architecture share names and shapes in the
/// same order; every binary operation below checks that before touching data.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor2>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor2) {
        self.names.push(name.into());
        self.tensors.push(tensor);
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor2::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor2] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor2] {
        &mut self.tensors
    }

    pub fn tensor(&self, i: usize) -> &Tensor2 {
        &self.tensors[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor2 {
        &mut self.tensors[i]
    }

    pub fn get(&self, name: &str) -> Option<&Tensor2> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor2)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor2::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor2::is_finite)
    }

    pub fn fill(&mut self, v: f64) {
        self.tensors.iter_mut().for_each(|t| t.fill(v));
    }

    pub fn check_compatible(&self, other: &ParamSet) -> Result<()> {
        contract!(
            self.tensors.len() == other.tensors.len(),
            "parameter sets have {} and {} tensors",
            self.tensors.len(),
            other.tensors.len()
        );
        for (i, (a, b)) in self.tensors.iter().zip(&other.tensors).enumerate() {
            if a.shape() != b.shape() || self.names[i] != other.names[i] {
                return Err(Error::Contract(format!(
                    "parameter `{}` {:?} does not match `{}` {:?}",
                    self.names[i],
                    a.shape(),
                    other.names[i],
                    b.shape()
                )));
            }
        }
        Ok(())
    }

    /// Descent step `p ← p − lr·g`.
    pub fn sgd_step(&mut self, grads: &ParamSet, lr: f64) -> Result<()> {
        self.check_compatible(grads)?;
        contract!(lr >= 0.0 && lr.is_finite(), "learning rate {lr} must be finite and >= 0");
        for (p, g) in self.tensors.iter_mut().zip(&grads.tensors) {
            axpy(-lr, g.as_slice(), p.as_mut_slice());
        }
        Ok(())
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &ParamSet, scale: f64) -> Result<()> {
        self.check_compatible(other)?;
        for (p, g) in self.tensors.iter_mut().zip(&other.tensors) {
            axpy(scale, g.as_slice(), p.as_mut_slice());
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.as_mut_slice().iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Concatenation of every tensor in order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for t in &self.tensors {
            out.extend_from_slice(t.as_slice());
        }
        out
    }

    /// Inverse of [`ParamSet::flatten`].
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        contract!(
            flat.len() == self.param_count(),
            "flat parameter vector has {} entries, expected {}",
            flat.len(),
            self.param_count()
        );
        let mut off = 0;
        for t in &mut self.tensors {
            let n = t.len();
            t.as_mut_slice().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Blend `online` into `self` (the target copy): `κ·online + (1−κ)·self`.
    pub fn soft_blend_from(&mut self, online: &ParamSet, kappa: f64) -> Result<()> {
        self.check_compatible(online)?;
        contract!(
            (0.0..=1.0).contains(&kappa),
            "soft update rate {kappa} outside [0, 1]"
        );
        let keep = 1.0 - kappa;
        for (t, o) in self.tensors.iter_mut().zip(&online.tensors) {
            for (x, y) in t.as_mut_slice().iter_mut().zip(o.as_slice()) {
                *x = kappa * y + keep * *x;
            }
        }
        Ok(())
    }
}

/// Functional form of the soft target update.
pub fn soft_blend(target: &ParamSet, online: &ParamSet, kappa: f64) -> Result<ParamSet> {
    let mut out = target.clone();
    out.soft_blend_from(online, kappa)?;
    Ok(out)
}

//! Small deterministic dense-network kernel.
//!
//! Everything is `f64`. Networks are tiny, so clarity and bit-for-bit
//! reproducibility win over throughput.

mod net;
mod optim;
mod params;
mod rng;
mod tensor;

pub use net::{sigmoid, Activation, DenseNet, LayerShape, Trace, LEAKY_SLOPE};
pub(crate) use tensor::dot;
pub use optim::{Optimizer, OptimizerKind};
pub use params::{soft_blend, ParamSet};
pub use rng::{gaussian, Rng};
pub use tensor::Tensor2;

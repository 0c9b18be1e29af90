//! Comparison schemes: a training-free centroid policy, GraphSage
//! aggregation, message-free MADDPG and a single super-actor DDPG.

mod gs;
mod naive;
mod saddpg;
mod vanilla;

pub use gs::{gs_aggregate, gs_aggregate_backward};
pub use naive::{naive_policy, NaivePolicy};
pub use saddpg::{SuperActor, SuperTrace};
pub use vanilla::{VanillaActors, VanillaTrace};

use serde::{Deserialize, Serialize};

use crate::agents::Scheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Naive,
    VanillaMaddpg,
    CMaddpgGs,
    Saddpg,
}

impl BaselineKind {
    pub fn scheme(self) -> Scheme {
        match self {
            BaselineKind::Naive => Scheme::Naive,
            BaselineKind::VanillaMaddpg => Scheme::Vanilla,
            BaselineKind::CMaddpgGs => Scheme::Gs,
            BaselineKind::Saddpg => Scheme::Saddpg,
        }
    }
}

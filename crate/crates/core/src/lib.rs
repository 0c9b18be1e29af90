//! Cooperative multi-agent DDPG for UAV-aided mobile edge computing.
//!
//! The crate is organised bottom-up:
//!
//! - [`numkit`]: dense networks, reverse-mode gradients, optimizers and a
//!   portable seeded RNG.
//! - [`env`]: the time-slotted UAV/IoT-device simulator (mobility, air-to-ground
//!   channel, energy and latency accounting, observations, reward).
//! - [`agents`]: message actors, the graph-attention aggregator at the UAV,
//!   constraint-respecting solution actors, the critic and the four-phase
//!   cooperative inference protocol.
//! - [`training`]: replay buffer, exploration noise and the centralized
//!   actor/critic updates.
//! - [`baselines`]: naive centroid policy, GraphSage aggregation, vanilla
//!   MADDPG and the single super-actor DDPG.
//! - [`harness`]: seeded experiment runner used by the `cmaddpg` binary.
//! - [`oracle`]: plain scalar re-implementation of the physical model used to
//!   cross-check the simulator.

pub mod agents;
pub mod baselines;
pub mod config;
pub mod env;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod numkit;
pub mod oracle;
pub mod training;

pub use error::{Error, Result};

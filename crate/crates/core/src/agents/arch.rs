use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::numkit::Activation;

/// Learning scheme. The first two share the cooperative actor layout and
/// differ only in how the UAV aggregates features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[serde(rename = "cmaddpg")]
    CMaddpg,
    Gs,
    Vanilla,
    Saddpg,
    Naive,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::CMaddpg,
        Scheme::Gs,
        Scheme::Vanilla,
        Scheme::Saddpg,
        Scheme::Naive,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::CMaddpg => "cmaddpg",
            Scheme::Gs => "gs",
            Scheme::Vanilla => "vanilla",
            Scheme::Saddpg => "saddpg",
            Scheme::Naive => "naive",
        }
    }

    pub fn is_trainable(self) -> bool {
        self != Scheme::Naive
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

/// Network sizes. Hidden lists give the widths between input and output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActorArch {
    /// Uplink message length M.
    pub message_len: usize,
    /// Feature length E, also the per-device downlink payload.
    pub feature_len: usize,
    pub message_hidden: Vec<usize>,
    pub uav_feature_hidden: Vec<usize>,
    pub id_feature_hidden: Vec<usize>,
    /// Hidden width of the pairwise scorer; defaults to E when absent.
    pub attention_hidden: Option<usize>,
    pub trajectory_hidden: Vec<usize>,
    pub cpu_hidden: Vec<usize>,
    pub offload_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Hidden widths of the SADDPG super actor.
    pub super_hidden: Vec<usize>,
    /// Initial output bias of the CPU-weight head; keeps the relu output
    /// alive at initialization.
    pub cpu_bias_init: f64,
    pub hidden_activation: Activation,
    pub message_activation: Activation,
    pub critic_activation: Activation,
    /// Whether the critic sees the message actions.
    pub critic_messages: bool,
}

impl Default for ActorArch {
    fn default() -> Self {
        Self {
            message_len: 8,
            feature_len: 16,
            message_hidden: vec![128, 128],
            uav_feature_hidden: vec![128, 128],
            id_feature_hidden: vec![128, 128],
            attention_hidden: None,
            trajectory_hidden: vec![128, 128, 128],
            cpu_hidden: vec![128, 128, 128],
            offload_hidden: vec![128, 128, 128],
            critic_hidden: vec![512, 256, 128, 64],
            super_hidden: vec![128, 128, 128],
            cpu_bias_init: 1.0,
            hidden_activation: Activation::Relu,
            message_activation: Activation::Relu,
            critic_activation: Activation::Relu,
            critic_messages: true,
        }
    }
}

impl ActorArch {
    pub fn validate(&self) -> Result<()> {
        contract!(
            self.message_len >= 1 && self.feature_len >= 1,
            "message and feature lengths must be at least 1"
        );
        contract!(
            self.attention_hidden != Some(0),
            "attention hidden width must be positive"
        );
        let all = [
            &self.message_hidden,
            &self.uav_feature_hidden,
            &self.id_feature_hidden,
            &self.trajectory_hidden,
            &self.cpu_hidden,
            &self.offload_hidden,
            &self.critic_hidden,
            &self.super_hidden,
        ];
        contract!(
            all.iter().all(|h| h.iter().all(|&w| w > 0)),
            "hidden widths must be positive"
        );
        Ok(())
    }

    pub fn attention_width(&self) -> usize {
        self.attention_hidden.unwrap_or(self.feature_len)
    }

    /// `(width, activation)` list for a net with the given hidden layers and
    /// output.
    pub(crate) fn stack(&self, hidden: &[usize], out: usize, out_act: Activation) -> Vec<(usize, Activation)> {
        hidden
            .iter()
            .map(|&w| (w, self.hidden_activation))
            .chain(std::iter::once((out, out_act)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_tags_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.tag().parse::<Scheme>().unwrap(), s);
        }
        assert!("maddpg".parse::<Scheme>().is_err());
    }

    #[test]
    fn defaults_validate() {
        let a = ActorArch::default();
        a.validate().unwrap();
        assert_eq!(a.critic_hidden, vec![512, 256, 128, 64]);
        assert_eq!(a.attention_width(), 16);
        let bad = ActorArch {
            feature_len: 0,
            ..a
        };
        assert!(bad.validate().is_err());
    }
}

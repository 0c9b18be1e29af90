use std::path::Path;

use serde_json::json;

use crate::agents::{
    ActionBundle, ActorArch, ActorSystem, Aggregator, Checkpoint, CooperativeActors, Policy, Scheme,
};
use crate::baselines::{NaivePolicy, SuperActor, VanillaActors};
use crate::env::SimConfig;
use crate::error::{contract, Error, Result};
use crate::numkit::Rng;

/// Any of the five schemes behind one policy interface.
#[derive(Clone, Debug)]
pub enum Model {
    Naive,
    Cooperative(CooperativeActors),
    Vanilla(VanillaActors),
    Super(SuperActor),
}

impl Model {
    /// Fresh untrained actors. SADDPG is sized for `sim.n_max` devices and
    /// needs a fixed population.
    pub fn init(scheme: Scheme, arch: &ActorArch, sim: &SimConfig, rng: &mut Rng) -> Result<Self> {
        Ok(match scheme {
            Scheme::Naive => Model::Naive,
            Scheme::CMaddpg => Model::Cooperative(CooperativeActors::new(Aggregator::Gat, arch, rng)?),
            Scheme::Gs => Model::Cooperative(CooperativeActors::new(Aggregator::GraphSage, arch, rng)?),
            Scheme::Vanilla => Model::Vanilla(VanillaActors::new(arch, rng)?),
            Scheme::Saddpg => {
                if sim.n_min != sim.n_max {
                    return Err(Error::Config(format!(
                        "saddpg trains at a fixed device count; got n_min={} n_max={}",
                        sim.n_min, sim.n_max
                    )));
                }
                Model::Super(SuperActor::new(sim.n_max, arch, rng)?)
            }
        })
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            Model::Naive => Scheme::Naive,
            Model::Cooperative(a) => match a.aggregator() {
                Aggregator::Gat => Scheme::CMaddpg,
                Aggregator::GraphSage => Scheme::Gs,
            },
            Model::Vanilla(_) => Scheme::Vanilla,
            Model::Super(_) => Scheme::Saddpg,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::Naive => 0,
            Model::Cooperative(a) => a.param_count(),
            Model::Vanilla(a) => a.param_count(),
            Model::Super(a) => a.param_count(),
        }
    }

    fn meta(&self, arch: &ActorArch) -> serde_json::Value {
        let devices = match self {
            Model::Super(a) => Some(a.devices()),
            _ => None,
        };
        json!({ "scheme": self.scheme().tag(), "arch": arch, "devices": devices })
    }

    /// `None` for the naive policy, which has nothing to store.
    pub fn checkpoint(&self, arch: &ActorArch) -> Option<Checkpoint> {
        fn of<A: ActorSystem>(a: &A, meta: serde_json::Value) -> Checkpoint {
            Checkpoint::from_nets(&a.net_names(), &a.nets(), meta)
        }
        let meta = self.meta(arch);
        match self {
            Model::Naive => None,
            Model::Cooperative(a) => Some(of(a, meta)),
            Model::Vanilla(a) => Some(of(a, meta)),
            Model::Super(a) => Some(of(a, meta)),
        }
    }

    /// Loads a checkpoint written by [`Model::checkpoint`]. The stored scheme
    /// and architecture must match the requested ones.
    pub fn load(base: &Path, scheme: Scheme, arch: &ActorArch) -> Result<Self> {
        if scheme == Scheme::Naive {
            return Ok(Model::Naive);
        }
        let ck = Checkpoint::load(base)?;
        let stored = ck.meta.get("scheme").and_then(|s| s.as_str()).unwrap_or("");
        contract!(
            stored == scheme.tag(),
            "checkpoint {} holds a {stored} model, expected {}",
            base.display(),
            scheme.tag()
        );
        let stored_arch: ActorArch = ck
            .meta
            .get("arch")
            .cloned()
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| Error::Contract(format!("checkpoint architecture unreadable: {e}")))?
            .ok_or_else(|| Error::Contract("checkpoint has no architecture".into()))?;
        contract!(
            &stored_arch == arch,
            "checkpoint {} was trained with a different architecture",
            base.display()
        );
        // Parameters are overwritten below, so the init stream is irrelevant.
        let mut rng = Rng::new(0);
        let mut model = match scheme {
            Scheme::Saddpg => {
                let n = ck.meta.get("devices").and_then(|d| d.as_u64()).unwrap_or(0) as usize;
                Model::Super(SuperActor::new(n, arch, &mut rng)?)
            }
            Scheme::CMaddpg => Model::Cooperative(CooperativeActors::new(Aggregator::Gat, arch, &mut rng)?),
            Scheme::Gs => Model::Cooperative(CooperativeActors::new(Aggregator::GraphSage, arch, &mut rng)?),
            Scheme::Vanilla => Model::Vanilla(VanillaActors::new(arch, &mut rng)?),
            Scheme::Naive => unreachable!(),
        };
        fn restore<A: ActorSystem>(ck: &Checkpoint, a: &mut A) -> Result<()> {
            let names = a.net_names();
            ck.restore(&names, a.nets_mut())
        }
        match &mut model {
            Model::Cooperative(a) => restore(&ck, a)?,
            Model::Vanilla(a) => restore(&ck, a)?,
            Model::Super(a) => restore(&ck, a)?,
            Model::Naive => {}
        }
        Ok(model)
    }
}

impl Policy for Model {
    fn act(&self, state: &[f64], mask: &[bool], cfg: &SimConfig) -> Result<ActionBundle> {
        match self {
            Model::Naive => NaivePolicy.act(state, mask, cfg),
            Model::Cooperative(a) => a.act(state, mask, cfg),
            Model::Vanilla(a) => a.act(state, mask, cfg),
            Model::Super(a) => a.act(state, mask, cfg),
        }
    }
}

use super::buffer::Transition;
use crate::agents::{ActorSystem, Critic};
use crate::env::SimConfig;
use crate::error::{Error, Result};
use crate::numkit::{Optimizer, ParamSet};

fn finite(sets: &[ParamSet]) -> bool {
    sets.iter().all(ParamSet::is_finite)
}

/// One regression step of the critic towards `y = r + γ·Q'(s', A'(s'))`.
/// Returns the mean squared error before the step.
pub fn critic_update<A: ActorSystem>(
    critic: &mut Critic,
    critic_target: &Critic,
    actor_target: &A,
    optimizer: &mut Optimizer,
    batch: &[&Transition],
    discount: f64,
    sim: &SimConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::State("critic update on an empty batch".into()));
    }
    let layout = actor_target.layout(batch[0].mask.len());
    let scale = 1.0 / batch.len() as f64;
    let mut grads = critic.net().zero_grads();
    let mut loss = 0.0;
    for t in batch {
        let next = actor_target.act(&t.next_state, &t.mask, sim)?;
        let q_next = critic_target.value(&t.next_state, &layout.encode(&next, sim)?)?;
        let y = t.reward + discount * q_next;
        let (q, trace) = critic.forward_traced(&t.state, &t.action)?;
        let err = q - y;
        loss += err * err * scale;
        critic.backward_into(&trace, 2.0 * err * scale, &mut grads)?;
    }
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::Training(format!(
            "critic loss {loss} or its gradient is not finite (batch of {})",
            batch.len()
        )));
    }
    optimizer.step(&mut [critic.net_mut().params_mut()], &[grads])?;
    Ok(loss)
}

/// One ascent step of every actor net on `J = mean Q(s, A(s))`, with the
/// gradient flowing through the critic and, for message schemes, through the
/// messages. Returns `J` before the step.
pub fn actor_update<A: ActorSystem>(
    actor: &mut A,
    critic: &Critic,
    optimizer: &mut Optimizer,
    batch: &[&Transition],
    sim: &SimConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::State("actor update on an empty batch".into()));
    }
    let layout = actor.layout(batch[0].mask.len());
    let scale = 1.0 / batch.len() as f64;
    let mut grads = actor.zero_grads();
    let mut objective = 0.0;
    for t in batch {
        let (bundle, trace) = actor.act_traced(&t.state, &t.mask, None, sim)?;
        let (q, ct) = critic.forward_traced(&t.state, &layout.encode(&bundle, sim)?)?;
        objective += q * scale;
        // Descent on −J.
        let d_a = critic.action_gradient(&ct, -scale)?;
        actor.backward(&trace, &d_a, &mut grads)?;
    }
    if !objective.is_finite() || !finite(&grads) {
        return Err(Error::Training(format!(
            "actor objective {objective} or its gradient is not finite"
        )));
    }
    let mut params: Vec<&mut ParamSet> = actor.nets_mut().into_iter().map(|n| n.params_mut()).collect();
    optimizer.step(&mut params, &grads)?;
    Ok(objective)
}

/// `target ← κ·online + (1−κ)·target` for every network pair.
pub fn soft_update<A: ActorSystem>(target: &mut A, online: &A, kappa: f64) -> Result<()> {
    for (t, o) in target.nets_mut().into_iter().zip(online.nets()) {
        t.params_mut().soft_blend_from(o.params(), kappa)?;
    }
    Ok(())
}

pub fn soft_update_critic(target: &mut Critic, online: &Critic, kappa: f64) -> Result<()> {
    target
        .net_mut()
        .params_mut()
        .soft_blend_from(online.net().params(), kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::fixtures::{random_state, small_sim, tiny_arch};
    use crate::agents::{Aggregator, CooperativeActors, Policy};
    use crate::env::{sample_population, state_width};
    use crate::numkit::{Activation, OptimizerKind, Rng};

    struct Setup {
        sim: SimConfig,
        actor: CooperativeActors,
        critic: Critic,
        batch: Vec<Transition>,
    }

    fn setup(seed: u64, size: usize) -> Setup {
        let sim = small_sim(4);
        let mut rng = Rng::new(seed);
        let arch = tiny_arch();
        let actor = CooperativeActors::new(Aggregator::Gat, &arch, &mut rng).unwrap();
        let layout = actor.layout(4);
        let critic = Critic::new(state_width(4), layout.width(), &arch.critic_hidden, Activation::Tanh, &mut rng).unwrap();
        let batch = (0..size)
            .map(|_| {
                let mask = sample_population(&sim, &mut rng);
                let state = random_state(&sim, &mask, &mut rng);
                let action = layout.encode(&actor.act(&state, &mask, &sim).unwrap(), &sim).unwrap();
                Transition {
                    next_state: random_state(&sim, &mask, &mut rng),
                    state,
                    action,
                    reward: rng.uniform(-2.0, 0.0),
                    mask,
                }
            })
            .collect();
        Setup { sim, actor, critic, batch }
    }

    fn refs(b: &[Transition]) -> Vec<&Transition> {
        b.iter().collect()
    }

    #[test]
    fn zero_discount_regresses_on_reward() {
        let s = setup(1, 6);
        let mut critic = s.critic.clone();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.0);
        let loss = critic_update(&mut critic, &s.critic, &s.actor, &mut opt, &refs(&s.batch), 0.0, &s.sim).unwrap();
        let expect: f64 = s
            .batch
            .iter()
            .map(|t| (s.critic.value(&t.state, &t.action).unwrap() - t.reward).powi(2))
            .sum::<f64>()
            / 6.0;
        assert!((loss - expect).abs() < 1e-12 * expect.max(1.0));
    }

    #[test]
    fn bootstrap_target_uses_target_networks() {
        let s = setup(2, 4);
        let gamma = 0.9;
        let layout = s.actor.layout(4);
        let mut critic = s.critic.clone();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.0);
        let loss = critic_update(&mut critic, &s.critic, &s.actor, &mut opt, &refs(&s.batch), gamma, &s.sim).unwrap();
        let expect: f64 = s
            .batch
            .iter()
            .map(|t| {
                let a2 = layout.encode(&s.actor.act(&t.next_state, &t.mask, &s.sim).unwrap(), &s.sim).unwrap();
                let y = t.reward + gamma * s.critic.value(&t.next_state, &a2).unwrap();
                (s.critic.value(&t.state, &t.action).unwrap() - y).powi(2)
            })
            .sum::<f64>()
            / 4.0;
        assert!((loss - expect).abs() < 1e-12 * expect.max(1.0));
    }

    #[test]
    fn perfect_critic_does_not_move() {
        let mut s = setup(3, 5);
        for t in &mut s.batch {
            t.reward = s.critic.value(&t.state, &t.action).unwrap();
        }
        let mut critic = s.critic.clone();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.5);
        let loss = critic_update(&mut critic, &s.critic, &s.actor, &mut opt, &refs(&s.batch), 0.0, &s.sim).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(critic.net().params(), s.critic.net().params());
    }

    #[test]
    fn critic_fits_a_frozen_batch() {
        let s = setup(4, 16);
        let mut critic = s.critic.clone();
        let mut opt = Optimizer::new(OptimizerKind::Adam, 1e-2);
        let b = refs(&s.batch);
        let first = critic_update(&mut critic, &s.critic, &s.actor, &mut opt, &b, 0.0, &s.sim).unwrap();
        let mut last = first;
        for _ in 0..100 {
            last = critic_update(&mut critic, &s.critic, &s.actor, &mut opt, &b, 0.0, &s.sim).unwrap();
        }
        assert!(last < 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn zero_actor_rate_keeps_parameters() {
        let s = setup(5, 4);
        let mut actor = s.actor.clone();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.0);
        let j = actor_update(&mut actor, &s.critic, &mut opt, &refs(&s.batch), &s.sim).unwrap();
        assert!(j.is_finite());
        for (a, b) in actor.nets().iter().zip(s.actor.nets()) {
            assert_eq!(a.params(), b.params());
        }
    }

    #[test]
    fn actor_step_raises_objective() {
        let s = setup(6, 8);
        let mut actor = s.actor.clone();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 1e-3);
        let b = refs(&s.batch);
        let j0 = actor_update(&mut actor, &s.critic, &mut opt, &b, &s.sim).unwrap();
        let mut probe = actor.clone();
        let j1 = actor_update(&mut probe, &s.critic, &mut Optimizer::new(OptimizerKind::Sgd, 0.0), &b, &s.sim).unwrap();
        assert!(j1 > j0, "{j0} -> {j1}");
    }

    #[test]
    fn soft_update_blends_exactly() {
        let s = setup(7, 1);
        let mut rng = Rng::new(70);
        let other = CooperativeActors::new(Aggregator::Gat, &tiny_arch(), &mut rng).unwrap();
        let mut target = other.clone();
        let kappa = 0.25;
        soft_update(&mut target, &s.actor, kappa).unwrap();
        for ((t, o), old) in target.nets().iter().zip(s.actor.nets()).zip(other.nets()) {
            let (t, o, old) = (t.params().flatten(), o.params().flatten(), old.params().flatten());
            for i in 0..t.len() {
                assert!((t[i] - (kappa * o[i] + (1.0 - kappa) * old[i])).abs() < 1e-15);
            }
        }
        let mut full = other.clone();
        soft_update(&mut full, &s.actor, 1.0).unwrap();
        for (a, b) in full.nets().iter().zip(s.actor.nets()) {
            assert_eq!(a.params(), b.params());
        }
        let mut ct = s.critic.clone();
        let c2 = Critic::new(ct.state_width(), ct.action_width(), &[8, 6], Activation::Tanh, &mut rng).unwrap();
        soft_update_critic(&mut ct, &c2, 0.0).unwrap();
        assert_eq!(ct.net().params(), s.critic.net().params());
    }

    #[test]
    fn empty_batch_is_state_error() {
        let s = setup(8, 1);
        let mut c = s.critic.clone();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1);
        assert!(matches!(critic_update(&mut c, &s.critic, &s.actor, &mut opt, &[], 0.9, &s.sim), Err(Error::State(_))));
        let mut a = s.actor.clone();
        assert!(matches!(actor_update(&mut a, &s.critic, &mut opt, &[], &s.sim), Err(Error::State(_))));
    }
}

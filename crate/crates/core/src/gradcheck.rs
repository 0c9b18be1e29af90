//! Analytic versus central finite-difference gradients.
//!
//! Errors are reported as `‖g − ĝ‖ / max(‖g‖, ‖ĝ‖)` over a whole parameter
//! vector, which stays meaningful when individual entries are near zero.

use crate::agents::{ActorArch, ActorSystem, Aggregator, CooperativeActors, Critic};
use crate::baselines::{SuperActor, VanillaActors};
use crate::env::channel::Link;
use crate::env::{build_observations, state_width, EnvState, SimConfig, SimParams};
use crate::error::Result;
use crate::numkit::{dot, Activation, DenseNet, ParamSet, Rng};

const STEP: f64 = 1e-6;

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn central<F: FnMut(&[f64]) -> f64>(x: &[f64], mut f: F) -> Vec<f64> {
    let mut v = x.to_vec();
    (0..x.len())
        .map(|i| {
            v[i] = x[i] + STEP;
            let hi = f(&v);
            v[i] = x[i] - STEP;
            let lo = f(&v);
            v[i] = x[i];
            (hi - lo) / (2.0 * STEP)
        })
        .collect()
}

/// Outcome of one comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCase {
    pub label: String,
    pub params: usize,
    pub rel_error: f64,
}

/// Random small nets with random activations and biases; the objective is
/// `y · u` for a fixed random `u`. Checks parameter and input gradients.
pub fn check_random_nets(count: usize, seed: u64) -> Result<Vec<GradCase>> {
    let mut rng = Rng::new(seed);
    let acts = [
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::Identity,
    ];
    let mut out = Vec::with_capacity(count);
    for c in 0..count {
        let input = 1 + rng.index(6);
        let depth = 1 + rng.index(3);
        let layers: Vec<(usize, Activation)> = (0..depth)
            .map(|_| (1 + rng.index(6), acts[rng.index(acts.len())]))
            .collect();
        let mut net = DenseNet::new(input, &layers, &mut rng)?;
        randomize_biases(vec![&mut net], 0.5, &mut rng);
        let x: Vec<f64> = (0..input).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let u: Vec<f64> = (0..net.output_width()).map(|_| rng.uniform(-1.0, 1.0)).collect();

        let (_, trace) = net.forward_traced(&x)?;
        let mut grads = net.zero_grads();
        let g_in = net.backward_into(&trace, &u, &mut grads)?;
        let mut analytic = grads.flatten();
        analytic.extend_from_slice(&g_in);

        let theta = net.params().flatten();
        let mut probe = net.clone();
        let mut numeric = central(&theta, |t| {
            probe.params_mut().assign_flat(t).expect("same shape");
            dot(&probe.infer(&x).expect("valid"), &u)
        });
        numeric.extend(central(&x, |xi| dot(&net.infer(xi).expect("valid"), &u)));
        out.push(GradCase {
            label: format!("net {c}: {input} → {layers:?}"),
            params: theta.len(),
            rel_error: relative_error(&analytic, &numeric),
        });
    }
    Ok(out)
}

/// Draws every bias uniformly from `[−scale, scale]`. Zero-initialized
/// biases put relu units with zero input exactly on the kink, where finite
/// differences are meaningless.
pub fn randomize_biases(nets: Vec<&mut DenseNet>, scale: f64, rng: &mut Rng) {
    for net in nets {
        let p = net.params_mut();
        for i in (1..p.len()).step_by(2) {
            for b in p.tensor_mut(i).as_mut_slice() {
                *b = rng.uniform(-scale, scale);
            }
        }
    }
}

fn flat_all(sets: &[ParamSet]) -> Vec<f64> {
    sets.iter().flat_map(ParamSet::flatten).collect()
}

fn assign_all<A: ActorSystem>(actor: &mut A, flat: &[f64]) {
    let mut at = 0;
    for net in actor.nets_mut() {
        let n = net.param_count();
        net.params_mut().assign_flat(&flat[at..at + n]).expect("same shape");
        at += n;
    }
}

/// Gradient of `Q(s, A(s; ψ))` with respect to every actor parameter, with
/// rates held at `rates`.
pub fn actor_objective_gradient<A: ActorSystem>(
    actor: &A,
    critic: &Critic,
    state: &[f64],
    mask: &[bool],
    rates: &[Option<Link>],
    cfg: &SimConfig,
) -> Result<(f64, Vec<ParamSet>)> {
    let layout = actor.layout(mask.len());
    let (bundle, trace) = actor.act_traced(state, mask, Some(rates), cfg)?;
    let a = layout.encode(&bundle, cfg)?;
    let (q, ct) = critic.forward_traced(state, &a)?;
    let d_a = critic.action_gradient(&ct, 1.0)?;
    let mut grads = actor.zero_grads();
    actor.backward(&trace, &d_a, &mut grads)?;
    Ok((q, grads))
}

/// End-to-end check of the actor gradient through the critic.
pub fn check_actor_through_critic<A: ActorSystem>(
    actor: &A,
    critic: &Critic,
    state: &[f64],
    mask: &[bool],
    cfg: &SimConfig,
) -> Result<GradCase> {
    let layout = actor.layout(mask.len());
    let (base, _) = actor.act_traced(state, mask, None, cfg)?;
    let rates = base.links.clone();
    let (_, grads) = actor_objective_gradient(actor, critic, state, mask, &rates, cfg)?;
    let analytic = flat_all(&grads);
    let theta: Vec<f64> = actor.nets().iter().flat_map(|n| n.params().flatten()).collect();
    let mut probe = actor.clone();
    let numeric = central(&theta, |t| {
        assign_all(&mut probe, t);
        let (b, _) = probe
            .act_traced(state, mask, Some(&rates), cfg)
            .expect("valid inputs");
        critic
            .value(state, &layout.encode(&b, cfg).expect("layout"))
            .expect("valid widths")
    });
    Ok(GradCase {
        label: "actor through critic".into(),
        params: theta.len(),
        rel_error: relative_error(&analytic, &numeric),
    })
}

fn small_arch() -> ActorArch {
    ActorArch {
        message_len: 3,
        feature_len: 4,
        message_hidden: vec![5],
        uav_feature_hidden: vec![5],
        id_feature_hidden: vec![5],
        trajectory_hidden: vec![6],
        super_hidden: vec![6],
        cpu_hidden: vec![5],
        offload_hidden: vec![5],
        critic_hidden: vec![8, 6],
        ..ActorArch::default()
    }
}

fn check_scheme<A: ActorSystem>(
    label: &str,
    make: impl Fn(&mut Rng) -> Result<A>,
    mask: &[bool],
    cases: usize,
    rng: &mut Rng,
) -> Result<Vec<GradCase>> {
    let sim = SimParams {
        n_min: 1,
        n_max: mask.len(),
        task_bits_min: 1e6,
        task_bits_max: 1e7,
        ..SimParams::default()
    }
    .resolve()?;
    let arch = small_arch();
    let mut out = Vec::with_capacity(cases);
    while out.len() < cases {
        let mut actor = make(rng)?;
        // Zero-bias relu units sit exactly on their kink.
        randomize_biases(actor.nets_mut(), 0.2, rng);
        let critic = Critic::new(
            state_width(mask.len()),
            actor.layout(mask.len()).width(),
            &arch.critic_hidden,
            Activation::Tanh,
            rng,
        )?;
        let mut env = EnvState::reset(&sim, mask, rng)?;
        for d in env.devices.iter_mut().zip(mask).filter(|(_, &a)| a).map(|(d, _)| d) {
            d.prev_local_bits = rng.uniform(0.0, d.task_bits) / sim.slots as f64;
            d.prev_offload_bits = rng.uniform(0.0, d.task_bits) / sim.slots as f64;
            d.prev_uplink_rate = rng.uniform(0.0, sim.bandwidth);
        }
        let state = build_observations(&env, &sim).state_vector();
        let (b, _) = actor.act_traced(&state, mask, None, &sim)?;
        // A zero CPU weight puts the normalization on a kink.
        if !mask.iter().zip(&b.raw.cpu_weight).all(|(&a, &w)| !a || w > 0.0) {
            continue;
        }
        let mut case = check_actor_through_critic(&actor, &critic, &state, mask, &sim)?;
        case.label = format!("{label} #{}", out.len() + 1);
        out.push(case);
    }
    Ok(out)
}

/// Actor-through-critic checks for every trainable scheme on small nets.
pub fn check_end_to_end(cases: usize, seed: u64) -> Result<Vec<GradCase>> {
    let mut rng = Rng::new(seed);
    let arch = small_arch();
    let partial = [true, false, true, true];
    let mut out = check_scheme("cmaddpg", |r| CooperativeActors::new(Aggregator::Gat, &arch, r), &partial, cases, &mut rng)?;
    out.extend(check_scheme("gs", |r| CooperativeActors::new(Aggregator::GraphSage, &arch, r), &partial, cases, &mut rng)?);
    out.extend(check_scheme("vanilla", |r| VanillaActors::new(&arch, r), &partial, cases, &mut rng)?);
    out.extend(check_scheme("saddpg", |r| SuperActor::new(3, &arch, r), &[true; 3], cases, &mut rng)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_nets_pass() {
        for case in (0..30).flat_map(|seed| check_random_nets(20, seed).unwrap()) {
            assert!(case.rel_error < 1e-4, "{}: {}", case.label, case.rel_error);
        }
    }

    #[test]
    fn every_scheme_end_to_end() {
        let cases = check_end_to_end(2, 3).unwrap();
        assert_eq!(cases.len(), 8);
        for case in cases {
            assert!(case.rel_error < 1e-3, "{}: {}", case.label, case.rel_error);
        }
    }

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
        assert!((relative_error(&[1.0, 0.0], &[1.0, 0.1]) - 0.1 / 1.01f64.sqrt()).abs() < 1e-12);
    }
}

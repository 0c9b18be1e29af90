use crate::agents::{ActionBundle, RawOutputs, SolutionHead};
use crate::env::SimConfig;
use crate::error::{contract, Result};
use crate::numkit::Rng;

/// Adds `N(0, var)` to every raw solution output of the active slots,
/// without clamping. Draw order: the three trajectory outputs, then CPU
/// weight and offload fraction per active slot.
pub fn perturb_raw(raw: &RawOutputs, var: f64, mask: &[bool], rng: &mut Rng) -> Result<RawOutputs> {
    contract!(var >= 0.0, "noise variance {var} is negative");
    let sd = var.sqrt();
    let mut out = raw.clone();
    for y in &mut out.trajectory {
        *y += sd * rng.standard_normal();
    }
    for j in (0..mask.len()).filter(|&j| mask[j]) {
        out.cpu_weight[j] += sd * rng.standard_normal();
        out.offload_fraction[j] += sd * rng.standard_normal();
    }
    Ok(out)
}

/// Perturbs the raw outputs, clamps them back into their ranges and
/// re-applies every projection. Messages are left untouched.
pub fn inject_exploration(
    bundle: &ActionBundle,
    var: f64,
    rng: &mut Rng,
    state: &[f64],
    mask: &[bool],
    cfg: &SimConfig,
) -> Result<ActionBundle> {
    if var == 0.0 {
        return Ok(bundle.clone());
    }
    let mut raw = perturb_raw(&bundle.raw, var, mask, rng)?;
    for y in &mut raw.trajectory {
        *y = y.clamp(-1.0, 1.0);
    }
    for j in (0..mask.len()).filter(|&j| mask[j]) {
        raw.cpu_weight[j] = raw.cpu_weight[j].max(0.0);
        raw.offload_fraction[j] = raw.offload_fraction[j].clamp(0.0, 1.0);
    }
    let (mut noisy, _) = SolutionHead::apply(&raw, state, mask, None, bundle.lambda_cpu, cfg)?;
    noisy.messages = bundle.messages.clone();
    Ok(noisy)
}

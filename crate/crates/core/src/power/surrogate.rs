//! Convex surrogate of the power problem: each subtracted logarithm is
//! replaced by its tangent at the expansion point.

use super::DualVariables;
use crate::netmodel::{
    total_utility, AccessDecision, ChannelRealization, NetworkInstance, PowerMatrix,
    SubcarrierMode, P_MIN,
};

/// `log(x) ≤ log(x₀) + (x − x₀)/(x₀ ln b)`, the tangent of the concave log.
fn log_tangent(inst: &NetworkInstance, x: f64, x0: f64) -> f64 {
    inst.log(x0) + (x - x0) / (x0 * inst.log_base.ln())
}

/// True power-problem objective for a fixed decision: total utility.
pub fn true_objective(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    p: &PowerMatrix,
) -> f64 {
    total_utility(inst, ch, d, p)
}

/// Second-user rate with `−log(σ² + p₁h₂)` linearized at `p₁⁰`.
fn second_rate(inst: &NetworkInstance, h2: f64, p1: f64, p2: f64, p1_0: f64) -> f64 {
    let s2 = inst.noise_var;
    inst.log(s2 + (p1 + p2) * h2) - log_tangent(inst, s2 + p1 * h2, s2 + p1_0 * h2)
}

pub fn surrogate_objective(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    p: &PowerMatrix,
    expansion: &PowerMatrix,
) -> f64 {
    let s2 = inst.noise_var;
    let mut j = 0.0;
    for n in 0..inst.subcarriers {
        match d.mode(n) {
            SubcarrierMode::Idle => {}
            SubcarrierMode::Oma { user } => {
                j += inst.log(1.0 + p[(user, n)] * ch.gain(user, n) / s2);
            }
            SubcarrierMode::Noma { first, second } => {
                let (h1, h2) = (ch.gain(first, n), ch.gain(second, n));
                let (p1, p2) = (p[(first, n)], p[(second, n)]);
                let (p1_0, p2_0) = (expansion[(first, n)], expansion[(second, n)]);
                j += inst.log(1.0 + p1 * h1 / s2);
                j += second_rate(inst, h2, p1, p2, p1_0);
                j -= inst.cost_a;
                j -= inst.cost_v * log_tangent(inst, h1 * p2 + s2, h1 * p2_0 + s2);
                j += inst.cost_v * inst.log(h1 * p1.max(P_MIN));
            }
        }
    }
    j
}

/// Linearized rate of SP `s`; never above the true SP rate.
pub fn surrogate_sp_rate(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    p: &PowerMatrix,
    expansion: &PowerMatrix,
    s: usize,
) -> f64 {
    let s2 = inst.noise_var;
    let mut r = 0.0;
    for n in 0..inst.subcarriers {
        match d.mode(n) {
            SubcarrierMode::Idle => {}
            SubcarrierMode::Oma { user } => {
                if inst.sp_of[user] == s {
                    r += inst.log(1.0 + p[(user, n)] * ch.gain(user, n) / s2);
                }
            }
            SubcarrierMode::Noma { first, second } => {
                if inst.sp_of[first] == s {
                    r += inst.log(1.0 + p[(first, n)] * ch.gain(first, n) / s2);
                }
                if inst.sp_of[second] == s {
                    r += second_rate(
                        inst,
                        ch.gain(second, n),
                        p[(first, n)],
                        p[(second, n)],
                        expansion[(first, n)],
                    );
                }
            }
        }
    }
    r
}

/// Lagrangian of the surrogate problem, every constraint attached with its
/// multiplier.
pub fn surrogate_lagrangian(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    p: &PowerMatrix,
    expansion: &PowerMatrix,
    duals: &DualVariables,
) -> f64 {
    let s2 = inst.noise_var;
    let mut l = surrogate_objective(inst, ch, d, p, expansion);
    for s in 0..inst.service_providers() {
        l += duals.lambda[s] * (surrogate_sp_rate(inst, ch, d, p, expansion, s) - inst.min_rate[s]);
    }
    let mut total = 0.0;
    for n in 0..inst.subcarriers {
        if let SubcarrierMode::Noma { first, second } = d.mode(n) {
            let sep = ch.gain(first, n) / s2 * (p[(second, n)] - p[(first, n)]);
            l += duals.gamma[n] * (sep - inst.p_d);
        }
        for k in 0..inst.users {
            let served = (0..inst.users).filter(|&k1| d.alpha(k1, k, n)).count() as f64;
            l += duals.zeta[(k, n)] * (served * inst.p_max - p[(k, n)]);
            total += p[(k, n)];
        }
    }
    l + duals.eta * (inst.p_max - total)
}

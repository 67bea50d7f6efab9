//! Dual solvers for the convex surrogate of one DC iteration.

use super::closed_form::{budget_marginal, closed_form_update, solve_with_sic, Allocation, ClosedFormContext, SubcarrierKind};
use super::roots::illinois;
use super::surrogate::surrogate_sp_rate;
use super::{DualMethod, DualVariables, PowerConfig};
use crate::netmodel::{AccessDecision, ChannelRealization, NetworkInstance, PowerMatrix, SubcarrierMode};

/// Projected subgradient step on every multiplier of the surrogate
/// Lagrangian; multipliers grow where their constraint is violated.
pub fn dual_ascent_step(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    p: &PowerMatrix,
    expansion: &PowerMatrix,
    duals: &DualVariables,
    step: f64,
) -> DualVariables {
    let mut next = duals.clone();
    for s in 0..inst.service_providers() {
        let slack = surrogate_sp_rate(inst, ch, d, p, expansion, s) - inst.min_rate[s];
        next.lambda[s] = (duals.lambda[s] - step * slack).max(0.0);
    }
    let mut total = 0.0;
    for n in 0..inst.subcarriers {
        if let SubcarrierMode::Noma { first, second } = d.mode(n) {
            let slack = ch.gain(first, n) / inst.noise_var * (p[(second, n)] - p[(first, n)]) - inst.p_d;
            next.gamma[n] = (duals.gamma[n] - step * slack).max(0.0);
        } else {
            next.gamma[n] = 0.0;
        }
        for k in 0..inst.users {
            let served = (0..inst.users).filter(|&k1| d.alpha(k1, k, n)).count() as f64;
            let excess = p[(k, n)] - served * inst.p_max;
            next.zeta[(k, n)] = (duals.zeta[(k, n)] + step * excess).max(0.0);
            total += p[(k, n)];
        }
    }
    next.eta = (duals.eta + step * (total - inst.p_max)).max(0.0);
    next
}

/// One DC surrogate: a closed-form context per active subcarrier.
#[derive(Clone, Debug)]
pub struct SurrogateProblem {
    pub contexts: Vec<Option<ClosedFormContext>>,
    pub users: usize,
    pub min_rate: Vec<f64>,
    pub p_max: f64,
}

/// Primal/dual pair returned by an inner solve.
#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub allocations: Vec<Allocation>,
    pub powers: PowerMatrix,
    pub duals: DualVariables,
    /// Surrogate SP rates at `powers`.
    pub sp_rates: Vec<f64>,
    /// Every surrogate constraint holds at `powers`.
    pub feasible: bool,
    pub iterations: usize,
}

const RATE_TOL: f64 = 1e-9;
const POWER_TOL: f64 = 1e-9;

impl SurrogateProblem {
    pub fn new(
        inst: &NetworkInstance,
        ch: &ChannelRealization,
        d: &AccessDecision,
        expansion: &PowerMatrix,
    ) -> Self {
        Self {
            contexts: (0..inst.subcarriers)
                .map(|n| ClosedFormContext::new(inst, ch, d.mode(n), n, expansion))
                .collect(),
            users: inst.users,
            min_rate: inst.min_rate.clone(),
            p_max: inst.p_max,
        }
    }

    pub fn powers(&self, allocations: &[Allocation]) -> PowerMatrix {
        let mut p = PowerMatrix::zeros(self.users, self.contexts.len());
        for (ctx, a) in self.contexts.iter().zip(allocations) {
            let Some(ctx) = ctx else { continue };
            let n = ctx.subcarrier;
            match (ctx.kind, *a) {
                (SubcarrierKind::Oma { user, .. }, Allocation::Oma { p: x }) => p[(user, n)] = x,
                (SubcarrierKind::Noma { first, second, .. }, Allocation::Noma { p1, p2 }) => {
                    p[(first, n)] = p1;
                    p[(second, n)] = p2;
                }
                _ => {}
            }
        }
        p
    }

    /// Linearized SP rates of an allocation.
    pub fn sp_rates(&self, allocations: &[Allocation]) -> Vec<f64> {
        let mut r = vec![0.0; self.min_rate.len()];
        for (ctx, a) in self.contexts.iter().zip(allocations) {
            let Some(ctx) = ctx else { continue };
            let (s2, k) = (ctx.noise_var, ctx.kappa);
            match (ctx.kind, *a) {
                (SubcarrierKind::Oma { sp, h, .. }, Allocation::Oma { p }) => {
                    r[sp] += k * (p * h / s2).ln_1p();
                }
                (
                    SubcarrierKind::Noma { sp_first, sp_second, h1, h2, p1_0, .. },
                    Allocation::Noma { p1, p2 },
                ) => {
                    let (c1, _) = ctx.slopes();
                    r[sp_first] += k * (p1 * h1 / s2).ln_1p();
                    r[sp_second] += k * ((s2 + (p1 + p2) * h2) / (s2 + p1_0 * h2)).ln() - c1 * (p1 - p1_0);
                }
                _ => {}
            }
        }
        r
    }

    fn sic_met(&self, allocations: &[Allocation]) -> bool {
        self.contexts.iter().zip(allocations).all(|(ctx, a)| match (ctx, a) {
            (Some(ctx), Allocation::Noma { p1, p2 }) => {
                let SubcarrierKind::Noma { h1, .. } = ctx.kind else { return true };
                (p2 - p1) * h1 / ctx.noise_var >= ctx.p_d - POWER_TOL * (1.0 + ctx.p_d)
            }
            _ => true,
        })
    }

    fn rates_met(&self, rates: &[f64]) -> bool {
        rates
            .iter()
            .zip(&self.min_rate)
            .all(|(r, m)| *r >= m - RATE_TOL * (1.0 + m))
    }

    fn is_feasible(&self, allocations: &[Allocation], rates: &[f64]) -> bool {
        let total: f64 = allocations.iter().map(Allocation::total).sum();
        total <= self.p_max * (1.0 + POWER_TOL) && self.sic_met(allocations) && self.rates_met(rates)
    }

    fn active(&self) -> usize {
        self.contexts.iter().filter(|c| c.is_some()).count()
    }

    /// SIC-exact allocation at `(λ, η)`; fills `gamma` and returns the total.
    fn allocate(&self, lambda: &[f64], eta: f64, out: &mut [Allocation], gamma: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for (n, ctx) in self.contexts.iter().enumerate() {
            let (a, g) = match ctx {
                Some(ctx) => solve_with_sic(ctx, lambda, eta),
                None => (Allocation::Idle, 0.0),
            };
            out[n] = a;
            gamma[n] = g;
            total += a.total();
        }
        total
    }

    /// Smallest `η ≥ 0` whose allocation respects the power budget, found in
    /// the water level `w = 1/η`, in which the total is close to linear.
    /// `warm` carries the last water level between calls.
    fn solve_eta_root(&self, lambda: &[f64], warm: &mut Option<f64>, out: &mut [Allocation], gamma: &mut [f64]) -> f64 {
        let budget = self.p_max;
        if self.allocate(lambda, 0.0, out, gamma) <= budget {
            return 0.0;
        }
        let mut g = |w: f64| self.allocate(lambda, 1.0 / w, out, gamma) - budget;
        let w0 = warm.unwrap_or(budget / self.active().max(1) as f64);
        let g0 = g(w0);
        let (mut lo, mut glo, mut hi, mut ghi) = (w0, g0, w0, g0);
        if g0 > 0.0 {
            while glo > 0.0 {
                hi = lo;
                ghi = glo;
                lo *= 0.25;
                if lo < 1e-300 {
                    // Even η → ∞ overshoots: the SIC gaps alone exceed the budget.
                    *warm = None;
                    g(1e-300);
                    return 1e300;
                }
                glo = g(lo);
            }
        } else {
            while ghi <= 0.0 {
                lo = hi;
                glo = ghi;
                hi *= 4.0;
                if hi > 1e300 {
                    g(f64::INFINITY);
                    return 0.0;
                }
                ghi = g(hi);
            }
        }
        let w = illinois(&mut g, lo, glo, hi, ghi, 1e-14 * hi, 200);
        *warm = Some(w);
        g(w);
        1.0 / w
    }

    /// Budget multiplier at `λ` and the matching allocation. A subcarrier
    /// clamped at the whole budget leaves the total flat in `η`; the
    /// multiplier is then its marginal value.
    fn solve_eta(&self, lambda: &[f64], warm: &mut Option<f64>, out: &mut [Allocation], gamma: &mut [f64]) -> f64 {
        let mut eta = self.solve_eta_root(lambda, warm, out, gamma);
        for (ctx, a) in self.contexts.iter().zip(out.iter()) {
            if let Some(ctx) = ctx {
                if a.total() >= self.p_max * (1.0 - 1e-12) {
                    eta = eta.max(budget_marginal(ctx, lambda, a));
                }
            }
        }
        eta
    }

    fn rate_at(&self, lambda: &[f64], s: usize, warm: &mut Option<f64>, out: &mut [Allocation], gamma: &mut [f64]) -> f64 {
        self.solve_eta(lambda, warm, out, gamma);
        self.sp_rates(out)[s]
    }

    /// Exact dual solve: η from the power budget, γ per subcarrier from the
    /// SIC-active stationarity condition, λ by coordinate-wise root finding
    /// on the SP rates (warm-started from `warm.lambda`).
    pub fn solve_exact(&self, warm: &DualVariables, lambda_cap: f64, max_sweeps: usize) -> InnerSolution {
        let sps = self.min_rate.len();
        let subcarriers = self.contexts.len();
        let mut lambda: Vec<f64> = (0..sps)
            .map(|s| if self.min_rate[s] > 0.0 { warm.lambda[s].clamp(0.0, lambda_cap) } else { 0.0 })
            .collect();
        let mut alloc = vec![Allocation::Idle; subcarriers];
        let mut gamma = vec![0.0; subcarriers];
        let mut water = (warm.eta > 0.0).then(|| 1.0 / warm.eta);
        let mut evals = 0usize;

        let constrained: Vec<usize> = (0..sps).filter(|&s| self.min_rate[s] > 0.0).collect();
        for sweep in 0..max_sweeps {
            let mut change = 0.0f64;
            for &s in &constrained {
                let target = self.min_rate[s];
                let old = lambda[s];
                let mut f = |x: f64| {
                    evals += 1;
                    let mut l = lambda.clone();
                    l[s] = x;
                    self.rate_at(&l, s, &mut water, &mut alloc, &mut gamma) - target
                };
                let f0 = f(0.0);
                let new = if f0 >= 0.0 {
                    0.0
                } else {
                    let (mut lo, mut flo) = (0.0, f0);
                    let mut hi = (2.0 * old).clamp(1.0, lambda_cap);
                    let mut fhi = f(hi);
                    while fhi < 0.0 && hi < lambda_cap {
                        lo = hi;
                        flo = fhi;
                        hi = (hi * 4.0).min(lambda_cap);
                        fhi = f(hi);
                    }
                    if fhi < 0.0 {
                        lambda_cap
                    } else {
                        illinois(&mut f, lo, flo, hi, fhi, 1e-13 * hi, 200)
                    }
                };
                lambda[s] = new;
                change = change.max((new - old).abs() / (1.0 + old));
            }
            // A single coordinate is solved exactly by one pass.
            if change < 1e-12 || (constrained.len() <= 1 && sweep == 0) {
                break;
            }
        }
        evals += 1;
        let eta = self.solve_eta(&lambda, &mut water, &mut alloc, &mut gamma);
        let rates = self.sp_rates(&alloc);
        let feasible = self.is_feasible(&alloc, &rates);
        let powers = self.powers(&alloc);
        let mut duals = DualVariables::zeros(sps, self.users, subcarriers);
        duals.lambda = lambda;
        duals.gamma = gamma;
        duals.eta = eta;
        InnerSolution {
            allocations: alloc,
            powers,
            duals,
            sp_rates: rates,
            feasible,
            iterations: evals,
        }
    }
}

/// Solves the surrogate built at `expansion` for the fixed decision.
pub fn solve_surrogate(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    expansion: &PowerMatrix,
    warm: &DualVariables,
    cfg: &PowerConfig,
) -> InnerSolution {
    let prob = SurrogateProblem::new(inst, ch, d, expansion);
    match cfg.method {
        DualMethod::Exact => prob.solve_exact(warm, cfg.lambda_cap, cfg.max_lambda_sweeps),
        DualMethod::Subgradient => subgradient(&prob, inst, ch, d, expansion, warm, cfg),
    }
}

fn subgradient(
    prob: &SurrogateProblem,
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    expansion: &PowerMatrix,
    warm: &DualVariables,
    cfg: &PowerConfig,
) -> InnerSolution {
    let mut duals = warm.clone();
    let mut alloc: Vec<Allocation> = Vec::new();
    let mut powers = PowerMatrix::zeros(inst.users, inst.subcarriers);
    let mut iterations = 0;
    for t in 0..cfg.max_dual_iters {
        iterations = t + 1;
        alloc = prob
            .contexts
            .iter()
            .map(|c| c.as_ref().map_or(Allocation::Idle, |c| closed_form_update(c, &duals)))
            .collect();
        let next_p = prob.powers(&alloc);
        let step = cfg.step_a / (cfg.step_b + t as f64);
        let next = dual_ascent_step(inst, ch, d, &next_p, expansion, &duals, step);
        let dp = next_p.distance(&powers);
        let dd = next.distance(&duals);
        powers = next_p;
        duals = next;
        if t > 0 && dp < cfg.eps_inner && dd < cfg.eps_inner {
            break;
        }
    }
    let rates = prob.sp_rates(&alloc);
    InnerSolution {
        feasible: prob.is_feasible(&alloc, &rates),
        allocations: alloc,
        powers,
        duals,
        sp_rates: rates,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_constraints_keep_zero_duals() {
        let inst = NetworkInstance::round_robin(2, 1, 1, 0.0).unwrap();
        let ch = ChannelRealization::new(vec![[0.0; 2]; 2], crate::netmodel::Matrix::from_vec(2, 1, vec![4.0, 1.0]).unwrap()).unwrap();
        let d = AccessDecision::from_modes(2, &[SubcarrierMode::Noma { first: 0, second: 1 }]).unwrap();
        let mut p = PowerMatrix::zeros(2, 1);
        p[(0, 0)] = 1.0;
        p[(1, 0)] = 10.0;
        let zero = DualVariables::zeros(1, 2, 1);
        let next = dual_ascent_step(&inst, &ch, &d, &p, &p, &zero, 0.5);
        assert_eq!(next, zero);
    }

    #[test]
    fn budget_violation_raises_eta_by_the_step() {
        let inst = NetworkInstance::round_robin(1, 1, 1, 0.0).unwrap();
        let ch = ChannelRealization::new(vec![[0.0; 2]], crate::netmodel::Matrix::filled(1, 1, 1.0)).unwrap();
        let d = AccessDecision::from_modes(1, &[SubcarrierMode::Oma { user: 0 }]).unwrap();
        let p = PowerMatrix::uniform(1, 1, inst.p_max + 1.0);
        let next = dual_ascent_step(&inst, &ch, &d, &p, &p, &DualVariables::zeros(1, 1, 1), 0.1);
        assert!((next.eta - 0.1).abs() < 1e-15);
        assert_eq!(next.lambda, vec![0.0]);
    }
}

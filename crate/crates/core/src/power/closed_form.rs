//! Per-subcarrier stationary points of the surrogate Lagrangian.
//!
//! For a NOMA pair the Lagrangian is separable in the first user's power
//! `p₁` and the subcarrier total `p_n = p₁ + p₂`:
//!
//! ```text
//! L = κ(1+λ')ln(1+p₁h₁/σ²) + κV ln p₁ + Q p₁ + κ(1+λ'')ln(σ²+p_n h₂) + D₂ p_n
//! D₁ = −(1+λ'')c₁ − γh₁/σ² − ζ₁ − η      c₁ = κh₂/(σ²+p₁⁰h₂)
//! D₂ = −V c₂ + γh₁/σ² − ζ₂ − η           c₂ = κh₁/(σ²+p₂⁰h₁)
//! Q  = D₁ − D₂
//! ```
//!
//! with `κ = 1/ln(base)`.

use super::roots::illinois;
use super::DualVariables;
use crate::netmodel::{ChannelRealization, NetworkInstance, PowerMatrix, SubcarrierMode, P_MIN};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SubcarrierKind {
    Oma {
        user: usize,
        sp: usize,
        h: f64,
    },
    Noma {
        first: usize,
        second: usize,
        sp_first: usize,
        sp_second: usize,
        h1: f64,
        h2: f64,
        /// Expansion-point powers of the first and second user.
        p1_0: f64,
        p2_0: f64,
    },
}

/// Everything the closed form of one subcarrier needs apart from the duals.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedFormContext {
    pub subcarrier: usize,
    pub noise_var: f64,
    /// `1/ln(base)`.
    pub kappa: f64,
    pub cost_v: f64,
    pub p_max: f64,
    pub p_d: f64,
    pub kind: SubcarrierKind,
}

/// Powers of one subcarrier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Allocation {
    Idle,
    Oma { p: f64 },
    Noma { p1: f64, p2: f64 },
}

impl Allocation {
    pub fn total(&self) -> f64 {
        match *self {
            Allocation::Idle => 0.0,
            Allocation::Oma { p } => p,
            Allocation::Noma { p1, p2 } => p1 + p2,
        }
    }
}

/// Linear coefficients of the Lagrangian at given duals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    /// OMA: `D`. NOMA: `D₁`.
    pub d1: f64,
    /// NOMA only.
    pub d2: f64,
    /// NOMA only: `D₁ − D₂`.
    pub q: f64,
}

impl ClosedFormContext {
    /// Context of subcarrier `n` under `mode`, linearized at `expansion`;
    /// `None` for an idle subcarrier.
    pub fn new(
        inst: &NetworkInstance,
        ch: &ChannelRealization,
        mode: SubcarrierMode,
        n: usize,
        expansion: &PowerMatrix,
    ) -> Option<Self> {
        let kind = match mode {
            SubcarrierMode::Idle => return None,
            SubcarrierMode::Oma { user } => SubcarrierKind::Oma {
                user,
                sp: inst.sp_of[user],
                h: ch.gain(user, n),
            },
            SubcarrierMode::Noma { first, second } => SubcarrierKind::Noma {
                first,
                second,
                sp_first: inst.sp_of[first],
                sp_second: inst.sp_of[second],
                h1: ch.gain(first, n),
                h2: ch.gain(second, n),
                p1_0: expansion[(first, n)],
                p2_0: expansion[(second, n)],
            },
        };
        Some(Self {
            subcarrier: n,
            noise_var: inst.noise_var,
            kappa: 1.0 / inst.log_base.ln(),
            cost_v: inst.cost_v,
            p_max: inst.p_max,
            p_d: inst.p_d,
            kind,
        })
    }

    /// Minimum `p_n − 2p₁` imposed by SIC, `P_d σ²/h₁`.
    pub fn sic_gap(&self) -> f64 {
        match self.kind {
            SubcarrierKind::Noma { h1, .. } => self.p_d * self.noise_var / h1,
            SubcarrierKind::Oma { .. } => 0.0,
        }
    }

    /// `(c₁, c₂)`, slopes of the two linearized logarithms.
    pub fn slopes(&self) -> (f64, f64) {
        match self.kind {
            SubcarrierKind::Noma { h1, h2, p1_0, p2_0, .. } => (
                self.kappa * h2 / (self.noise_var + p1_0 * h2),
                self.kappa * h1 / (self.noise_var + p2_0 * h1),
            ),
            SubcarrierKind::Oma { .. } => (0.0, 0.0),
        }
    }

    pub fn coefficients(&self, duals: &DualVariables) -> Coefficients {
        let n = self.subcarrier;
        let s2 = self.noise_var;
        match self.kind {
            SubcarrierKind::Oma { user, .. } => Coefficients {
                d1: -duals.zeta[(user, n)] - duals.eta,
                d2: 0.0,
                q: 0.0,
            },
            SubcarrierKind::Noma {
                first,
                second,
                sp_second,
                h1,
                ..
            } => {
                let (c1, c2) = self.slopes();
                let g = duals.gamma[n] * h1 / s2;
                let d1 = -(1.0 + duals.lambda[sp_second]) * c1 - g - duals.zeta[(first, n)] - duals.eta;
                let d2 = -self.cost_v * c2 + g - duals.zeta[(second, n)] - duals.eta;
                Coefficients { d1, d2, q: d1 - d2 }
            }
        }
    }

    /// Water-filling total of a NOMA subcarrier (or the OMA power) for a
    /// rate weight `w = κ(1+λ)`, gain `h` and linear coefficient `d`,
    /// clamped to `[0, P_max]`.
    fn water_fill(&self, w: f64, h: f64, d: f64) -> f64 {
        if d >= 0.0 {
            return self.p_max;
        }
        (-w / d - self.noise_var / h).clamp(0.0, self.p_max)
    }

    /// Inner Lagrangian of a NOMA subcarrier as a function of `(p₁, p_n)`,
    /// dropping constants.
    pub fn noma_lagrangian(&self, duals: &DualVariables, p1: f64, pn: f64) -> f64 {
        let SubcarrierKind::Noma { sp_first, sp_second, h1, h2, .. } = self.kind else {
            return f64::NAN;
        };
        let c = self.coefficients(duals);
        let s2 = self.noise_var;
        let k = self.kappa;
        k * (1.0 + duals.lambda[sp_first]) * (1.0 + p1 * h1 / s2).ln()
            + k * self.cost_v * p1.max(P_MIN).ln()
            + c.q * p1
            + k * (1.0 + duals.lambda[sp_second]) * (s2 + pn * h2).ln()
            + c.d2 * pn
    }
}

/// Roots of `a x² + b x + c = 0`, computed without cancellation.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return Some((0.0, 0.0));
    }
    Some((q / a, c / q))
}

/// Primal maximizer of the inner Lagrangian for one subcarrier at the given
/// duals: the water-filling form for OMA, and for NOMA the water-filling
/// total followed by the first user's power from the quadratic
/// `Q h₁ p² + (κh₁(1+λ'+V) + σ²Q) p + κVσ² = 0`.
pub fn closed_form_update(ctx: &ClosedFormContext, duals: &DualVariables) -> Allocation {
    let k = ctx.kappa;
    let s2 = ctx.noise_var;
    match ctx.kind {
        SubcarrierKind::Oma { sp, h, .. } => {
            let c = ctx.coefficients(duals);
            Allocation::Oma {
                p: ctx.water_fill(k * (1.0 + duals.lambda[sp]), h, c.d1),
            }
        }
        SubcarrierKind::Noma { sp_first, sp_second, h1, h2, p1_0, .. } => {
            let c = ctx.coefficients(duals);
            let w1 = k * (1.0 + duals.lambda[sp_first]);
            let w2 = k * (1.0 + duals.lambda[sp_second]);
            let v = k * ctx.cost_v;
            let pn = ctx.water_fill(w2, h2, c.d2);
            let wide = first_user_power(ctx, duals, w1, h1, p1_0, ctx.p_max);
            if wide <= pn {
                let p1 = first_user_power(ctx, duals, w1, h1, p1_0, pn);
                return Allocation::Noma { p1, p2: pn - p1 };
            }
            // The first user wants more than the whole pair gets, so the
            // coupling binds: p₁ = p_n = x with the sum of both slopes zero.
            let slope = |x: f64| {
                w1 * h1 / (s2 + x * h1) + v / x + c.q + w2 * h2 / (s2 + x * h2) + c.d2
            };
            let lo = pn.max(P_MIN);
            let hi = wide.min(ctx.p_max).max(lo);
            let (s_lo, s_hi) = (slope(lo), slope(hi));
            let x = if s_lo <= 0.0 {
                lo
            } else if s_hi >= 0.0 {
                hi
            } else {
                illinois(slope, lo, s_lo, hi, s_hi, 1e-15 * hi, 200)
            };
            Allocation::Noma { p1: x, p2: 0.0 }
        }
    }
}

/// Maximizer of the first-user terms of the NOMA Lagrangian over `(0, cap]`.
fn first_user_power(ctx: &ClosedFormContext, duals: &DualVariables, w1: f64, h1: f64, start: f64, cap: f64) -> f64 {
    let s2 = ctx.noise_var;
    let v = ctx.kappa * ctx.cost_v;
    let c = ctx.coefficients(duals);
    let lag = |p1: f64| ctx.noma_lagrangian(duals, p1, cap);
    let candidates: Vec<f64> = if c.q.abs() < 1e-12 {
        // Linear: (w₁h₁ + vh₁ + σ²Q)p + vσ² = 0 with Q ≈ 0.
        let b = w1 * h1 + v * h1 + s2 * c.q;
        if b != 0.0 {
            vec![-v * s2 / b]
        } else {
            Vec::new()
        }
    } else {
        match quadratic_roots(c.q * h1, w1 * h1 + v * h1 + s2 * c.q, v * s2) {
            Some((a, b)) => vec![a, b],
            None => {
                let lo = P_MIN;
                let hi = (cap - P_MIN).max(lo);
                return if lag(lo) >= lag(hi) { lo } else { hi };
            }
        }
    };
    let inside: Vec<f64> = candidates.into_iter().filter(|&p| p > 0.0 && p < cap).collect();
    match inside.as_slice() {
        [] if v == 0.0 && cap > 0.0 => {
            // Without the cost term the first user may sit at zero.
            if w1 * h1 / s2 + c.q <= 0.0 {
                0.0
            } else {
                gradient_fallback(&lag, start, cap)
            }
        }
        [] => gradient_fallback(&lag, start, cap),
        [p] => *p,
        [a, b, ..] => {
            if lag(*a) >= lag(*b) {
                *a
            } else {
                *b
            }
        }
    }
}

/// Projected gradient ascent with Armijo backtracking on `[P_MIN, pn − P_MIN]`.
fn gradient_fallback(lag: &impl Fn(f64) -> f64, start: f64, pn: f64) -> f64 {
    let lo = P_MIN.min(pn);
    let hi = (pn - P_MIN).max(lo);
    let mut x = start.clamp(lo, hi);
    let mut fx = lag(x);
    for _ in 0..200 {
        let e = 1e-7 * (1.0 + x.abs());
        let grad = (lag((x + e).min(hi)) - lag((x - e).max(lo))) / ((x + e).min(hi) - (x - e).max(lo));
        if !grad.is_finite() || grad.abs() < 1e-13 {
            break;
        }
        let mut step = (hi - lo).max(1e-12);
        let mut moved = false;
        while step > 1e-16 * (1.0 + x) {
            let y = (x + step * grad.signum()).clamp(lo, hi);
            let fy = lag(y);
            if fy >= fx + 1e-4 * grad * (y - x) && y != x {
                x = y;
                fx = fy;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    x
}

/// Maximizer of the inner Lagrangian of one subcarrier with the SIC row
/// enforced exactly, for the given `λ` and `η` (γ and ζ ignored). Returns
/// the allocation and the SIC multiplier `γ_n` it implies.
pub(crate) fn solve_with_sic(ctx: &ClosedFormContext, lambda: &[f64], eta: f64) -> (Allocation, f64) {
    let k = ctx.kappa;
    let s2 = ctx.noise_var;
    match ctx.kind {
        SubcarrierKind::Oma { sp, h, .. } => {
            (Allocation::Oma { p: ctx.water_fill(k * (1.0 + lambda[sp]), h, -eta) }, 0.0)
        }
        SubcarrierKind::Noma { sp_first, sp_second, h1, h2, .. } => {
            let (c1, c2) = ctx.slopes();
            let w1 = k * (1.0 + lambda[sp_first]);
            let w2 = k * (1.0 + lambda[sp_second]);
            let v = k * ctx.cost_v;
            let d2 = -ctx.cost_v * c2 - eta;
            let q = -(1.0 + lambda[sp_second]) * c1 + ctx.cost_v * c2;
            let delta = ctx.sic_gap();
            // Derivatives of the γ-free Lagrangian in p_n and p₁.
            let g = |pn: f64| w2 * h2 / (s2 + pn * h2) + d2;
            let f = |p1: f64| w1 * h1 / (s2 + p1 * h1) + v / p1 + q;

            let pn_free = ctx.water_fill(w2, h2, d2);
            let p1_free = if q < 0.0 {
                if v > 0.0 {
                    quadratic_roots(q * h1, w1 * h1 + v * h1 + s2 * q, v * s2)
                        .map(|(a, b)| a.max(b))
                        .unwrap_or(f64::INFINITY)
                } else {
                    (-w1 / q - s2 / h1).max(0.0)
                }
            } else {
                f64::INFINITY
            };
            if p1_free.is_finite() && pn_free - 2.0 * p1_free >= delta {
                return (Allocation::Noma { p1: p1_free, p2: pn_free - p1_free }, 0.0);
            }
            if delta >= ctx.p_max {
                // SIC cannot be met inside the power box.
                return (Allocation::Noma { p1: 0.0, p2: ctx.p_max }, 0.0);
            }

            // SIC active: p₁ = (p_n − δ)/2 and φ'(p_n) = g(p_n) + f(p₁)/2,
            // which decreases in p_n. Scaling by p₁ > 0 keeps the sign and
            // removes the V/p₁ pole at p_n = δ.
            let psi = |pn: f64| {
                let p1 = 0.5 * (pn - delta);
                p1 * g(pn) + 0.5 * (w1 * h1 * p1 / (s2 + p1 * h1) + v + q * p1)
            };
            let omega_at_delta = g(delta) + 0.5 * (w1 * h1 / s2 + q);
            let hi = ctx.p_max;
            let pn = if psi(hi) >= 0.0 {
                hi
            } else if v > 0.0 {
                illinois(psi, delta, 0.5 * v, hi, psi(hi), 1e-15 * hi, 200)
            } else if omega_at_delta <= 0.0 {
                delta
            } else {
                let omega = |pn: f64| g(pn) + 0.5 * f(0.5 * (pn - delta));
                illinois(omega, delta, omega_at_delta, hi, omega(hi), 1e-15 * hi, 200)
            };
            let p1 = (0.5 * (pn - delta)).max(0.0);
            let gamma = if p1 > 0.0 {
                (f(p1) * s2 / (2.0 * h1)).max(0.0)
            } else {
                (-g(pn) * s2 / h1).max(0.0)
            };
            (Allocation::Noma { p1, p2: pn - p1 }, gamma)
        }
    }
}

/// Derivative of the η-free Lagrangian with respect to the subcarrier total
/// along the path [`solve_with_sic`] follows, at `alloc`. This is the budget
/// multiplier that makes a subcarrier holding all of `P_max` stationary.
pub(crate) fn budget_marginal(ctx: &ClosedFormContext, lambda: &[f64], alloc: &Allocation) -> f64 {
    let k = ctx.kappa;
    let s2 = ctx.noise_var;
    match (ctx.kind, *alloc) {
        (SubcarrierKind::Oma { sp, h, .. }, Allocation::Oma { p }) => k * (1.0 + lambda[sp]) * h / (s2 + p * h),
        (SubcarrierKind::Noma { sp_first, sp_second, h1, h2, .. }, Allocation::Noma { p1, p2 }) => {
            let (c1, c2) = ctx.slopes();
            let pn = p1 + p2;
            let g = k * (1.0 + lambda[sp_second]) * h2 / (s2 + pn * h2) - ctx.cost_v * c2;
            if pn - 2.0 * p1 > ctx.sic_gap() * (1.0 + 1e-9) || p1 <= 0.0 {
                g
            } else {
                let q = -(1.0 + lambda[sp_second]) * c1 + ctx.cost_v * c2;
                let f = k * (1.0 + lambda[sp_first]) * h1 / (s2 + p1 * h1) + k * ctx.cost_v / p1 + q;
                g + 0.5 * f
            }
        }
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{AccessDecision, Matrix};

    fn nat_instance(users: usize, sps: usize) -> NetworkInstance {
        let mut inst = NetworkInstance::round_robin(users, 1, sps, 0.0).unwrap();
        inst.log_base = std::f64::consts::E;
        inst
    }

    fn oma_ctx(h: f64) -> ClosedFormContext {
        let inst = nat_instance(1, 1);
        let ch = ChannelRealization::new(vec![[0.0; 2]], Matrix::filled(1, 1, h)).unwrap();
        ClosedFormContext::new(&inst, &ch, SubcarrierMode::Oma { user: 0 }, 0, &PowerMatrix::zeros(1, 1)).unwrap()
    }

    #[test]
    fn oma_water_filling_examples() {
        let mut duals = DualVariables::zeros(1, 1, 1);
        duals.eta = 1.0;
        assert_eq!(closed_form_update(&oma_ctx(1.0), &duals), Allocation::Oma { p: 0.0 });
        match closed_form_update(&oma_ctx(4.0), &duals) {
            Allocation::Oma { p } => assert!((p - 0.75).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    fn noma_ctx(h1: f64, h2: f64, v: f64, p0: (f64, f64)) -> ClosedFormContext {
        let mut inst = nat_instance(2, 2);
        inst.cost_v = v;
        let ch = ChannelRealization::new(vec![[0.0; 2]; 2], Matrix::from_vec(2, 1, vec![h1, h2]).unwrap()).unwrap();
        let mut e = PowerMatrix::zeros(2, 1);
        e[(0, 0)] = p0.0;
        e[(1, 0)] = p0.1;
        let d = AccessDecision::from_modes(2, &[SubcarrierMode::Noma { first: 0, second: 1 }]).unwrap();
        ClosedFormContext::new(&inst, &ch, d.mode(0), 0, &e).unwrap()
    }

    #[test]
    fn noma_root_beats_a_fine_grid() {
        let ctx = noma_ctx(6.0, 1.5, 2.0, (1.0, 3.0));
        let mut duals = DualVariables::zeros(2, 2, 1);
        duals.eta = 0.05;
        duals.lambda = vec![0.3, 0.8];
        duals.gamma[0] = 0.02;
        let Allocation::Noma { p1, p2 } = closed_form_update(&ctx, &duals) else { panic!() };
        let pn = p1 + p2;
        let best = (1..10_000)
            .map(|i| pn * i as f64 / 10_000.0)
            .map(|x| ctx.noma_lagrangian(&duals, x, pn))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(ctx.noma_lagrangian(&duals, p1, pn) >= best - 1e-12);
    }

    #[test]
    fn exact_sic_solution_is_reproduced_by_the_closed_form() {
        for &(h1, h2, v, eta) in &[(6.0, 1.5, 2.0, 0.05), (2.0, 1.9, 2.0, 0.2), (9.0, 0.5, 0.5, 0.01)] {
            let ctx = noma_ctx(h1, h2, v, (2.0, 5.0));
            let lambda = [0.1, 0.4];
            let (alloc, gamma) = solve_with_sic(&ctx, &lambda, eta);
            let mut duals = DualVariables::zeros(2, 2, 1);
            duals.lambda = lambda.to_vec();
            duals.eta = eta;
            duals.gamma[0] = gamma;
            let again = closed_form_update(&ctx, &duals);
            let (Allocation::Noma { p1: a1, p2: a2 }, Allocation::Noma { p1: b1, p2: b2 }) = (alloc, again) else {
                panic!()
            };
            assert!((a1 - b1).abs() < 1e-8 * (1.0 + a1), "{a1} {b1}");
            assert!((a2 - b2).abs() < 1e-8 * (1.0 + a2), "{a2} {b2}");
            let slack = (a2 - a1) * h1 / ctx.noise_var - ctx.p_d;
            assert!(slack >= -1e-9);
            assert!(gamma == 0.0 || slack.abs() < 1e-9);
        }
    }

    #[test]
    fn coupled_pair_beats_a_joint_grid() {
        let mut duals = DualVariables::zeros(2, 2, 1);
        duals.eta = 0.05;
        for v in [0.5, 2.0, 4.0] {
            let ctx = noma_ctx(6.0, 1.5, v, (1.0, 3.0));
            let Allocation::Noma { p1, p2 } = closed_form_update(&ctx, &duals) else { panic!() };
            assert!(p1 > 0.0 && p2 >= 0.0 && p1 + p2 <= ctx.p_max);
            let got = ctx.noma_lagrangian(&duals, p1, p1 + p2);
            let steps = 400;
            let mut best = f64::NEG_INFINITY;
            for i in 1..=steps {
                for j in i..=steps {
                    let (x, y) = (ctx.p_max * i as f64 / steps as f64, ctx.p_max * j as f64 / steps as f64);
                    best = best.max(ctx.noma_lagrangian(&duals, x, y));
                }
            }
            assert!(got >= best - 1e-12, "v {v}: {got} < {best}");
        }
    }
}

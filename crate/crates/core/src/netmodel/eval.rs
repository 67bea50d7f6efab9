//! Exact evaluators, written term by term over the α/β tensors.

use super::{AccessDecision, ChannelRealization, NetworkInstance, PowerMatrix, P_MIN};

pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-6;

/// Sum rate carried by subcarrier `n`.
pub fn subcarrier_rate(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    p: &PowerMatrix,
    n: usize,
) -> f64 {
    let s2 = inst.noise_var;
    let mut rate = 0.0;
    for k in 0..inst.users {
        if !d.alpha(k, k, n) {
            continue;
        }
        rate += inst.log(1.0 + p[(k, n)] * ch.gain(k, n) / s2);
        if d.beta(n) {
            for k2 in (0..inst.users).filter(|&k2| k2 != k && d.alpha(k, k2, n)) {
                let h2 = ch.gain(k2, n);
                rate += inst.log(1.0 + p[(k2, n)] * h2 / (p[(k, n)] * h2 + s2));
            }
        }
    }
    rate
}

/// Rate delivered to the users of SP `s`: OMA/first-user rates plus the
/// second-user rates of pairs whose weak user belongs to `s`.
pub fn sp_rate(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    p: &PowerMatrix,
    s: usize,
) -> f64 {
    let s2 = inst.noise_var;
    let mut rate = 0.0;
    for k in inst.users_of(s) {
        for n in 0..inst.subcarriers {
            let h = ch.gain(k, n);
            if d.alpha(k, k, n) {
                rate += inst.log(1.0 + p[(k, n)] * h / s2);
            }
            if d.beta(n) {
                for k1 in (0..inst.users).filter(|&k1| k1 != k) {
                    if d.alpha(k1, k, n) && d.alpha(k1, k1, n) {
                        rate += inst.log(1.0 + p[(k, n)] * h / (p[(k1, n)] * h + s2));
                    }
                }
            }
        }
    }
    rate
}

/// NOMA processing cost `F_n` of subcarrier `n`, before gating by `β_n`.
pub fn noma_cost(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    p: &PowerMatrix,
    n: usize,
) -> f64 {
    let s2 = inst.noise_var;
    let mut cost = inst.cost_a;
    if inst.cost_v == 0.0 {
        return cost;
    }
    for k in (0..inst.users).filter(|&k| d.alpha(k, k, n)) {
        let h = ch.gain(k, n);
        for k2 in (0..inst.users).filter(|&k2| k2 != k && d.alpha(k, k2, n)) {
            let ratio = (h * p[(k2, n)] + s2) / (h * p[(k, n)].max(P_MIN));
            cost += inst.cost_v * inst.log(ratio);
        }
    }
    cost
}

pub fn total_rate(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    p: &PowerMatrix,
) -> f64 {
    (0..inst.subcarriers)
        .map(|n| subcarrier_rate(inst, ch, d, p, n))
        .sum()
}

/// Total rate minus the β-gated NOMA cost.
pub fn total_utility(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    p: &PowerMatrix,
) -> f64 {
    (0..inst.subcarriers)
        .map(|n| {
            let r = subcarrier_rate(inst, ch, d, p, n);
            if d.beta(n) {
                r - noma_cost(inst, ch, d, p, n)
            } else {
                r
            }
        })
        .sum()
}

/// Slack of every master-problem constraint for one (decision, power) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintReport {
    /// SP rate minus its target, per SP.
    pub sp_rate_slack: Vec<f64>,
    /// Normalized received-power separation minus `P_d`, per subcarrier
    /// (zero on OMA subcarriers).
    pub sic_slack: Vec<f64>,
    /// Pairs whose second user has the stronger channel.
    pub ordering_violations: usize,
    /// Subcarriers breaking a pairing/selection cardinality rule.
    pub cardinality_violations: usize,
    /// Powers that are negative or given to an unassigned user.
    pub power_link_violations: usize,
    pub total_power_slack: f64,
    pub tolerance: f64,
    pub feasible: bool,
}

impl ConstraintReport {
    /// Largest violation among the continuous slacks (0 when all hold).
    pub fn max_violation(&self) -> f64 {
        self.sp_rate_slack
            .iter()
            .chain(&self.sic_slack)
            .chain(std::iter::once(&self.total_power_slack))
            .fold(0.0_f64, |m, &s| m.max(-s))
    }

    pub fn sp_rates_met(&self) -> bool {
        self.sp_rate_slack.iter().all(|&s| s >= -self.tolerance)
    }
}

pub fn check_feasibility(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    p: &PowerMatrix,
    tol: f64,
) -> ConstraintReport {
    let s2 = inst.noise_var;
    let sp_rate_slack: Vec<f64> = (0..inst.service_providers())
        .map(|s| sp_rate(inst, ch, d, p, s) - inst.min_rate[s])
        .collect();

    let mut sic_slack = vec![0.0; inst.subcarriers];
    let mut ordering_violations = 0;
    let mut cardinality_violations = 0;
    let mut power_link_violations = 0;
    let mut used_power = 0.0;

    for n in 0..inst.subcarriers {
        let beta = if d.beta(n) { 1.0 } else { 0.0 };
        let mut firsts = 0usize;
        let mut pairs = 0usize;
        let mut separation = 0.0;
        for k in 0..inst.users {
            let first = d.alpha(k, k, n);
            let hk = ch.gain(k, n);
            if first {
                firsts += 1;
                used_power += p[(k, n)];
            }
            let mut partner_power = 0.0;
            for k2 in (0..inst.users).filter(|&k2| k2 != k && d.alpha(k, k2, n)) {
                pairs += 1;
                partner_power += p[(k2, n)];
                if first {
                    used_power += p[(k2, n)];
                }
                if ch.gain(k2, n) > hk {
                    ordering_violations += 1;
                }
            }
            if first {
                separation += hk / s2 * (partner_power - p[(k, n)]);
            }

            let link: f64 = (0..inst.users)
                .filter(|&k1| d.alpha(k1, k, n))
                .count() as f64
                * inst.p_max;
            let pk = p[(k, n)];
            if pk < -tol || pk - link > tol {
                power_link_violations += 1;
            }
        }
        sic_slack[n] = beta * separation - beta * inst.p_d;
        let pair_product = (0..inst.users)
            .filter(|&k| d.alpha(k, k, n))
            .map(|k| {
                (0..inst.users)
                    .filter(|&k2| k2 != k && d.alpha(k, k2, n))
                    .count()
            })
            .sum::<usize>();
        if firsts > 1 || pairs > 1 || usize::from(d.beta(n)) != pair_product {
            cardinality_violations += 1;
        }
    }

    let total_power_slack = inst.p_max - used_power;
    let feasible = sp_rate_slack.iter().all(|&s| s >= -tol)
        && sic_slack.iter().all(|&s| s >= -tol)
        && total_power_slack >= -tol
        && ordering_violations == 0
        && cardinality_violations == 0
        && power_link_violations == 0;

    ConstraintReport {
        sp_rate_slack,
        sic_slack,
        ordering_violations,
        cardinality_violations,
        power_link_violations,
        total_power_slack,
        tolerance: tol,
        feasible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Matrix, SubcarrierMode};

    fn unit_instance(users: usize, subcarriers: usize) -> NetworkInstance {
        let mut inst = NetworkInstance::round_robin(users, subcarriers, 1, 0.0).unwrap();
        inst.noise_var = 1.0;
        inst
    }

    fn channel(gains: Matrix) -> ChannelRealization {
        let k = gains.rows();
        ChannelRealization::new(vec![[0.0, 0.0]; k], gains).unwrap()
    }

    #[test]
    fn oma_single_user_unit_rate() {
        let inst = unit_instance(1, 1);
        let ch = channel(Matrix::filled(1, 1, 1.0));
        let d = AccessDecision::from_modes(1, &[SubcarrierMode::Oma { user: 0 }]).unwrap();
        let p = PowerMatrix::uniform(1, 1, 1.0);
        assert!((subcarrier_rate(&inst, &ch, &d, &p, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noma_pair_rate_and_cost() {
        let inst = unit_instance(2, 1);
        let ch = channel(Matrix::filled(2, 1, 1.0));
        let d = AccessDecision::from_modes(2, &[SubcarrierMode::Noma { first: 0, second: 1 }])
            .unwrap();
        let mut p = PowerMatrix::zeros(2, 1);
        p[(0, 0)] = 1.0;
        p[(1, 0)] = 3.0;
        let expected = 1.0 + 2.5f64.log2();
        assert!((subcarrier_rate(&inst, &ch, &d, &p, 0) - expected).abs() < 1e-14);

        p[(1, 0)] = 1.0;
        assert!((noma_cost(&inst, &ch, &d, &p, 0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn second_user_term_vanishes_without_beta() {
        let inst = unit_instance(2, 1);
        let ch = channel(Matrix::filled(2, 1, 1.0));
        let mut d = AccessDecision::empty(2, 1);
        d.set_alpha(0, 0, 0, true);
        d.set_alpha(0, 1, 0, true);
        let p = PowerMatrix::uniform(2, 1, 1.0);
        assert!((subcarrier_rate(&inst, &ch, &d, &p, 0) - 1.0).abs() < 1e-15);
        assert_eq!(total_utility(&inst, &ch, &d, &p), subcarrier_rate(&inst, &ch, &d, &p, 0));
    }

    #[test]
    fn zero_cost_slope_is_a_constant() {
        let mut inst = unit_instance(2, 1);
        inst.cost_v = 0.0;
        let ch = channel(Matrix::from_vec(2, 1, vec![3.0, 0.5]).unwrap());
        let d = AccessDecision::from_modes(2, &[SubcarrierMode::Noma { first: 0, second: 1 }])
            .unwrap();
        let mut p = PowerMatrix::zeros(2, 1);
        p[(0, 0)] = 0.3;
        p[(1, 0)] = 7.0;
        assert_eq!(noma_cost(&inst, &ch, &d, &p, 0), inst.cost_a);
    }

    #[test]
    fn empty_decision_is_feasible() {
        let inst = unit_instance(3, 2);
        let ch = channel(Matrix::filled(3, 2, 1.0));
        let d = AccessDecision::empty(3, 2);
        let r = check_feasibility(&inst, &ch, &d, &PowerMatrix::zeros(3, 2), 1e-6);
        assert!(r.feasible);
        assert_eq!(r.total_power_slack, inst.p_max);
    }

    #[test]
    fn sic_separation_below_threshold_is_infeasible() {
        let mut inst = unit_instance(2, 1);
        inst.p_d = 0.5;
        let ch = channel(Matrix::filled(2, 1, 1.0));
        let d = AccessDecision::from_modes(2, &[SubcarrierMode::Noma { first: 0, second: 1 }])
            .unwrap();
        let mut p = PowerMatrix::zeros(2, 1);
        p[(0, 0)] = 1.0;
        p[(1, 0)] = 1.2;
        let r = check_feasibility(&inst, &ch, &d, &p, 1e-6);
        assert!((r.sic_slack[0] - (0.2 - 0.5)).abs() < 1e-12);
        assert!(!r.feasible);
    }

    #[test]
    fn total_power_boundary() {
        let inst = unit_instance(1, 2);
        let ch = channel(Matrix::filled(1, 2, 1.0));
        let d = AccessDecision::from_modes(
            1,
            &[SubcarrierMode::Oma { user: 0 }, SubcarrierMode::Oma { user: 0 }],
        )
        .unwrap();
        let mut p = PowerMatrix::uniform(1, 2, inst.p_max / 2.0);
        assert!(check_feasibility(&inst, &ch, &d, &p, 1e-6).feasible);
        p[(0, 1)] += 1e-3;
        let r = check_feasibility(&inst, &ch, &d, &p, 1e-6);
        assert!(!r.feasible);
        assert!((r.total_power_slack + 1e-3).abs() < 1e-9);
        p[(0, 1)] -= 1e-3 - 1e-7;
        assert!(check_feasibility(&inst, &ch, &d, &p, 1e-6).feasible);
    }

    #[test]
    fn power_on_unassigned_user_is_a_violation() {
        let inst = unit_instance(2, 1);
        let ch = channel(Matrix::filled(2, 1, 1.0));
        let d = AccessDecision::from_modes(2, &[SubcarrierMode::Oma { user: 0 }]).unwrap();
        let mut p = PowerMatrix::zeros(2, 1);
        p[(1, 0)] = 0.5;
        let r = check_feasibility(&inst, &ch, &d, &p, 1e-6);
        assert_eq!(r.power_link_violations, 1);
        assert!(!r.feasible);
    }
}

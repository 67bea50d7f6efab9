//! Exhaustive search over every per-subcarrier option.
//!
//! Each subcarrier carries one OMA user or one pair (first, second) with
//! `h_second ≤ h_first`, giving `C(K,2) + K` options when gains differ.
//! Every complete assignment is scored by the DC power allocation. A bound
//! that no power allocation can beat lets the search skip assignments
//! without changing its result.

use std::time::{Duration, Instant};

use super::SolutionReport;
use crate::error::{Error, Result};
use crate::netmodel::{
    AccessDecision, ChannelRealization, NetworkInstance, PowerMatrix, SubcarrierMode,
    DEFAULT_FEASIBILITY_TOL,
};
use crate::power::{dc_power_allocation, PowerConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub power: PowerConfig,
    /// Largest number of assignments the search accepts.
    pub enumeration_cap: u128,
    /// Skip assignments whose bound cannot beat the incumbent or whose SP
    /// rates cannot reach their targets.
    pub prune: bool,
    pub feasibility_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            power: PowerConfig::default(),
            enumeration_cap: 1_000_000,
            prune: true,
            feasibility_tol: DEFAULT_FEASIBILITY_TOL,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub report: SolutionReport,
    pub assignments: u128,
    /// Assignments whose powers were actually optimized.
    pub evaluated: usize,
    pub elapsed: Duration,
}

/// `(C(K,2) + K)^N`.
pub fn assignment_count(users: usize, subcarriers: usize) -> u128 {
    let per = (users * users.saturating_sub(1) / 2 + users) as u128;
    per.checked_pow(subcarriers as u32).unwrap_or(u128::MAX)
}

fn options(inst: &NetworkInstance, ch: &ChannelRealization, n: usize) -> Vec<SubcarrierMode> {
    let mut out: Vec<SubcarrierMode> = (0..inst.users).map(|user| SubcarrierMode::Oma { user }).collect();
    for a in 0..inst.users {
        for b in a + 1..inst.users {
            let (ha, hb) = (ch.gain(a, n), ch.gain(b, n));
            if hb <= ha {
                out.push(SubcarrierMode::Noma { first: a, second: b });
            }
            if ha <= hb {
                out.push(SubcarrierMode::Noma { first: b, second: a });
            }
        }
    }
    out
}

/// Largest `Σ log(1 + p_n g_n/σ²)` over `Σ p_n ≤ budget`, by water-filling.
fn water_filled_rate(inst: &NetworkInstance, gains: &mut [f64]) -> f64 {
    let s2 = inst.noise_var;
    gains.sort_by(|a, b| b.total_cmp(a));
    let mut level = 0.0;
    let mut used = 0;
    let mut inv_sum = 0.0;
    for (i, g) in gains.iter().enumerate() {
        let candidate_sum = inv_sum + s2 / g;
        let mu = (inst.p_max + candidate_sum) / (i + 1) as f64;
        if mu <= s2 / g {
            break;
        }
        inv_sum = candidate_sum;
        level = mu;
        used = i + 1;
    }
    gains[..used].iter().map(|g| inst.log(level * g / s2)).sum()
}

/// Upper bounds on utility and on every SP rate for an assignment. A NOMA
/// pair never delivers more than all its power on the stronger user and
/// always pays at least `A`.
fn bounds(inst: &NetworkInstance, ch: &ChannelRealization, modes: &[SubcarrierMode], scratch: &mut Vec<f64>) -> (f64, Vec<f64>) {
    scratch.clear();
    let mut pairs = 0usize;
    for (n, m) in modes.iter().enumerate() {
        match *m {
            SubcarrierMode::Idle => {}
            SubcarrierMode::Oma { user } => scratch.push(ch.gain(user, n)),
            SubcarrierMode::Noma { first, .. } => {
                scratch.push(ch.gain(first, n));
                pairs += 1;
            }
        }
    }
    let utility = water_filled_rate(inst, scratch) - inst.cost_a * pairs as f64;
    let rates = (0..inst.service_providers())
        .map(|s| {
            scratch.clear();
            for (n, m) in modes.iter().enumerate() {
                let g = match *m {
                    SubcarrierMode::Idle => None,
                    SubcarrierMode::Oma { user } => (inst.sp_of[user] == s).then(|| ch.gain(user, n)),
                    SubcarrierMode::Noma { first, second } => {
                        if inst.sp_of[first] == s {
                            Some(ch.gain(first, n))
                        } else if inst.sp_of[second] == s {
                            Some(ch.gain(second, n))
                        } else {
                            None
                        }
                    }
                };
                scratch.extend(g);
            }
            water_filled_rate(inst, scratch)
        })
        .collect();
    (utility, rates)
}

/// Best feasible assignment over the whole option space, each scored by
/// [`dc_power_allocation`] from uniform powers.
pub fn exhaustive_oracle(inst: &NetworkInstance, ch: &ChannelRealization, cfg: &OracleConfig) -> Result<OracleReport> {
    inst.validate()?;
    ch.check_against(inst)?;
    cfg.power.validate()?;
    let clock = Instant::now();
    let (kk, nn) = (inst.users, inst.subcarriers);
    let per: Vec<Vec<SubcarrierMode>> = (0..nn).map(|n| options(inst, ch, n)).collect();
    let total: u128 = per.iter().map(|o| o.len() as u128).product();
    if total > cfg.enumeration_cap {
        return Err(Error::EnumerationCap { required: total, cap: cfg.enumeration_cap });
    }
    let total_usize = total as usize;
    let decode = |mut idx: usize| -> Vec<SubcarrierMode> {
        per.iter()
            .map(|o| {
                let m = o[idx % o.len()];
                idx /= o.len();
                m
            })
            .collect()
    };

    let mut order: Vec<(f64, usize)> = Vec::with_capacity(total_usize);
    let mut scratch = Vec::with_capacity(nn);
    for idx in 0..total_usize {
        if !cfg.prune {
            order.push((f64::INFINITY, idx));
            continue;
        }
        let modes = decode(idx);
        let (ub, rates) = bounds(inst, ch, &modes, &mut scratch);
        let reachable = rates
            .iter()
            .zip(&inst.min_rate)
            .all(|(r, m)| *r >= m - cfg.feasibility_tol);
        if reachable {
            order.push((ub, idx));
        }
    }
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let init = PowerMatrix::uniform(kk, nn, inst.p_max / (2.0 * nn as f64));
    let mut best: Option<(f64, usize, AccessDecision, PowerMatrix)> = None;
    let mut evaluated = 0usize;
    for &(ub, idx) in &order {
        if let Some((b, _, _, _)) = &best {
            if ub <= *b {
                break;
            }
        }
        let d = AccessDecision::from_modes(kk, &decode(idx))?;
        let res = dc_power_allocation(inst, ch, &d, &init, &cfg.power)?;
        evaluated += 1;
        if !res.feasible {
            continue;
        }
        let better = match &best {
            None => true,
            Some((b, bi, _, _)) => res.objective > *b || (res.objective == *b && idx < *bi),
        };
        if better {
            best = Some((res.objective, idx, d, res.powers));
        }
    }

    let report = match best {
        Some((_, _, d, p)) => SolutionReport::evaluate(inst, ch, d, p, cfg.feasibility_tol),
        None => {
            let d = AccessDecision::empty(kk, nn);
            let mut r = SolutionReport::evaluate(inst, ch, d, PowerMatrix::zeros(kk, nn), cfg.feasibility_tol);
            r.feasible = false;
            r.utility = 0.0;
            r
        }
    };
    Ok(OracleReport {
        report,
        assignments: total,
        evaluated,
        elapsed: clock.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::Matrix;

    #[test]
    fn option_counts() {
        assert_eq!(assignment_count(6, 3), 9261);
        assert_eq!(assignment_count(6, 4), 194_481);
        assert_eq!(assignment_count(2, 1), 3);
        let inst = NetworkInstance::round_robin(2, 1, 1, 0.0).unwrap();
        let ch = ChannelRealization::new(vec![[0.0; 2]; 2], Matrix::from_vec(2, 1, vec![2.0, 1.0]).unwrap()).unwrap();
        assert_eq!(
            options(&inst, &ch, 0),
            vec![
                SubcarrierMode::Oma { user: 0 },
                SubcarrierMode::Oma { user: 1 },
                SubcarrierMode::Noma { first: 0, second: 1 }
            ]
        );
    }

    #[test]
    fn water_filling_bound_matches_closed_form() {
        let mut inst = NetworkInstance::round_robin(1, 2, 1, 0.0).unwrap();
        inst.p_max = 10.0;
        inst.log_base = std::f64::consts::E;
        // Levels: μ = (10 + 1 + 0.5)/2 = 5.75, both active.
        let mut g = vec![1.0, 2.0];
        let r = water_filled_rate(&inst, &mut g);
        assert!((r - (5.75f64.ln() + 11.5f64.ln())).abs() < 1e-12);
        // A very weak subcarrier is left dry.
        let mut g = vec![1.0, 1e-6];
        assert!((water_filled_rate(&inst, &mut g) - 11f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let inst = NetworkInstance::round_robin(6, 5, 2, 0.0).unwrap();
        let ch = ChannelRealization::new(vec![[0.0; 2]; 6], Matrix::filled(6, 5, 1.0)).unwrap();
        let err = exhaustive_oracle(&inst, &ch, &OracleConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { .. }));
    }
}

//! Two-step alternation between assignment and power allocation, the
//! exhaustive-search oracle and Monte-Carlo helpers.

mod montecarlo;
mod oracle;

use std::time::{Duration, Instant};

pub use crate::assignment::Mode;
use crate::assignment::{build_step1, solve_step1, Step1Solution};
use crate::error::{Error, Result};
use crate::netmodel::{
    check_feasibility, sp_rate, total_rate, total_utility, AccessDecision, ChannelRealization,
    NetworkInstance, PowerMatrix, SubcarrierMode, DEFAULT_FEASIBILITY_TOL,
};
use crate::power::{dc_power_allocation, DcTrace, PowerConfig};

pub use montecarlo::{outage_probability, run_trials, trial_seed, OutageEstimate, Scenario, TrialOutcome};
pub use oracle::{assignment_count, exhaustive_oracle, OracleConfig, OracleReport};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub eps_beta: f64,
    pub eps_alpha: f64,
    pub eps_p: f64,
    pub max_outer_iters: usize,
    /// Outer iterations without a better feasible utility before stopping.
    pub patience: usize,
    pub power: PowerConfig,
    pub mode: Mode,
    pub feasibility_tol: f64,
    /// Relative optimality gap of the Step-1 branch-and-bound.
    pub step1_gap: f64,
    /// Node budget of the Step-1 branch-and-bound; the best incumbent found
    /// within it is used.
    pub step1_node_limit: usize,
    /// Give users without power on a subcarrier a nominal power when the
    /// next Step 1 is built, so that they can still be assigned there.
    pub reseed_unassigned: bool,
    /// Also run the alternation from `P_max/N` per user, which does not
    /// favour pairs in the first Step 1, and keep the better result.
    pub second_start: bool,
    /// When the hybrid alternation finds no feasible point, also run the
    /// pure-OMA and pure-NOMA alternations, whose decisions are hybrid
    /// decisions too.
    pub pure_fallback: bool,
    /// Also run the pure-OMA alternation under `Hybrid` and keep the better
    /// result, so that a hybrid solve never ends below its OMA restriction.
    pub oma_floor: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_beta: 0.5,
            eps_alpha: 0.5,
            eps_p: 1e-4,
            max_outer_iters: 20,
            patience: 3,
            power: PowerConfig::default(),
            mode: Mode::Hybrid,
            feasibility_tol: DEFAULT_FEASIBILITY_TOL,
            step1_gap: 1e-4,
            step1_node_limit: 1000,
            reseed_unassigned: true,
            second_start: true,
            pure_fallback: true,
            oma_floor: true,
        }
    }
}

impl SolverConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self { mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.eps_beta) || !unit(self.eps_alpha) || !unit(self.eps_p) {
            return Err(Error::Config("outer tolerances must lie in (0, 1)".into()));
        }
        if self.max_outer_iters == 0 || self.patience == 0 || self.step1_node_limit == 0 {
            return Err(Error::Config("outer iteration caps must be at least 1".into()));
        }
        if !(self.step1_gap.is_finite() && (0.0..1.0).contains(&self.step1_gap)) {
            return Err(Error::Config("Step-1 gap must lie in [0, 1)".into()));
        }
        if !(self.feasibility_tol.is_finite() && self.feasibility_tol >= 0.0) {
            return Err(Error::Config("feasibility tolerance must be non-negative".into()));
        }
        self.power.validate()
    }
}

/// One pass of Step 1 followed by power allocation.
#[derive(Clone, Debug)]
pub struct OuterRecord {
    /// Index of the start that produced it, in the order the solver ran
    /// them.
    pub start: usize,
    pub t: usize,
    /// Step-1 objective at the new decision and the powers it was built on.
    pub step1_objective: f64,
    /// Step 1 only met the SP targets after scaling them by this factor.
    pub rate_scale: f64,
    pub utility: f64,
    pub feasible: bool,
    pub beta_change: f64,
    pub alpha_change: f64,
    pub power_change: f64,
    pub noma_subcarriers: usize,
    pub dc: DcTrace,
}

#[derive(Clone, Debug)]
pub struct SolutionReport {
    pub decision: AccessDecision,
    pub powers: PowerMatrix,
    /// Total utility, or 0 when no feasible point was found.
    pub utility: f64,
    /// Total utility of the returned point whether or not it is feasible.
    pub raw_utility: f64,
    pub total_rate: f64,
    pub sp_rates: Vec<f64>,
    pub feasible: bool,
    pub outer_iterations: usize,
    pub converged: bool,
    pub modes: Vec<SubcarrierMode>,
    pub noma_subcarriers: usize,
    pub noma_fallbacks: usize,
    pub step1_time: Duration,
    pub power_time: Duration,
    pub history: Vec<OuterRecord>,
}

impl SolutionReport {
    pub(crate) fn evaluate(
        inst: &NetworkInstance,
        ch: &ChannelRealization,
        decision: AccessDecision,
        powers: PowerMatrix,
        tol: f64,
    ) -> Self {
        let feasible = check_feasibility(inst, ch, &decision, &powers, tol).feasible;
        let raw_utility = total_utility(inst, ch, &decision, &powers);
        let modes = decision.modes();
        Self {
            utility: if feasible { raw_utility } else { 0.0 },
            raw_utility,
            total_rate: total_rate(inst, ch, &decision, &powers),
            sp_rates: (0..inst.service_providers())
                .map(|s| sp_rate(inst, ch, &decision, &powers, s))
                .collect(),
            feasible,
            outer_iterations: 0,
            converged: false,
            noma_subcarriers: decision.noma_subcarriers(),
            modes,
            noma_fallbacks: 0,
            step1_time: Duration::ZERO,
            power_time: Duration::ZERO,
            history: Vec::new(),
            decision,
            powers,
        }
    }

    /// Fraction of subcarriers carrying a NOMA pair.
    pub fn noma_fraction(&self) -> f64 {
        self.noma_subcarriers as f64 / self.modes.len().max(1) as f64
    }
}

/// Powers Step 1 is built on: the current powers, with every entry of a
/// user not served on that subcarrier replaced by the subcarrier's current
/// total (or the uniform seed when the subcarrier is idle).
fn step1_powers(inst: &NetworkInstance, d: &AccessDecision, p: &PowerMatrix) -> PowerMatrix {
    let seed = inst.p_max / (2.0 * inst.subcarriers as f64);
    let mut out = p.clone();
    for n in 0..inst.subcarriers {
        let mode = d.mode(n);
        let total: f64 = (0..inst.users).map(|k| p[(k, n)]).sum();
        let nominal = if total > 0.0 { total } else { seed };
        for k in 0..inst.users {
            if !mode.serves(k) {
                out[(k, n)] = nominal;
            }
        }
    }
    out
}

const RESTORE_SCALES: [f64; 4] = [0.75, 0.5, 0.25, 0.0];

/// Step 1 at the given powers. When no assignment meets the SP targets the
/// targets are scaled down until one does, so that the following power
/// step can work towards them.
fn step1(inst: &NetworkInstance, ch: &ChannelRealization, p: &PowerMatrix, cfg: &SolverConfig) -> Result<Option<(Step1Solution, f64)>> {
    let mut prob = build_step1(inst, ch, p, cfg.mode)?;
    prob.rel_gap = cfg.step1_gap;
    prob.node_limit = cfg.step1_node_limit;
    let targets = prob.min_rate.clone();
    for scale in std::iter::once(1.0).chain(RESTORE_SCALES) {
        prob.min_rate = targets.iter().map(|r| r * scale).collect();
        match solve_step1(&prob) {
            Ok(Some(sol)) => return Ok(Some((sol, scale))),
            Ok(None) | Err(Error::Limit(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

struct Run {
    best: Option<(f64, AccessDecision, PowerMatrix)>,
    last: Option<(AccessDecision, PowerMatrix)>,
    converged: bool,
    fallbacks: usize,
}

/// Alternates Step 1 and power allocation from `p`.
#[allow(clippy::too_many_arguments)]
fn alternate(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    cfg: &SolverConfig,
    start: usize,
    mut p: PowerMatrix,
    history: &mut Vec<OuterRecord>,
    step1_time: &mut Duration,
    power_time: &mut Duration,
) -> Result<Run> {
    let mut prev: Option<AccessDecision> = None;
    let mut run = Run { best: None, last: None, converged: false, fallbacks: 0 };
    let mut stale = 0usize;
    for t in 1..=cfg.max_outer_iters {
        let base = match (&prev, cfg.reseed_unassigned) {
            (Some(d), true) => step1_powers(inst, d, &p),
            _ => p.clone(),
        };
        let clock = Instant::now();
        let found = step1(inst, ch, &base, cfg)?;
        *step1_time += clock.elapsed();
        let Some((s1, scale)) = found else { break };
        run.fallbacks = s1.noma_fallbacks;
        let d = s1.decision;

        let clock = Instant::now();
        let res = dc_power_allocation(inst, ch, &d, &base, &cfg.power)?;
        *power_time += clock.elapsed();

        let (beta_change, alpha_change) = match &prev {
            Some(pd) => (d.beta_distance(pd), d.alpha_distance(pd)),
            None => (f64::INFINITY, f64::INFINITY),
        };
        let power_change = res.powers.distance(&p);
        let feasible = check_feasibility(inst, ch, &d, &res.powers, cfg.feasibility_tol).feasible;
        let utility = total_utility(inst, ch, &d, &res.powers);
        history.push(OuterRecord {
            start,
            t,
            step1_objective: s1.objective,
            rate_scale: scale,
            utility,
            feasible,
            beta_change,
            alpha_change,
            power_change,
            noma_subcarriers: d.noma_subcarriers(),
            dc: res.trace,
        });

        if feasible && run.best.as_ref().is_none_or(|(b, _, _)| utility > *b + 1e-9 * b.abs().max(1.0)) {
            run.best = Some((utility, d.clone(), res.powers.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        p = res.powers;
        run.last = Some((d.clone(), p.clone()));
        prev = Some(d);
        if beta_change <= cfg.eps_beta && alpha_change <= cfg.eps_alpha && power_change <= cfg.eps_p {
            run.converged = true;
            break;
        }
        if stale >= cfg.patience {
            break;
        }
    }
    Ok(run)
}

/// Both starts of the alternation in `mode`; keeps the better feasible run.
fn run_mode(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    cfg: &SolverConfig,
    mode: Mode,
    history: &mut Vec<OuterRecord>,
    step1_time: &mut Duration,
    power_time: &mut Duration,
) -> Result<Run> {
    let cfg = SolverConfig { mode, ..cfg.clone() };
    let (kk, nn) = (inst.users, inst.subcarriers);
    let seed = inst.p_max / (2.0 * nn as f64);
    let mut starts = vec![seed];
    if cfg.second_start {
        starts.push(2.0 * seed);
    }
    let mut run: Option<Run> = None;
    for value in starts {
        let start = history.last().map_or(0, |r| r.start + 1);
        let other = alternate(inst, ch, &cfg, start, PowerMatrix::uniform(kk, nn, value), history, step1_time, power_time)?;
        run = Some(match run {
            Some(r) if !better(&other, &r) => r,
            _ => other,
        });
    }
    Ok(run.expect("at least one start"))
}

fn better(a: &Run, b: &Run) -> bool {
    match (&a.best, &b.best) {
        (Some(_), None) => true,
        (Some((x, _, _)), Some((y, _, _))) => x > y,
        _ => false,
    }
}

/// Alternates Step 1 and power allocation from uniform powers until the
/// decision and powers settle. Returns the best feasible iterate, or an
/// infeasible report with zero utility.
pub fn solve(inst: &NetworkInstance, ch: &ChannelRealization, cfg: &SolverConfig) -> Result<SolutionReport> {
    inst.validate()?;
    ch.check_against(inst)?;
    cfg.validate()?;
    let (kk, nn) = (inst.users, inst.subcarriers);
    let mut history = Vec::new();
    let mut step1_time = Duration::ZERO;
    let mut power_time = Duration::ZERO;

    let mut run = run_mode(inst, ch, cfg, cfg.mode, &mut history, &mut step1_time, &mut power_time)?;
    if cfg.mode == Mode::Hybrid {
        for mode in [Mode::PureOma, Mode::PureNoma] {
            let floor = mode == Mode::PureOma && cfg.oma_floor;
            if floor || cfg.pure_fallback && run.best.is_none() {
                let other = run_mode(inst, ch, cfg, mode, &mut history, &mut step1_time, &mut power_time)?;
                if better(&other, &run) {
                    run = other;
                }
            }
        }
    }

    let (decision, powers) = match (run.best, run.last) {
        (Some((_, d, p)), _) => (d, p),
        (None, Some((d, p))) => (d, p),
        (None, None) => (AccessDecision::empty(kk, nn), PowerMatrix::zeros(kk, nn)),
    };
    let mut report = SolutionReport::evaluate(inst, ch, decision, powers, cfg.feasibility_tol);
    report.outer_iterations = history.len();
    report.converged = run.converged;
    report.noma_fallbacks = run.fallbacks;
    report.step1_time = step1_time;
    report.power_time = power_time;
    report.history = history;
    Ok(report)
}

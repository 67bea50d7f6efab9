//! DC outer loop.

use std::io::{self, Write};

use super::dual::solve_surrogate;
use super::surrogate::{surrogate_objective, true_objective};
use super::{DualVariables, PowerConfig};
use crate::error::{Error, Result};
use crate::netmodel::{
    check_feasibility, AccessDecision, ChannelRealization, NetworkInstance, PowerMatrix,
    DEFAULT_FEASIBILITY_TOL,
};

/// One outer iteration `t₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct DcIterate {
    pub t2: usize,
    /// True objective at the new powers.
    pub objective: f64,
    /// Surrogate objective at the new powers.
    pub surrogate_value: f64,
    /// True objective at the expansion point (equal to the surrogate there).
    pub expansion_objective: f64,
    pub expansion_feasible: bool,
    /// The new powers satisfy every surrogate constraint, hence every true
    /// one.
    pub accepted: bool,
    /// The new powers pass the exact feasibility check.
    pub feasible: bool,
    /// `‖p^{t₂} − p^{t₂−1}‖`.
    pub step: f64,
    pub dual_norm: f64,
    pub inner_iterations: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DcTrace {
    pub iterates: Vec<DcIterate>,
    pub converged: bool,
}

impl DcTrace {
    pub fn write_text(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(
            w,
            "t2 objective surrogate expansion_objective expansion_feasible accepted feasible step dual_norm inner"
        )?;
        for it in &self.iterates {
            writeln!(
                w,
                "{} {:.10e} {:.10e} {:.10e} {} {} {} {:.3e} {:.3e} {}",
                it.t2,
                it.objective,
                it.surrogate_value,
                it.expansion_objective,
                u8::from(it.expansion_feasible),
                u8::from(it.accepted),
                u8::from(it.feasible),
                it.step,
                it.dual_norm,
                it.inner_iterations
            )?;
        }
        writeln!(w, "converged {}", u8::from(self.converged))
    }
}

#[derive(Clone, Debug)]
pub struct PowerResult {
    pub powers: PowerMatrix,
    pub duals: DualVariables,
    /// True objective (total utility) at `powers`.
    pub objective: f64,
    pub feasible: bool,
    pub trace: DcTrace,
}

/// `p` with every entry of a user not served on that subcarrier set to zero.
fn mask(d: &AccessDecision, p: &PowerMatrix) -> PowerMatrix {
    let mut out = PowerMatrix::zeros(p.users(), p.subcarriers());
    for n in 0..p.subcarriers() {
        let mode = d.mode(n);
        for k in 0..p.users() {
            if mode.serves(k) {
                out[(k, n)] = p[(k, n)].max(0.0);
            }
        }
    }
    out
}

/// Power allocation for a fixed access decision, starting the linearization
/// at `init`. Returns the best truly feasible iterate by objective, or the
/// last iterate when none is feasible.
pub fn dc_power_allocation(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    d: &AccessDecision,
    init: &PowerMatrix,
    cfg: &PowerConfig,
) -> Result<PowerResult> {
    inst.validate()?;
    ch.check_against(inst)?;
    cfg.validate()?;
    if d.users() != inst.users || d.subcarriers() != inst.subcarriers {
        return Err(Error::Contract("decision shape does not match the instance".into()));
    }
    if init.users() != inst.users || init.subcarriers() != inst.subcarriers {
        return Err(Error::Contract("initial powers do not match the instance".into()));
    }
    if init.as_matrix().iter().any(|p| !p.is_finite()) {
        return Err(Error::Contract("initial powers must be finite".into()));
    }
    d.validate(Some(&ch.gains))?;

    let sps = inst.service_providers();
    let mut expansion = mask(d, init);
    let mut duals = DualVariables::zeros(sps, inst.users, inst.subcarriers);
    let mut trace = DcTrace::default();
    let mut best: Option<(f64, PowerMatrix, DualVariables)> = None;

    let init_report = check_feasibility(inst, ch, d, &expansion, DEFAULT_FEASIBILITY_TOL);
    let mut expansion_objective = true_objective(inst, ch, d, &expansion);
    let mut expansion_feasible = init_report.feasible;
    if expansion_feasible {
        best = Some((expansion_objective, expansion.clone(), duals.clone()));
    }

    for t2 in 1..=cfg.max_dc_iters {
        let sol = solve_surrogate(inst, ch, d, &expansion, &duals, cfg);
        let p = sol.powers;
        let objective = true_objective(inst, ch, d, &p);
        let feasible = check_feasibility(inst, ch, d, &p, DEFAULT_FEASIBILITY_TOL).feasible;
        let step = p.distance(&expansion);
        trace.iterates.push(DcIterate {
            t2,
            objective,
            surrogate_value: surrogate_objective(inst, ch, d, &p, &expansion),
            expansion_objective,
            expansion_feasible,
            accepted: sol.feasible,
            feasible,
            step,
            dual_norm: sol.duals.norm(),
            inner_iterations: sol.iterations,
        });
        if feasible && best.as_ref().is_none_or(|(b, _, _)| objective > *b) {
            best = Some((objective, p.clone(), sol.duals.clone()));
        }
        let gain = objective - expansion_objective;
        let stalled = sol.feasible
            && feasible
            && expansion_feasible
            && (0.0..=cfg.eps_obj * objective.abs().max(1.0)).contains(&gain);
        duals = sol.duals;
        expansion = p;
        expansion_objective = objective;
        expansion_feasible = feasible;
        if step <= cfg.eps_p || stalled {
            trace.converged = true;
            break;
        }
    }

    let (objective, powers, duals, feasible) = match best {
        Some((obj, p, du)) => (obj, p, du, true),
        None => (expansion_objective, expansion, duals, false),
    };
    Ok(PowerResult {
        powers,
        duals,
        objective,
        feasible,
        trace,
    })
}

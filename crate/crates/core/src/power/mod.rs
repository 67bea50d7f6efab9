//! Step 2: power allocation for a fixed access decision.
//!
//! A DC loop linearizes the subtracted logarithms at the current powers and
//! solves the resulting convex surrogate through its Lagrangian dual. The
//! default inner solver finds the multipliers by monotone root finding; the
//! projected subgradient method is available as an alternative.

mod closed_form;
mod dc;
mod dual;
mod roots;
mod surrogate;

use crate::error::{Error, Result};
use crate::netmodel::Matrix;

pub use closed_form::{
    closed_form_update, Allocation, ClosedFormContext, Coefficients, SubcarrierKind,
};
pub use dc::{dc_power_allocation, DcIterate, DcTrace, PowerResult};
pub use dual::{dual_ascent_step, solve_surrogate, InnerSolution, SurrogateProblem};
pub use surrogate::{surrogate_lagrangian, surrogate_objective, surrogate_sp_rate, true_objective};

/// Multipliers of the SP-rate (`lambda`), SIC (`gamma`), per-entry power
/// (`zeta`) and total-power (`eta`) constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct DualVariables {
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub zeta: Matrix,
    pub eta: f64,
}

impl DualVariables {
    pub fn zeros(sps: usize, users: usize, subcarriers: usize) -> Self {
        Self {
            lambda: vec![0.0; sps],
            gamma: vec![0.0; subcarriers],
            zeta: Matrix::zeros(users, subcarriers),
            eta: 0.0,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.lambda
            .iter()
            .chain(&self.gamma)
            .chain(self.zeta.iter())
            .chain(std::iter::once(&self.eta))
            .all(|&v| v >= 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.lambda
            .iter()
            .chain(&self.gamma)
            .chain(self.zeta.iter())
            .chain(std::iter::once(&self.eta))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, other: &DualVariables) -> f64 {
        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        (sq(&self.lambda, &other.lambda)
            + sq(&self.gamma, &other.gamma)
            + sq(self.zeta.as_slice(), other.zeta.as_slice())
            + (self.eta - other.eta).powi(2))
        .sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualMethod {
    /// η by root finding on the power budget, γ per subcarrier in closed
    /// form, λ by coordinate-wise root finding on the SP rates.
    Exact,
    /// Projected subgradient ascent with step `a/(b + t)`.
    Subgradient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerConfig {
    /// DC stop: `‖p^{t₂} − p^{t₂−1}‖ ≤ eps_p`.
    pub eps_p: f64,
    /// DC also stops once a feasible step raises the true objective by at
    /// most `eps_obj · max(|objective|, 1)`; 0 disables this.
    pub eps_obj: f64,
    /// Subgradient stop on primal and dual changes.
    pub eps_inner: f64,
    pub max_dc_iters: usize,
    pub max_dual_iters: usize,
    pub step_a: f64,
    pub step_b: f64,
    /// λ above this means the surrogate SP targets are out of reach.
    pub lambda_cap: f64,
    /// Coordinate sweeps over λ per exact inner solve. With several binding
    /// SPs the rates can jump in λ and the sweeps need not settle.
    pub max_lambda_sweeps: usize,
    pub method: DualMethod,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            eps_p: 1e-4,
            eps_obj: 1e-8,
            eps_inner: 1e-4,
            max_dc_iters: 50,
            max_dual_iters: 2000,
            step_a: 1.0,
            step_b: 10.0,
            lambda_cap: 1e7,
            max_lambda_sweeps: 20,
            method: DualMethod::Exact,
        }
    }
}

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.eps_p) || !pos(self.eps_inner) || !pos(self.step_a) || !pos(self.step_b) {
            return Err(Error::Config("power tolerances and step parameters must be positive".into()));
        }
        if !(self.eps_obj.is_finite() && self.eps_obj >= 0.0) {
            return Err(Error::Config("objective tolerance must be non-negative".into()));
        }
        if self.max_dc_iters == 0 || self.max_dual_iters == 0 || self.max_lambda_sweeps == 0 {
            return Err(Error::Config("power iteration caps must be at least 1".into()));
        }
        if !pos(self.lambda_cap) {
            return Err(Error::Config("lambda cap must be positive".into()));
        }
        Ok(())
    }
}

//! Dense two-phase simplex and best-first branch-and-bound for binary
//! integer programs.

mod bnb;
mod simplex;

use std::io::Write;

use crate::error::{Error, Result};

pub use bnb::{solve_milp, solve_milp_with_gap};
pub use simplex::solve_lp;

/// Reduced-cost and feasibility tolerance of the simplex.
pub const DEFAULT_LP_TOL: f64 = 1e-9;
/// Objective-unit pruning tolerance of branch-and-bound.
pub const DEFAULT_MILP_TOL: f64 = 1e-7;
pub const DEFAULT_NODE_LIMIT: usize = 100_000;
/// Distance from {0, 1} under which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-9;

/// `max cᵀx  s.t.  A_ub x ≤ b_ub,  A_eq x = b_eq,  lower ≤ x ≤ upper`.
///
/// Rows are dense; infinite bounds are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// `vars` non-negative variables, zero objective, no rows.
    pub fn new(vars: usize) -> Self {
        Self {
            c: vec![0.0; vars],
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            lower: vec![0.0; vars],
            upper: vec![f64::INFINITY; vars],
        }
    }

    pub fn vars(&self) -> usize {
        self.c.len()
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
    }

    /// Stored as the negated `≤` row.
    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) {
        self.a_ub.push(row.into_iter().map(|a| -a).collect());
        self.b_ub.push(-rhs);
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vars();
        let bad = |m: String| Err(Error::Contract(m));
        if self.lower.len() != n || self.upper.len() != n {
            return bad("bound vectors do not match the variable count".into());
        }
        if self.a_ub.len() != self.b_ub.len() || self.a_eq.len() != self.b_eq.len() {
            return bad("row and right-hand-side counts differ".into());
        }
        for (i, row) in self.a_ub.iter().chain(&self.a_eq).enumerate() {
            if row.len() != n {
                return bad(format!("row {i} has {} entries for {n} variables", row.len()));
            }
            if row.iter().any(|a| !a.is_finite()) {
                return bad(format!("row {i} has a non-finite coefficient"));
            }
        }
        if self.c.iter().chain(&self.b_ub).chain(&self.b_eq).any(|v| !v.is_finite()) {
            return bad("objective and right-hand sides must be finite".into());
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return bad(format!("variable {j} has bounds [{l}, {u}]"));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>();
        let mut worst = 0.0_f64;
        for (row, b) in self.a_ub.iter().zip(&self.b_ub) {
            worst = worst.max(dot(row) - b);
        }
        for (row, b) in self.a_eq.iter().zip(&self.b_eq) {
            worst = worst.max((dot(row) - b).abs());
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - xj).max(xj - self.upper[j]);
        }
        worst
    }

    /// Writes `c`, the row blocks and the bounds as whitespace-separated
    /// matrices, one row per line.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        let line = |w: &mut W, v: &[f64]| -> Result<()> {
            let s: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(w, "{}", s.join(" "))?;
            Ok(())
        };
        writeln!(w, "vars {} ub_rows {} eq_rows {}", self.vars(), self.a_ub.len(), self.a_eq.len())?;
        writeln!(w, "c")?;
        line(&mut w, &self.c)?;
        writeln!(w, "A_ub")?;
        for row in &self.a_ub {
            line(&mut w, row)?;
        }
        writeln!(w, "b_ub")?;
        line(&mut w, &self.b_ub)?;
        writeln!(w, "A_eq")?;
        for row in &self.a_eq {
            line(&mut w, row)?;
        }
        writeln!(w, "b_eq")?;
        line(&mut w, &self.b_eq)?;
        writeln!(w, "lower")?;
        line(&mut w, &self.lower)?;
        writeln!(w, "upper")?;
        line(&mut w, &self.upper)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpProblem {
    pub lp: LinearProgram,
    /// Indices of the variables restricted to {0, 1}.
    pub binary: Vec<usize>,
}

impl MilpProblem {
    pub fn new(lp: LinearProgram, binary: Vec<usize>) -> Result<Self> {
        let mp = Self { lp, binary };
        mp.validate()?;
        Ok(mp)
    }

    pub fn validate(&self) -> Result<()> {
        self.lp.validate()?;
        if let Some(&j) = self.binary.iter().find(|&&j| j >= self.lp.vars()) {
            return Err(Error::Contract(format!("binary index {j} out of range")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Row multipliers of an optimal LP, in the sign convention of the
/// original rows (`ub` ≥ 0 for a maximization).
#[derive(Clone, Debug, PartialEq)]
pub struct Duals {
    pub ub: Vec<f64>,
    pub eq: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Empty when no point is available.
    pub x: Vec<f64>,
    pub objective: f64,
    /// LP relaxations solved.
    pub nodes: usize,
    /// Simplex pivots and bound flips, summed over all nodes.
    pub lp_iterations: usize,
    /// Present for optimal pure LP solves.
    pub duals: Option<Duals>,
}

impl MilpSolution {
    pub(crate) fn without_point(status: SolveStatus, nodes: usize, lp_iterations: usize) -> Self {
        Self {
            status,
            x: Vec::new(),
            objective: f64::NAN,
            nodes,
            lp_iterations,
            duals: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

//! Bounded-variable two-phase primal simplex on a dense tableau.
//!
//! Finite upper bounds are handled by letting nonbasic columns rest at
//! either bound, so they add no rows. Every row owns a unit column (its
//! slack or artificial) that is never dropped, which makes the row duals
//! readable from the final reduced costs.

use super::{Duals, LinearProgram, MilpSolution, SolveStatus};
use crate::error::Result;

/// Consecutive zero-length pivots before switching to Bland's rule.
const DEGENERACY_STREAK: usize = 40;
const PIVOT_TOL: f64 = 1e-9;
const STEP_TOL: f64 = 1e-12;

pub fn solve_lp(lp: &LinearProgram, tol: f64, max_iters: usize) -> Result<MilpSolution> {
    lp.validate()?;
    Ok(solve_with_bounds(lp, &lp.lower, &lp.upper, tol, max_iters))
}

/// How an internal tableau column maps back to an original variable.
#[derive(Clone, Copy, Debug)]
enum Col {
    /// `x = base + t`, `t ∈ [0, width]`.
    Shift { var: usize, base: f64 },
    /// `x = base - t`, `t ≥ 0`.
    Mirror { var: usize, base: f64 },
    /// Free variable halves: `x = t⁺ - t⁻`.
    Pos { var: usize },
    Neg { var: usize },
    Slack,
    Artificial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum At {
    Lower,
    Upper,
    Basic,
}

enum Step {
    Optimal,
    Unbounded,
    Limit,
}

struct Tableau {
    rows: usize,
    cols: usize,
    t: Vec<f64>,
    value: Vec<f64>,
    basis: Vec<usize>,
    at: Vec<At>,
    width: Vec<f64>,
    d: Vec<f64>,
    iterations: usize,
    max_iters: usize,
    bland: bool,
    streak: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn price(&mut self, cost: &[f64]) {
        for j in 0..self.cols {
            let mut z = 0.0;
            for i in 0..self.rows {
                z += cost[self.basis[i]] * self.at(i, j);
            }
            self.d[j] = cost[j] - z;
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.at[j] {
            At::Upper => self.width[j],
            _ => 0.0,
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.t[r * cols + j];
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for v in prow.iter_mut() {
            *v /= p;
        }
        prow[j] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[j];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
                row[j] = 0.0;
            }
        };
        before.chunks_exact_mut(cols).for_each(eliminate);
        after.chunks_exact_mut(cols).for_each(eliminate);
        let f = self.d[j];
        if f != 0.0 {
            for (a, b) in self.d.iter_mut().zip(prow.iter()) {
                *a -= f * b;
            }
            self.d[j] = 0.0;
        }
        self.basis[r] = j;
    }

    /// Runs primal simplex with the current reduced costs. Columns with
    /// `allowed[j] == false` never enter.
    fn run(&mut self, tol: f64, allowed: &[bool]) -> Step {
        loop {
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..self.cols {
                if !allowed[j] || self.at[j] == At::Basic {
                    continue;
                }
                let dir = match self.at[j] {
                    At::Lower if self.d[j] > tol && self.width[j] > 0.0 => 1.0,
                    At::Upper if self.d[j] < -tol => -1.0,
                    _ => continue,
                };
                let score = self.d[j].abs();
                if self.bland {
                    enter = Some((j, dir, score));
                    break;
                }
                if enter.is_none_or(|(_, _, s)| score > s) {
                    enter = Some((j, dir, score));
                }
            }
            let Some((j, dir, _)) = enter else {
                return Step::Optimal;
            };
            if self.iterations >= self.max_iters {
                return Step::Limit;
            }
            self.iterations += 1;

            let mut step = self.width[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_mag = 0.0;
            for i in 0..self.rows {
                let a = dir * self.at(i, j);
                let (ratio, to_upper) = if a > PIVOT_TOL {
                    (self.value[i].max(0.0) / a, false)
                } else if a < -PIVOT_TOL && self.width[self.basis[i]].is_finite() {
                    ((self.width[self.basis[i]] - self.value[i]).max(0.0) / -a, true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => ratio < step,
                    Some((li, _)) => {
                        if ratio < step - STEP_TOL {
                            true
                        } else if ratio <= step + STEP_TOL {
                            if self.bland {
                                self.basis[i] < self.basis[li]
                            } else {
                                a.abs() > leave_mag
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    step = ratio;
                    leave = Some((i, to_upper));
                    leave_mag = a.abs();
                }
            }
            if step.is_infinite() {
                return Step::Unbounded;
            }

            if step <= STEP_TOL {
                self.streak += 1;
                if self.streak >= DEGENERACY_STREAK {
                    self.bland = true;
                }
            } else {
                self.streak = 0;
            }

            for i in 0..self.rows {
                let a = self.at(i, j);
                if a != 0.0 {
                    self.value[i] -= dir * step * a;
                }
            }
            match leave {
                None => {
                    self.at[j] = if self.at[j] == At::Lower { At::Upper } else { At::Lower };
                }
                Some((r, to_upper)) => {
                    let entering = self.nonbasic_value(j) + dir * step;
                    let out = self.basis[r];
                    self.at[out] = if to_upper { At::Upper } else { At::Lower };
                    self.at[j] = At::Basic;
                    self.pivot(r, j);
                    self.value[r] = entering;
                }
            }
            for i in 0..self.rows {
                let w = self.width[self.basis[i]];
                let v = &mut self.value[i];
                if *v < 0.0 && *v > -PIVOT_TOL {
                    *v = 0.0;
                } else if *v > w && *v < w + PIVOT_TOL {
                    *v = w;
                }
            }
        }
    }
}

/// Solves `lp` with the bounds replaced by `lower`/`upper`.
pub(crate) fn solve_with_bounds(
    lp: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
    tol: f64,
    max_iters: usize,
) -> MilpSolution {
    let n = lp.vars();
    if (0..n).any(|j| lower[j] > upper[j]) {
        return MilpSolution::without_point(SolveStatus::Infeasible, 1, 0);
    }

    let mut cols: Vec<Col> = Vec::new();
    let mut width: Vec<f64> = Vec::new();
    let mut fixed = vec![None; n];
    for j in 0..n {
        let (l, u) = (lower[j], upper[j]);
        if l == u {
            fixed[j] = Some(l);
        } else if l.is_finite() {
            cols.push(Col::Shift { var: j, base: l });
            width.push(u - l);
        } else if u.is_finite() {
            cols.push(Col::Mirror { var: j, base: u });
            width.push(f64::INFINITY);
        } else {
            cols.push(Col::Pos { var: j });
            width.push(f64::INFINITY);
            cols.push(Col::Neg { var: j });
            width.push(f64::INFINITY);
        }
    }
    let structural = cols.len();
    let base_of = |j: usize| -> f64 {
        if let Some(v) = fixed[j] {
            v
        } else if lower[j].is_finite() {
            lower[j]
        } else if upper[j].is_finite() {
            upper[j]
        } else {
            0.0
        }
    };

    let rows_ub = lp.a_ub.len();
    let m = rows_ub + lp.a_eq.len();
    let row = |i: usize| -> &[f64] {
        if i < rows_ub {
            &lp.a_ub[i]
        } else {
            &lp.a_eq[i - rows_ub]
        }
    };
    let mut rhs = Vec::with_capacity(m);
    let mut negated = Vec::with_capacity(m);
    for i in 0..m {
        let b = if i < rows_ub { lp.b_ub[i] } else { lp.b_eq[i - rows_ub] };
        let shift: f64 = row(i).iter().enumerate().map(|(j, a)| a * base_of(j)).sum();
        let r = b - shift;
        negated.push(r < 0.0);
        rhs.push(r.abs());
    }

    // Slack columns for ≤ rows, then one artificial per row lacking a +1 slack.
    let mut slack_of = vec![None; m];
    for s in slack_of.iter_mut().take(rows_ub) {
        *s = Some(cols.len());
        cols.push(Col::Slack);
        width.push(f64::INFINITY);
    }
    let mut ident = vec![0usize; m];
    let mut artificials = Vec::new();
    for i in 0..m {
        match slack_of[i] {
            Some(s) if !negated[i] => ident[i] = s,
            _ => {
                ident[i] = cols.len();
                artificials.push(cols.len());
                cols.push(Col::Artificial);
                width.push(f64::INFINITY);
            }
        }
    }
    let ncol = cols.len();

    let mut t = vec![0.0; m * ncol];
    for i in 0..m {
        let sign = if negated[i] { -1.0 } else { 1.0 };
        let a = row(i);
        let tr = &mut t[i * ncol..(i + 1) * ncol];
        for (c, col) in cols[..structural].iter().enumerate() {
            tr[c] = sign
                * match *col {
                    Col::Shift { var, .. } | Col::Pos { var } => a[var],
                    Col::Mirror { var, .. } | Col::Neg { var } => -a[var],
                    _ => unreachable!(),
                };
        }
        if let Some(s) = slack_of[i] {
            tr[s] = sign;
        }
        tr[ident[i]] = 1.0;
    }

    let mut cost2 = vec![0.0; ncol];
    for (c, col) in cols[..structural].iter().enumerate() {
        cost2[c] = match *col {
            Col::Shift { var, .. } | Col::Pos { var } => lp.c[var],
            Col::Mirror { var, .. } | Col::Neg { var } => -lp.c[var],
            _ => 0.0,
        };
    }

    let mut at = vec![At::Lower; ncol];
    for &c in &ident {
        at[c] = At::Basic;
    }
    let mut tab = Tableau {
        rows: m,
        cols: ncol,
        t,
        value: rhs.clone(),
        basis: ident.clone(),
        at,
        width,
        d: vec![0.0; ncol],
        iterations: 0,
        max_iters,
        bland: false,
        streak: 0,
    };

    let mut allowed = vec![true; ncol];
    if !artificials.is_empty() {
        let mut cost1 = vec![0.0; ncol];
        for &a in &artificials {
            cost1[a] = -1.0;
        }
        tab.price(&cost1);
        match tab.run(tol, &allowed) {
            Step::Optimal => {}
            Step::Limit => {
                return MilpSolution::without_point(SolveStatus::IterationLimit, 1, tab.iterations)
            }
            // Phase 1 is bounded by construction.
            Step::Unbounded => unreachable!("phase-one objective is bounded"),
        }
        let scale = 1.0 + rhs.iter().fold(0.0_f64, |m, &b| m.max(b));
        let infeasibility: f64 = (0..m)
            .filter(|&i| matches!(cols[tab.basis[i]], Col::Artificial))
            .map(|i| tab.value[i])
            .sum();
        if infeasibility > tol.max(1e-9) * scale * 10.0 {
            return MilpSolution::without_point(SolveStatus::Infeasible, 1, tab.iterations);
        }
        // Pivot zero-level artificials out where the row allows it.
        for r in 0..m {
            if !matches!(cols[tab.basis[r]], Col::Artificial) {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..ncol {
                if tab.at[j] == At::Basic || matches!(cols[j], Col::Artificial) {
                    continue;
                }
                let a = tab.at(r, j).abs();
                if a > PIVOT_TOL && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                let out = tab.basis[r];
                let v = tab.nonbasic_value(j);
                tab.at[out] = At::Lower;
                tab.at[j] = At::Basic;
                tab.pivot(r, j);
                tab.value[r] = v;
            }
        }
        for &a in &artificials {
            allowed[a] = false;
            tab.width[a] = 0.0;
            if tab.at[a] != At::Basic {
                tab.at[a] = At::Lower;
            }
        }
        for i in 0..m {
            if matches!(cols[tab.basis[i]], Col::Artificial) {
                tab.value[i] = 0.0;
            }
        }
        tab.bland = false;
        tab.streak = 0;
    }

    tab.price(&cost2);
    match tab.run(tol, &allowed) {
        Step::Optimal => {}
        Step::Unbounded => {
            return MilpSolution::without_point(SolveStatus::Unbounded, 1, tab.iterations)
        }
        Step::Limit => {
            return MilpSolution::without_point(SolveStatus::IterationLimit, 1, tab.iterations)
        }
    }

    let mut internal = vec![0.0; ncol];
    for c in 0..ncol {
        internal[c] = tab.nonbasic_value(c);
    }
    for i in 0..m {
        internal[tab.basis[i]] = tab.value[i];
    }
    let mut x: Vec<f64> = (0..n).map(|j| fixed[j].unwrap_or(0.0)).collect();
    for (c, col) in cols[..structural].iter().enumerate() {
        match *col {
            Col::Shift { var, base } => x[var] = base + internal[c],
            Col::Mirror { var, base } => x[var] = base - internal[c],
            Col::Pos { var } => x[var] += internal[c],
            Col::Neg { var } => x[var] -= internal[c],
            _ => {}
        }
    }

    let dual = |i: usize| {
        let y = -tab.d[ident[i]];
        if negated[i] {
            -y
        } else {
            y
        }
    };
    let duals = Duals {
        ub: (0..rows_ub).map(dual).collect(),
        eq: (rows_ub..m).map(dual).collect(),
    };

    MilpSolution {
        status: SolveStatus::Optimal,
        objective: lp.objective(&x),
        x,
        nodes: 1,
        lp_iterations: tab.iterations,
        duals: Some(duals),
    }
}

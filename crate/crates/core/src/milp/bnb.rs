use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::solve_with_bounds;
use super::{MilpProblem, MilpSolution, SolveStatus, DEFAULT_LP_TOL, INTEGRALITY_TOL};
use crate::error::Result;

struct Node {
    bound: f64,
    id: usize,
    fixes: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Highest bound first, then the oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Equality rows `Σ x_j = 1` over binaries only. A fractional member of
/// such a row is branched on by splitting the row in two halves rather than
/// by fixing the member alone.
fn choice_sets(mp: &MilpProblem) -> (Vec<Vec<usize>>, Vec<Option<usize>>) {
    let n = mp.lp.vars();
    let mut is_binary = vec![false; n];
    for &j in &mp.binary {
        is_binary[j] = true;
    }
    let mut sets = Vec::new();
    let mut set_of = vec![None; n];
    for (row, &rhs) in mp.lp.a_eq.iter().zip(&mp.lp.b_eq) {
        if rhs != 1.0 {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| row[j] != 0.0).collect();
        let usable = members.len() >= 2
            && members.iter().all(|&j| row[j] == 1.0 && is_binary[j] && set_of[j].is_none());
        if usable {
            for &j in &members {
                set_of[j] = Some(sets.len());
            }
            sets.push(members);
        }
    }
    (sets, set_of)
}

/// Splits the still-free members of a set at half its LP mass so that each
/// side carries some of it. Returns (left, right) in index order.
fn split_set(set: &[usize], x: &[f64], upper: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let free: Vec<usize> = set.iter().copied().filter(|&j| upper[j] > 0.5).collect();
    let positive = |j: usize| x[j] > INTEGRALITY_TOL;
    let last_positive = free.iter().rposition(|&j| positive(j)).unwrap_or(free.len() - 1);
    let mut cum = 0.0;
    let mut cut = last_positive;
    for (i, &j) in free.iter().enumerate() {
        cum += x[j];
        if cum >= 0.5 - INTEGRALITY_TOL {
            cut = if i < last_positive { i + 1 } else { i };
            break;
        }
    }
    let (l, r) = free.split_at(cut.max(1));
    (l.to_vec(), r.to_vec())
}

const DIVE_EVERY: usize = 100;

/// Rounds an LP point towards an integral one by repeatedly fixing the most
/// decided fractional binary and re-solving. Members of a choice set are
/// fixed by selecting the set's largest member. Returns the integral point
/// found, if any, and the simplex iterations used.
fn dive(
    mp: &MilpProblem,
    sets: &[Vec<usize>],
    set_of: &[Option<usize>],
    lower: &[f64],
    upper: &[f64],
    start: &[f64],
    max_iters: usize,
) -> (Option<(f64, Vec<f64>)>, usize) {
    let lp = &mp.lp;
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    let mut x = start.to_vec();
    let mut used = 0;
    for _ in 0..=mp.binary.len() {
        let frac = |j: usize| (x[j] - x[j].round()).abs();
        let pick = mp
            .binary
            .iter()
            .copied()
            .filter(|&j| frac(j) > INTEGRALITY_TOL)
            .min_by(|&a, &b| frac(a).total_cmp(&frac(b)).then(a.cmp(&b)));
        let Some(j) = pick else {
            for &j in &mp.binary {
                x[j] = x[j].round();
            }
            return (Some((lp.objective(&x), x)), used);
        };
        match set_of[j] {
            Some(s) => {
                let set = &sets[s];
                let top = set
                    .iter()
                    .copied()
                    .filter(|&i| hi[i] > 0.5)
                    .max_by(|&a, &b| x[a].total_cmp(&x[b]).then(b.cmp(&a)))
                    .unwrap_or(j);
                for &i in set {
                    let v = if i == top { 1.0 } else { 0.0 };
                    lo[i] = v;
                    hi[i] = v;
                }
            }
            None => {
                let v = x[j].round();
                lo[j] = v;
                hi[j] = v;
            }
        }
        let r = solve_with_bounds(lp, &lo, &hi, DEFAULT_LP_TOL, max_iters);
        used += r.lp_iterations;
        if r.status != SolveStatus::Optimal {
            return (None, used);
        }
        x = r.x;
    }
    (None, used)
}

/// Best-first branch-and-bound over the binaries of `mp`.
pub fn solve_milp(mp: &MilpProblem, tol: f64, node_limit: usize) -> Result<MilpSolution> {
    solve_milp_with_gap(mp, tol, 0.0, node_limit)
}

/// As [`solve_milp`], but a node is also pruned when its bound exceeds the
/// incumbent by at most `rel_gap · max(|incumbent|, 1)`. The returned point
/// is then within that gap of the optimum.
pub fn solve_milp_with_gap(mp: &MilpProblem, tol: f64, rel_gap: f64, node_limit: usize) -> Result<MilpSolution> {
    mp.validate()?;
    let slack = |b: f64| tol + rel_gap * b.abs().max(1.0);
    let lp = &mp.lp;
    let n = lp.vars();
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    for &j in &mp.binary {
        lower[j] = lower[j].max(0.0);
        upper[j] = upper[j].min(1.0);
    }
    let (sets, set_of) = choice_sets(mp);
    let rows = lp.a_ub.len() + lp.a_eq.len();
    let max_iters = 50 * (rows + n) + 1000;

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::INFINITY,
        id: 0,
        fixes: Vec::new(),
    });
    let mut next_id = 1;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0;
    let mut iterations = 0;
    let mut node_lower = lower.clone();
    let mut node_upper = upper.clone();

    let finish = |status: SolveStatus, inc: Option<(f64, Vec<f64>)>, nodes, iterations| {
        match inc {
            Some((objective, x)) => MilpSolution {
                status,
                x,
                objective,
                nodes,
                lp_iterations: iterations,
                duals: None,
            },
            None => MilpSolution::without_point(status, nodes, iterations),
        }
    };

    while let Some(node) = heap.pop() {
        let best = incumbent.as_ref().map(|(v, _)| *v);
        if best.is_some_and(|b| node.bound <= b + slack(b)) {
            continue;
        }
        if nodes >= node_limit {
            return Ok(finish(SolveStatus::IterationLimit, incumbent, nodes, iterations));
        }
        node_lower.copy_from_slice(&lower);
        node_upper.copy_from_slice(&upper);
        for &(j, v) in &node.fixes {
            node_lower[j] = v;
            node_upper[j] = v;
        }
        let relax = solve_with_bounds(lp, &node_lower, &node_upper, DEFAULT_LP_TOL, max_iters);
        nodes += 1;
        iterations += relax.lp_iterations;
        match relax.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                return Ok(MilpSolution::without_point(SolveStatus::Unbounded, nodes, iterations))
            }
            SolveStatus::IterationLimit => {
                return Ok(finish(SolveStatus::IterationLimit, incumbent, nodes, iterations))
            }
        }
        if best.is_some_and(|b| relax.objective <= b + slack(b)) {
            continue;
        }

        if nodes == 1 || nodes % DIVE_EVERY == 0 {
            let (found, used) = dive(mp, &sets, &set_of, &node_lower, &node_upper, &relax.x, max_iters);
            iterations += used;
            if let Some((v, x)) = found {
                if best.is_none_or(|b| v > b) {
                    incumbent = Some((v, x));
                }
            }
        }
        let best = incumbent.as_ref().map(|(v, _)| *v);
        if best.is_some_and(|b| relax.objective <= b + slack(b)) {
            continue;
        }

        let mut branch: Option<(usize, f64)> = None;
        for &j in &mp.binary {
            let frac = (relax.x[j] - relax.x[j].round()).abs();
            if frac > INTEGRALITY_TOL && branch.is_none_or(|(_, f)| frac > f) {
                branch = Some((j, frac));
            }
        }
        match branch {
            Some((j, _)) if set_of[j].is_some() => {
                let set = &sets[set_of[j].unwrap()];
                let (left, right) = split_set(set, &relax.x, &node_upper);
                for zeroed in [right, left] {
                    let mut fixes = node.fixes.clone();
                    fixes.extend(zeroed.iter().map(|&i| (i, 0.0)));
                    heap.push(Node {
                        bound: relax.objective,
                        id: next_id,
                        fixes,
                    });
                    next_id += 1;
                }
            }
            None => {
                let mut x = relax.x;
                for &j in &mp.binary {
                    x[j] = x[j].round();
                }
                let objective = lp.objective(&x);
                incumbent = Some((objective, x));
            }
            Some((j, _)) => {
                for v in [1.0, 0.0] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, v));
                    heap.push(Node {
                        bound: relax.objective,
                        id: next_id,
                        fixes,
                    });
                    next_id += 1;
                }
            }
        }
    }

    Ok(match incumbent {
        Some(_) => finish(SolveStatus::Optimal, incumbent, nodes, iterations),
        None => MilpSolution::without_point(SolveStatus::Infeasible, nodes, iterations),
    })
}

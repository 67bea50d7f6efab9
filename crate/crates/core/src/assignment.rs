//! Step 1: technology selection and subcarrier assignment at fixed powers.
//!
//! At fixed powers every rate and cost term is a constant, so the problem is
//! a binary program. Two encodings are available. The full one carries the
//! α, u and β variables and every linearized row. The compact one has one
//! binary per (subcarrier, option), where an option is idle, one OMA user or
//! one ordered NOMA pair. Their integer points correspond one to one, so
//! both give the same optimum; the compact one is what the solver uses.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::milp::{
    solve_milp, solve_milp_with_gap, LinearProgram, MilpProblem, MilpSolution, SolveStatus, DEFAULT_MILP_TOL,
    DEFAULT_NODE_LIMIT,
};
use crate::netmodel::{
    AccessDecision, ChannelRealization, Matrix, NetworkInstance, PowerMatrix, SubcarrierMode,
    P_MIN,
};

/// Which access technologies Step 1 may choose from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Hybrid,
    PureOma,
    /// Every subcarrier with a valid pair must carry one; subcarriers with
    /// no valid pair fall back to OMA.
    PureNoma,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Hybrid, Mode::PureOma, Mode::PureNoma];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Hybrid => "hybrid",
            Mode::PureOma => "oma",
            Mode::PureNoma => "noma",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hybrid" => Ok(Mode::Hybrid),
            "oma" | "pure_oma" | "pureoma" => Ok(Mode::PureOma),
            "noma" | "pure_noma" | "purenoma" => Ok(Mode::PureNoma),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Coefficient tables of the Step-1 problem plus the variable layout of its
/// full encoding.
#[derive(Clone, Debug)]
pub struct Step1Problem {
    pub users: usize,
    pub subcarriers: usize,
    pub mode: Mode,
    /// OMA / first-user rate `Y₁` per (k, n).
    pub y1: Matrix,
    y2: Vec<f64>,
    cost: Vec<f64>,
    valid: Vec<bool>,
    tie: Vec<bool>,
    pub cost_a: f64,
    pub sp_of: Vec<usize>,
    pub min_rate: Vec<f64>,
    /// Full-encoding index of `α(k,k,n)`, stored at `k·N + n`.
    pub alpha_index: Vec<usize>,
    /// Full-encoding index of `u(k,k₂,n)`; `None` for eliminated pairs.
    pub u_index: Vec<Option<usize>>,
    pub beta_index: Vec<usize>,
    /// Subcarriers where `PureNoma` found no valid pair.
    pub noma_fallbacks: usize,
    /// Relative optimality gap accepted by [`solve_step1`]; 0 is exact.
    pub rel_gap: f64,
    /// Branch-and-bound nodes [`solve_step1`] may spend before returning
    /// its best incumbent.
    pub node_limit: usize,
}

#[derive(Clone, Debug)]
pub struct Step1Solution {
    pub decision: AccessDecision,
    /// Step-1 objective at `decision`, recomputed from the tables.
    pub objective: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub noma_fallbacks: usize,
}

/// Builds Step 1 for the powers of the previous iteration. An all-zero power
/// matrix is replaced by `P_max/(2N)` everywhere.
pub fn build_step1(
    inst: &NetworkInstance,
    ch: &ChannelRealization,
    prev_powers: &PowerMatrix,
    mode: Mode,
) -> Result<Step1Problem> {
    inst.validate()?;
    ch.check_against(inst)?;
    let (kk, nn) = (inst.users, inst.subcarriers);
    if prev_powers.users() != kk || prev_powers.subcarriers() != nn {
        return Err(Error::Contract("power matrix shape differs from the instance".into()));
    }
    if prev_powers.as_matrix().iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Contract("powers must be finite and non-negative".into()));
    }
    let seeded;
    let p = if prev_powers.is_all_zero() {
        seeded = PowerMatrix::uniform(kk, nn, inst.p_max / (2.0 * nn as f64));
        &seeded
    } else {
        prev_powers
    };

    let s2 = inst.noise_var;
    let y1 = Matrix::from_fn(kk, nn, |k, n| inst.log(1.0 + p[(k, n)] * ch.gain(k, n) / s2));
    let size = kk * kk * nn;
    let mut y2 = vec![0.0; size];
    let mut cost = vec![0.0; size];
    let mut valid = vec![false; size];
    let mut tie = vec![false; size];
    let idx = |k: usize, k2: usize, n: usize| (k * kk + k2) * nn + n;
    for n in 0..nn {
        for k in 0..kk {
            let h1 = ch.gain(k, n);
            for k2 in (0..kk).filter(|&k2| k2 != k) {
                let h2 = ch.gain(k2, n);
                if h2 > h1 {
                    continue;
                }
                let i = idx(k, k2, n);
                valid[i] = true;
                tie[i] = h2 == h1;
                y2[i] = inst.log(1.0 + p[(k2, n)] * h2 / (p[(k, n)] * h2 + s2));
                cost[i] = inst.cost_v * inst.log((h1 * p[(k2, n)] + s2) / (h1 * p[(k, n)].max(P_MIN)));
            }
        }
    }

    let alpha_index: Vec<usize> = (0..kk * nn).collect();
    let mut next = kk * nn;
    let mut u_index = vec![None; size];
    for (i, slot) in u_index.iter_mut().enumerate() {
        if valid[i] {
            *slot = Some(next);
            next += 1;
        }
    }
    let beta_index: Vec<usize> = (next..next + nn).collect();

    let mut prob = Step1Problem {
        users: kk,
        subcarriers: nn,
        mode,
        y1,
        y2,
        cost,
        valid,
        tie,
        cost_a: inst.cost_a,
        sp_of: inst.sp_of.clone(),
        min_rate: inst.min_rate.clone(),
        alpha_index,
        u_index,
        beta_index,
        noma_fallbacks: 0,
        rel_gap: 0.0,
        node_limit: DEFAULT_NODE_LIMIT,
    };
    if mode == Mode::PureNoma {
        prob.noma_fallbacks = (0..nn).filter(|&n| !prob.has_pair(n)).count();
    }
    Ok(prob)
}

impl Step1Problem {
    #[inline]
    fn idx(&self, k: usize, k2: usize, n: usize) -> usize {
        (k * self.users + k2) * self.subcarriers + n
    }

    /// Second-user rate `Y₂` of the ordered pair; 0 for eliminated pairs.
    pub fn y2(&self, k: usize, k2: usize, n: usize) -> f64 {
        self.y2[self.idx(k, k2, n)]
    }

    /// `V·log((h_k p_k₂ + σ²)/(h_k p_k))` of the ordered pair.
    pub fn pair_cost(&self, k: usize, k2: usize, n: usize) -> f64 {
        self.cost[self.idx(k, k2, n)]
    }

    /// Whether `(k, k₂)` respects the gain ordering on `n`.
    pub fn pair_valid(&self, k: usize, k2: usize, n: usize) -> bool {
        self.valid[self.idx(k, k2, n)]
    }

    pub fn has_pair(&self, n: usize) -> bool {
        (0..self.users).any(|k| (0..self.users).any(|k2| self.pair_valid(k, k2, n)))
    }

    pub fn service_providers(&self) -> usize {
        self.min_rate.len()
    }

    pub fn full_vars(&self) -> usize {
        self.beta_index.last().map_or(0, |b| b + 1)
    }

    /// Options Step 1 may pick for subcarrier `n`, in canonical order: idle,
    /// OMA users by index, then ordered pairs lexicographically.
    pub fn options(&self, n: usize) -> Vec<SubcarrierMode> {
        let pairs_only = self.mode == Mode::PureNoma && self.has_pair(n);
        let mut out = Vec::new();
        if !pairs_only {
            out.push(SubcarrierMode::Idle);
            out.extend((0..self.users).map(|user| SubcarrierMode::Oma { user }));
        }
        if self.mode != Mode::PureOma {
            for first in 0..self.users {
                for second in 0..self.users {
                    if self.pair_valid(first, second, n) {
                        out.push(SubcarrierMode::Noma { first, second });
                    }
                }
            }
        }
        out
    }

    pub fn option_value(&self, n: usize, mode: SubcarrierMode) -> f64 {
        match mode {
            SubcarrierMode::Idle => 0.0,
            SubcarrierMode::Oma { user } => self.y1[(user, n)],
            SubcarrierMode::Noma { first, second } => {
                self.y1[(first, n)] + self.y2(first, second, n)
                    - self.cost_a
                    - self.pair_cost(first, second, n)
            }
        }
    }

    /// Adds the option's contribution to each SP's linearized rate.
    fn add_option_rates(&self, n: usize, mode: SubcarrierMode, sign: f64, rates: &mut [f64]) {
        match mode {
            SubcarrierMode::Idle => {}
            SubcarrierMode::Oma { user } => rates[self.sp_of[user]] += sign * self.y1[(user, n)],
            SubcarrierMode::Noma { first, second } => {
                rates[self.sp_of[first]] += sign * self.y1[(first, n)];
                rates[self.sp_of[second]] += sign * self.y2(first, second, n);
            }
        }
    }

    /// Step-1 objective at `d`, term by term over α, u and β.
    pub fn objective(&self, d: &AccessDecision) -> f64 {
        let mut v = 0.0;
        for n in 0..self.subcarriers {
            for k in 0..self.users {
                if d.alpha(k, k, n) {
                    v += self.y1[(k, n)];
                }
                for k2 in 0..self.users {
                    if k2 != k && d.u(k, k2, n) {
                        v += self.y2(k, k2, n) - self.pair_cost(k, k2, n);
                    }
                }
            }
            if d.beta(n) {
                v -= self.cost_a;
            }
        }
        v
    }

    /// Linearized rate of SP `s` at `d`.
    pub fn sp_rate(&self, d: &AccessDecision, s: usize) -> f64 {
        let mut r = 0.0;
        for n in 0..self.subcarriers {
            for k in 0..self.users {
                if d.alpha(k, k, n) && self.sp_of[k] == s {
                    r += self.y1[(k, n)];
                }
                for k2 in 0..self.users {
                    if k2 != k && d.u(k, k2, n) && self.sp_of[k2] == s {
                        r += self.y2(k, k2, n);
                    }
                }
            }
        }
        r
    }

    /// The literal encoding over α(k,k,n), u(k,k₂,n) and β_n.
    pub fn full_milp(&self) -> MilpProblem {
        let (kk, nn) = (self.users, self.subcarriers);
        let vars = self.full_vars();
        let mut lp = LinearProgram::new(vars);
        for j in 0..vars {
            lp.upper[j] = 1.0;
        }
        let u_vars = || {
            (0..nn).flat_map(move |n| {
                (0..kk).flat_map(move |k| (0..kk).map(move |k2| (k, k2, n)))
            })
        };
        for n in 0..nn {
            for k in 0..kk {
                lp.c[self.alpha_index[k * nn + n]] = self.y1[(k, n)];
            }
            lp.c[self.beta_index[n]] = -self.cost_a;
        }
        for (k, k2, n) in u_vars() {
            if let Some(j) = self.u_index[self.idx(k, k2, n)] {
                lp.c[j] = self.y2(k, k2, n) - self.pair_cost(k, k2, n);
            }
        }

        let row = || vec![0.0; vars];
        for (k, k2, n) in u_vars() {
            let Some(j) = self.u_index[self.idx(k, k2, n)] else {
                continue;
            };
            // α(k,k,n) − u ≥ 0
            let mut r = row();
            r[self.alpha_index[k * nn + n]] = 1.0;
            r[j] = -1.0;
            lp.add_ge(r, 0.0);
            // β_n − u ≥ 0
            let mut r = row();
            r[self.beta_index[n]] = 1.0;
            r[j] = -1.0;
            lp.add_ge(r, 0.0);
            // Gain ordering, kept only where it binds with equality.
            if self.tie[self.idx(k, k2, n)] {
                let mut r = row();
                r[j] = 1.0;
                lp.add_le(r, 1.0);
            }
        }
        for s in 0..self.service_providers() {
            let mut r = row();
            for n in 0..nn {
                for k in (0..kk).filter(|&k| self.sp_of[k] == s) {
                    r[self.alpha_index[k * nn + n]] = self.y1[(k, n)];
                }
            }
            for (k, k2, n) in u_vars() {
                if self.sp_of[k2] == s {
                    if let Some(j) = self.u_index[self.idx(k, k2, n)] {
                        r[j] = self.y2(k, k2, n);
                    }
                }
            }
            lp.add_ge(r, self.min_rate[s]);
        }
        for n in 0..nn {
            let mut pairs = row();
            let mut link = row();
            link[self.beta_index[n]] = 1.0;
            for k in 0..kk {
                for k2 in 0..kk {
                    if let Some(j) = self.u_index[self.idx(k, k2, n)] {
                        pairs[j] = 1.0;
                        link[j] = -1.0;
                    }
                }
            }
            lp.add_le(pairs, 1.0);
            lp.add_eq(link, 0.0);
            let mut firsts = row();
            for k in 0..kk {
                firsts[self.alpha_index[k * nn + n]] = 1.0;
            }
            lp.add_le(firsts, 1.0);

            let b = self.beta_index[n];
            match self.mode {
                Mode::Hybrid => {}
                Mode::PureOma => lp.upper[b] = 0.0,
                Mode::PureNoma => {
                    if self.has_pair(n) {
                        lp.lower[b] = 1.0;
                    }
                }
            }
        }
        MilpProblem::new(lp, (0..vars).collect()).expect("full Step-1 encoding is well formed")
    }

    /// Options of subcarrier `n` that no other option matches or beats in
    /// value and in every SP's rate at once. Swapping a dominated option for
    /// its dominator never hurts, so the optimum survives the filter.
    pub fn undominated_options(&self, n: usize) -> Vec<SubcarrierMode> {
        let sps = self.service_providers();
        let all = self.options(n);
        let profiles: Vec<Vec<f64>> = all
            .iter()
            .map(|&o| {
                let mut v = vec![0.0; sps + 1];
                self.add_option_rates(n, o, 1.0, &mut v[1..]);
                v[0] = self.option_value(n, o);
                v
            })
            .collect();
        let dominates = |a: usize, b: usize| {
            let (pa, pb) = (&profiles[a], &profiles[b]);
            pa.iter().zip(pb).all(|(x, y)| x >= y) && (a < b || pa.iter().zip(pb).any(|(x, y)| x > y))
        };
        (0..all.len())
            .filter(|&j| !(0..all.len()).any(|i| i != j && dominates(i, j)))
            .map(|j| all[j])
            .collect()
    }

    /// One binary per (subcarrier, undominated option) with a choose-one row
    /// per subcarrier and one rate row per SP. Returns the column map too.
    pub fn compact_milp(&self) -> (MilpProblem, Vec<(usize, SubcarrierMode)>) {
        let columns: Vec<(usize, SubcarrierMode)> = (0..self.subcarriers)
            .flat_map(|n| self.undominated_options(n).into_iter().map(move |o| (n, o)))
            .collect();
        let vars = columns.len();
        let mut lp = LinearProgram::new(vars);
        let sps = self.service_providers();
        let mut sp_rows = vec![vec![0.0; vars]; sps];
        let mut choose = vec![vec![0.0; vars]; self.subcarriers];
        let mut rates = vec![0.0; sps];
        for (j, &(n, o)) in columns.iter().enumerate() {
            lp.c[j] = self.option_value(n, o);
            lp.upper[j] = 1.0;
            choose[n][j] = 1.0;
            rates.iter_mut().for_each(|r| *r = 0.0);
            self.add_option_rates(n, o, 1.0, &mut rates);
            for s in 0..sps {
                sp_rows[s][j] = rates[s];
            }
        }
        for row in choose {
            lp.add_eq(row, 1.0);
        }
        for (s, row) in sp_rows.into_iter().enumerate() {
            lp.add_ge(row, self.min_rate[s]);
        }
        let mp = MilpProblem::new(lp, (0..vars).collect()).expect("compact Step-1 encoding is well formed");
        (mp, columns)
    }

    /// Replaces each subcarrier's option by the lowest-index option of
    /// exactly equal value that keeps every SP target met.
    fn canonicalize(&self, modes: &mut [SubcarrierMode]) {
        let sps = self.service_providers();
        let mut rates = vec![0.0; sps];
        for (n, &m) in modes.iter().enumerate() {
            self.add_option_rates(n, m, 1.0, &mut rates);
        }
        for n in 0..self.subcarriers {
            let chosen = modes[n];
            let v = self.option_value(n, chosen);
            for o in self.options(n) {
                if o == chosen {
                    break;
                }
                if (self.option_value(n, o) - v).abs() > 1e-12 * (1.0 + v.abs()) {
                    continue;
                }
                let mut trial = rates.clone();
                self.add_option_rates(n, chosen, -1.0, &mut trial);
                self.add_option_rates(n, o, 1.0, &mut trial);
                let keeps = (0..sps).all(|s| trial[s] >= self.min_rate[s] || trial[s] >= rates[s]);
                if keeps {
                    rates = trial;
                    modes[n] = o;
                    break;
                }
            }
        }
    }

    fn finish(&self, modes: Vec<SubcarrierMode>, sol: &MilpSolution) -> Result<Step1Solution> {
        let mut modes = modes;
        self.canonicalize(&mut modes);
        let decision = AccessDecision::from_modes(self.users, &modes)?;
        decision.validate(None)?;
        Ok(Step1Solution {
            objective: self.objective(&decision),
            decision,
            nodes: sol.nodes,
            lp_iterations: sol.lp_iterations,
            noma_fallbacks: self.noma_fallbacks,
        })
    }
}

fn accept(sol: &MilpSolution) -> Result<bool> {
    match sol.status {
        SolveStatus::Optimal => Ok(true),
        SolveStatus::Infeasible => Ok(false),
        SolveStatus::IterationLimit if !sol.x.is_empty() => Ok(true),
        status => Err(Error::Limit(format!("Step-1 solve ended with {status:?}"))),
    }
}

/// Solves Step 1 through the compact encoding; `None` when no assignment
/// meets every SP target.
pub fn solve_step1(prob: &Step1Problem) -> Result<Option<Step1Solution>> {
    let (mp, columns) = prob.compact_milp();
    let sol = solve_milp_with_gap(&mp, DEFAULT_MILP_TOL, prob.rel_gap, prob.node_limit)?;
    if !accept(&sol)? {
        return Ok(None);
    }
    let mut modes = vec![SubcarrierMode::Idle; prob.subcarriers];
    for (j, &(n, o)) in columns.iter().enumerate() {
        if sol.x[j] > 0.5 {
            modes[n] = o;
        }
    }
    prob.finish(modes, &sol).map(Some)
}

/// Solves Step 1 through the full α/u/β encoding.
pub fn solve_step1_full(prob: &Step1Problem) -> Result<Option<Step1Solution>> {
    let mp = prob.full_milp();
    let sol = solve_milp(&mp, DEFAULT_MILP_TOL, DEFAULT_NODE_LIMIT)?;
    if !accept(&sol)? {
        return Ok(None);
    }
    let (kk, nn) = (prob.users, prob.subcarriers);
    let mut modes = vec![SubcarrierMode::Idle; nn];
    for (n, mode) in modes.iter_mut().enumerate() {
        if sol.x[prob.beta_index[n]] > 0.5 {
            for k in 0..kk {
                for k2 in 0..kk {
                    if let Some(j) = prob.u_index[prob.idx(k, k2, n)] {
                        if sol.x[j] > 0.5 {
                            *mode = SubcarrierMode::Noma { first: k, second: k2 };
                        }
                    }
                }
            }
        } else if let Some(k) = (0..kk).find(|&k| sol.x[prob.alpha_index[k * nn + n]] > 0.5) {
            *mode = SubcarrierMode::Oma { user: k };
        }
    }
    prob.finish(modes, &sol).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::total_utility;

    fn setup(gains: Vec<f64>, users: usize, subcarriers: usize, rate: f64) -> (NetworkInstance, ChannelRealization) {
        let inst = NetworkInstance::round_robin(users, subcarriers, 1, rate).unwrap();
        let ch = ChannelRealization::new(
            vec![[0.0, 0.0]; users],
            Matrix::from_vec(users, subcarriers, gains).unwrap(),
        )
        .unwrap();
        (inst, ch)
    }

    #[test]
    fn single_user_has_no_pair_variables() {
        let (inst, ch) = setup(vec![1.0, 2.0], 1, 2, 0.0);
        let p = PowerMatrix::uniform(1, 2, 1.0);
        let prob = build_step1(&inst, &ch, &p, Mode::Hybrid).unwrap();
        assert!(prob.u_index.iter().all(Option::is_none));
        let s = solve_step1(&prob).unwrap().unwrap();
        assert_eq!(s.decision.noma_subcarriers(), 0);
        assert_eq!(s.decision.modes(), vec![SubcarrierMode::Oma { user: 0 }; 2]);

        let prob = build_step1(&inst, &ch, &p, Mode::PureNoma).unwrap();
        assert_eq!(prob.noma_fallbacks, 2);
        assert_eq!(solve_step1(&prob).unwrap().unwrap().decision.noma_subcarriers(), 0);
    }

    #[test]
    fn equal_gains_tie_breaks_to_lowest_pair() {
        let (mut inst, ch) = setup(vec![1.0, 1.0], 2, 1, 0.0);
        inst.cost_a = 0.0;
        inst.cost_v = 0.0;
        let p = PowerMatrix::uniform(2, 1, 1.0);
        let prob = build_step1(&inst, &ch, &p, Mode::PureNoma).unwrap();
        assert!(prob.pair_valid(0, 1, 0) && prob.pair_valid(1, 0, 0));
        for s in [solve_step1(&prob), solve_step1_full(&prob)] {
            let s = s.unwrap().unwrap();
            assert_eq!(s.decision.mode(0), SubcarrierMode::Noma { first: 0, second: 1 });
        }
    }

    #[test]
    fn huge_fixed_cost_disables_noma() {
        let (mut inst, ch) = setup(vec![3.0, 1.0, 0.5, 2.0, 0.2, 1.5], 3, 2, 0.5);
        inst.cost_a = 1e6;
        let p = PowerMatrix::uniform(3, 2, 5.0);
        let prob = build_step1(&inst, &ch, &p, Mode::Hybrid).unwrap();
        let s = solve_step1(&prob).unwrap().unwrap();
        assert_eq!(s.decision.noma_subcarriers(), 0);
    }

    #[test]
    fn unreachable_rate_is_infeasible() {
        let (inst, ch) = setup(vec![1.0, 1.0], 2, 1, 1e3);
        let p = PowerMatrix::uniform(2, 1, 1.0);
        for mode in Mode::ALL {
            let prob = build_step1(&inst, &ch, &p, mode).unwrap();
            assert!(solve_step1(&prob).unwrap().is_none());
            assert!(solve_step1_full(&prob).unwrap().is_none());
        }
    }

    #[test]
    fn zero_powers_are_seeded_uniformly() {
        let (inst, ch) = setup(vec![1.0, 2.0, 3.0, 4.0], 2, 2, 0.0);
        let zero = build_step1(&inst, &ch, &PowerMatrix::zeros(2, 2), Mode::Hybrid).unwrap();
        let seeded = build_step1(
            &inst,
            &ch,
            &PowerMatrix::uniform(2, 2, inst.p_max / 4.0),
            Mode::Hybrid,
        )
        .unwrap();
        assert_eq!(zero.y1, seeded.y1);
        assert!(zero.y1.iter().all(|&y| y > 0.0));
    }

    #[test]
    fn objective_matches_utility_at_fixed_powers() {
        let (inst, ch) = setup(vec![3.0, 1.0, 0.5, 2.0, 0.2, 1.5], 3, 2, 0.0);
        let mut p = PowerMatrix::zeros(3, 2);
        for (i, v) in [4.0, 0.3, 9.0, 1.0, 2.5, 7.0].into_iter().enumerate() {
            p[(i / 2, i % 2)] = v;
        }
        let prob = build_step1(&inst, &ch, &p, Mode::Hybrid).unwrap();
        for n0 in prob.options(0) {
            for n1 in prob.options(1) {
                let d = AccessDecision::from_modes(3, &[n0, n1]).unwrap();
                let diff = prob.objective(&d) - total_utility(&inst, &ch, &d, &p);
                assert!(diff.abs() < 1e-9, "{n0} {n1}: {diff}");
            }
        }
    }

    #[test]
    fn mode_names_roundtrip() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("both".parse::<Mode>().is_err());
    }
}

//! System model: problem data, access decisions, powers and the exact
//! evaluators for rate, NOMA cost, utility and every master-problem
//! constraint.

mod channel;
mod eval;
mod text;

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

pub use channel::{generate_instance, ChannelDraws, ChannelModelParams};
pub use eval::{
    check_feasibility, noma_cost, sp_rate, subcarrier_rate, total_rate, total_utility,
    ConstraintReport, DEFAULT_FEASIBILITY_TOL,
};
pub use text::{read_instance, write_instance};

/// Floor applied to the first NOMA user's power inside the SIC cost logarithm.
pub const P_MIN: f64 = 1e-9;

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Contract(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.data.iter()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Static problem data for one base station shared by several service
/// providers (SPs).
///
/// `cost_a` and `cost_v` already include the rate/cost normalizing weight.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkInstance {
    pub users: usize,
    pub subcarriers: usize,
    /// SP index of every user.
    pub sp_of: Vec<usize>,
    /// Minimum aggregate rate of every SP.
    pub min_rate: Vec<f64>,
    /// Total BS transmit power budget (W).
    pub p_max: f64,
    /// Minimum normalized received-power separation for SIC.
    pub p_d: f64,
    pub noise_var: f64,
    pub cost_a: f64,
    pub cost_v: f64,
    pub log_base: f64,
}

impl NetworkInstance {
    /// Builds an instance with users spread round-robin over `sps` providers
    /// and the reference simulation parameters (σ² = 1, P_max = 100 W,
    /// P_d = 0.01, A = V = 2, rates in bits).
    pub fn round_robin(users: usize, subcarriers: usize, sps: usize, min_rate: f64) -> Result<Self> {
        if sps == 0 {
            return Err(Error::InvalidInstance("at least one SP is required".into()));
        }
        let inst = Self {
            users,
            subcarriers,
            sp_of: (0..users).map(|k| k % sps).collect(),
            min_rate: vec![min_rate; sps],
            p_max: 100.0,
            p_d: 0.01,
            noise_var: 1.0,
            cost_a: 2.0,
            cost_v: 2.0,
            log_base: 2.0,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn service_providers(&self) -> usize {
        self.min_rate.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInstance(m));
        if self.users == 0 || self.subcarriers == 0 || self.min_rate.is_empty() {
            return bad("K, N and S must all be at least 1".into());
        }
        if self.sp_of.len() != self.users {
            return bad(format!(
                "sp_of has {} entries for {} users",
                self.sp_of.len(),
                self.users
            ));
        }
        let s = self.service_providers();
        let mut members = vec![0usize; s];
        for (k, &sp) in self.sp_of.iter().enumerate() {
            if sp >= s {
                return bad(format!("user {k} maps to unknown SP {sp}"));
            }
            members[sp] += 1;
        }
        if let Some(empty) = members.iter().position(|&m| m == 0) {
            return bad(format!("SP {empty} has no users"));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !positive(self.p_max) || !positive(self.noise_var) {
            return bad("P_max and noise variance must be positive".into());
        }
        if !nonneg(self.p_d) || !nonneg(self.cost_a) || !nonneg(self.cost_v) {
            return bad("P_d, A and V must be non-negative".into());
        }
        if self.min_rate.iter().any(|&r| !nonneg(r)) {
            return bad("SP rate targets must be non-negative".into());
        }
        if !positive(self.log_base) || self.log_base == 1.0 {
            return bad(format!("unusable logarithm base {}", self.log_base));
        }
        Ok(())
    }

    /// Logarithm in the configured rate base.
    #[inline]
    pub fn log(&self, x: f64) -> f64 {
        x.ln() / self.log_base.ln()
    }

    pub fn users_of(&self, sp: usize) -> impl Iterator<Item = usize> + '_ {
        self.sp_of
            .iter()
            .enumerate()
            .filter(move |(_, &s)| s == sp)
            .map(|(k, _)| k)
    }
}

/// Per-user positions and the K×N channel power gains.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    /// User coordinates; the BS sits at the center of the square.
    pub positions: Vec<[f64; 2]>,
    pub gains: Matrix,
}

impl ChannelRealization {
    pub fn new(positions: Vec<[f64; 2]>, gains: Matrix) -> Result<Self> {
        let r = Self { positions, gains };
        r.validate()?;
        Ok(r)
    }

    #[inline]
    pub fn gain(&self, user: usize, subcarrier: usize) -> f64 {
        self.gains[(user, subcarrier)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != self.gains.rows() {
            return Err(Error::InvalidInstance(format!(
                "{} positions for {} gain rows",
                self.positions.len(),
                self.gains.rows()
            )));
        }
        if let Some(bad) = self.gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::InvalidInstance(format!(
                "channel gains must be positive and finite, found {bad}"
            )));
        }
        Ok(())
    }

    pub fn check_against(&self, inst: &NetworkInstance) -> Result<()> {
        self.validate()?;
        if self.gains.rows() != inst.users || self.gains.cols() != inst.subcarriers {
            return Err(Error::Contract(format!(
                "realization is {}x{}, instance is {}x{}",
                self.gains.rows(),
                self.gains.cols(),
                inst.users,
                inst.subcarriers
            )));
        }
        Ok(())
    }
}

/// Non-negative transmit power of every user on every subcarrier.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerMatrix(Matrix);

impl PowerMatrix {
    pub fn zeros(users: usize, subcarriers: usize) -> Self {
        Self(Matrix::zeros(users, subcarriers))
    }

    pub fn uniform(users: usize, subcarriers: usize, value: f64) -> Self {
        Self(Matrix::filled(users, subcarriers, value))
    }

    pub fn from_matrix(m: Matrix) -> Self {
        Self(m)
    }

    pub fn users(&self) -> usize {
        self.0.rows()
    }

    pub fn subcarriers(&self) -> usize {
        self.0.cols()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_all_zero(&self) -> bool {
        self.0.iter().all(|&p| p == 0.0)
    }

    /// Euclidean distance between two power matrices of equal shape.
    pub fn distance(&self, other: &PowerMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Index<(usize, usize)> for PowerMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for PowerMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut f64 {
        &mut self.0[idx]
    }
}

/// What a single subcarrier carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubcarrierMode {
    Idle,
    Oma { user: usize },
    /// `first` has the stronger channel and performs SIC.
    Noma { first: usize, second: usize },
}

impl SubcarrierMode {
    pub fn is_noma(&self) -> bool {
        matches!(self, SubcarrierMode::Noma { .. })
    }

    pub fn serves(&self, user: usize) -> bool {
        match *self {
            SubcarrierMode::Idle => false,
            SubcarrierMode::Oma { user: k } => k == user,
            SubcarrierMode::Noma { first, second } => first == user || second == user,
        }
    }
}

impl fmt::Display for SubcarrierMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubcarrierMode::Idle => write!(f, "idle"),
            SubcarrierMode::Oma { user } => write!(f, "oma({user})"),
            SubcarrierMode::Noma { first, second } => write!(f, "noma({first},{second})"),
        }
    }
}

/// Binary assignment and technology-selection variables.
///
/// `alpha(k, k, n)` marks the OMA user or first NOMA user of subcarrier `n`;
/// `alpha(k, k2, n)` with `k != k2` marks the NOMA pair `(k, k2)`. `u` is the
/// linearization product `beta_n * alpha(k,k,n) * alpha(k,k2,n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessDecision {
    users: usize,
    subcarriers: usize,
    alpha: Vec<bool>,
    beta: Vec<bool>,
    u: Vec<bool>,
}

impl AccessDecision {
    pub fn empty(users: usize, subcarriers: usize) -> Self {
        Self {
            users,
            subcarriers,
            alpha: vec![false; users * users * subcarriers],
            beta: vec![false; subcarriers],
            u: vec![false; users * users * subcarriers],
        }
    }

    pub fn from_modes(users: usize, modes: &[SubcarrierMode]) -> Result<Self> {
        let mut d = Self::empty(users, modes.len());
        for (n, mode) in modes.iter().enumerate() {
            d.set_mode(n, *mode)?;
        }
        Ok(d)
    }

    #[inline]
    fn idx(&self, k: usize, k2: usize, n: usize) -> usize {
        (k * self.users + k2) * self.subcarriers + n
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    #[inline]
    pub fn alpha(&self, k: usize, k2: usize, n: usize) -> bool {
        self.alpha[self.idx(k, k2, n)]
    }

    #[inline]
    pub fn beta(&self, n: usize) -> bool {
        self.beta[n]
    }

    #[inline]
    pub fn u(&self, k: usize, k2: usize, n: usize) -> bool {
        self.u[self.idx(k, k2, n)]
    }

    pub fn set_alpha(&mut self, k: usize, k2: usize, n: usize, v: bool) {
        let i = self.idx(k, k2, n);
        self.alpha[i] = v;
    }

    pub fn set_beta(&mut self, n: usize, v: bool) {
        self.beta[n] = v;
    }

    pub fn set_u(&mut self, k: usize, k2: usize, n: usize, v: bool) {
        let i = self.idx(k, k2, n);
        self.u[i] = v;
    }

    /// Overwrites subcarrier `n` with `mode`, keeping α, β and u consistent.
    pub fn set_mode(&mut self, n: usize, mode: SubcarrierMode) -> Result<()> {
        if n >= self.subcarriers {
            return Err(Error::Contract(format!("subcarrier {n} out of range")));
        }
        for k in 0..self.users {
            for k2 in 0..self.users {
                self.set_alpha(k, k2, n, false);
                self.set_u(k, k2, n, false);
            }
        }
        self.beta[n] = false;
        let in_range = |k: usize| {
            if k < self.users {
                Ok(())
            } else {
                Err(Error::Contract(format!("user {k} out of range")))
            }
        };
        match mode {
            SubcarrierMode::Idle => {}
            SubcarrierMode::Oma { user } => {
                in_range(user)?;
                self.set_alpha(user, user, n, true);
            }
            SubcarrierMode::Noma { first, second } => {
                in_range(first)?;
                in_range(second)?;
                if first == second {
                    return Err(Error::Contract("NOMA pair needs two distinct users".into()));
                }
                self.set_alpha(first, first, n, true);
                self.set_alpha(first, second, n, true);
                self.set_u(first, second, n, true);
                self.beta[n] = true;
            }
        }
        Ok(())
    }

    /// Mode of subcarrier `n`. Assumes the decision is valid.
    pub fn mode(&self, n: usize) -> SubcarrierMode {
        let Some(first) = (0..self.users).find(|&k| self.alpha(k, k, n)) else {
            return SubcarrierMode::Idle;
        };
        if self.beta(n) {
            if let Some(second) = (0..self.users).find(|&k2| k2 != first && self.u(first, k2, n)) {
                return SubcarrierMode::Noma { first, second };
            }
        }
        SubcarrierMode::Oma { user: first }
    }

    pub fn modes(&self) -> Vec<SubcarrierMode> {
        (0..self.subcarriers).map(|n| self.mode(n)).collect()
    }

    pub fn noma_subcarriers(&self) -> usize {
        self.beta.iter().filter(|&&b| b).count()
    }

    /// Euclidean norm of the β difference to `other`.
    pub fn beta_distance(&self, other: &AccessDecision) -> f64 {
        let d = self
            .beta
            .iter()
            .zip(&other.beta)
            .filter(|(a, b)| a != b)
            .count();
        (d as f64).sqrt()
    }

    /// Euclidean norm of the α difference to `other`.
    pub fn alpha_distance(&self, other: &AccessDecision) -> f64 {
        let d = self
            .alpha
            .iter()
            .zip(&other.alpha)
            .filter(|(a, b)| a != b)
            .count();
        (d as f64).sqrt()
    }

    /// Checks every structural invariant; the ordering constraint is only
    /// checked when channel gains are supplied.
    pub fn validate(&self, gains: Option<&Matrix>) -> Result<()> {
        let fail = |m: String| Err(Error::Contract(m));
        for n in 0..self.subcarriers {
            let firsts = (0..self.users).filter(|&k| self.alpha(k, k, n)).count();
            if firsts > 1 {
                return fail(format!("subcarrier {n} has {firsts} OMA/first users"));
            }
            let mut pairs = 0usize;
            for k in 0..self.users {
                for k2 in 0..self.users {
                    if k == k2 {
                        continue;
                    }
                    let product = self.beta(n) && self.alpha(k, k, n) && self.alpha(k, k2, n);
                    if self.u(k, k2, n) != product {
                        return fail(format!(
                            "u({k},{k2},{n}) disagrees with beta*alpha*alpha"
                        ));
                    }
                    if self.alpha(k, k2, n) && !self.alpha(k, k, n) {
                        return fail(format!(
                            "alpha({k},{k2},{n}) set without alpha({k},{k},{n})"
                        ));
                    }
                    if self.alpha(k, k2, n) {
                        pairs += 1;
                        if let Some(h) = gains {
                            if h[(k2, n)] > h[(k, n)] {
                                return fail(format!(
                                    "pair ({k},{k2}) on {n} violates the gain ordering"
                                ));
                            }
                        }
                    }
                }
            }
            if pairs > 1 {
                return fail(format!("subcarrier {n} has {pairs} NOMA pairs"));
            }
            if usize::from(self.beta(n)) != pairs {
                return fail(format!("beta({n}) does not equal the pair count"));
            }
        }
        Ok(())
    }
}

//! Flat `key = value` scenario files.
//!
//! ```text
//! # Fig. 1 style power sweep
//! users = 20
//! subcarriers = 10
//! sweep = pmax_db
//! values = 16, 18, 20
//! trials = 500
//! modes = hybrid, oma, noma
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::netmodel::{ChannelModelParams, NetworkInstance};
use crate::solver::{Mode, Scenario, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Total power budget in dB relative to 1 W.
    PmaxDb,
    /// Minimum rate of every SP.
    Rs,
    /// `A = V`.
    CostAv,
    Users,
    EdgeFraction,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PmaxDb => "pmax_db",
            SweepAxis::Rs => "rs",
            SweepAxis::CostAv => "cost_av",
            SweepAxis::Users => "users",
            SweepAxis::EdgeFraction => "edge_fraction",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pmax_db" | "pmax" => Ok(SweepAxis::PmaxDb),
            "rs" | "min_rate" => Ok(SweepAxis::Rs),
            "cost_av" | "cost" => Ok(SweepAxis::CostAv),
            "users" | "user_count" => Ok(SweepAxis::Users),
            "edge_fraction" | "edge" => Ok(SweepAxis::EdgeFraction),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub users: usize,
    pub subcarriers: usize,
    pub sps: usize,
    /// Minimum rate of every SP.
    pub rs: f64,
    pub pmax_db: f64,
    pub noise_var: f64,
    pub pd: f64,
    pub cost_a: f64,
    pub cost_v: f64,
    pub log_base: f64,
    pub pathloss_exp: f64,
    pub area_side: f64,
    pub edge_fraction: Option<f64>,
    pub sweep: SweepAxis,
    /// Sweep points; empty means the single point given by the base fields.
    pub values: Vec<f64>,
    pub trials: usize,
    pub modes: Vec<Mode>,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    /// Aggregated CSV path; the per-trial rows go next to it with a `.raw`
    /// infix.
    pub output: PathBuf,
    /// `(K, N)` pairs for the oracle comparison.
    pub oracle_sizes: Vec<(usize, usize)>,
    pub enumeration_cap: u128,
    pub solver: SolverConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            users: 20,
            subcarriers: 10,
            sps: 2,
            rs: 48.0,
            pmax_db: 20.0,
            noise_var: 1.0,
            pd: 0.01,
            cost_a: 2.0,
            cost_v: 2.0,
            log_base: 2.0,
            pathloss_exp: 3.0,
            area_side: 1.0,
            edge_fraction: None,
            sweep: SweepAxis::PmaxDb,
            values: Vec::new(),
            trials: 100,
            modes: Mode::ALL.to_vec(),
            seed: 1,
            threads: 0,
            output: PathBuf::from("results.csv"),
            oracle_sizes: vec![(6, 3)],
            enumeration_cap: 1_000_000,
            solver: SolverConfig::default(),
        }
    }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::parse(line, format!("{key}: cannot parse {raw:?}")))
}

fn list<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value(line, key, s))
        .collect()
}

fn size(line: usize, raw: &str) -> Result<(usize, usize)> {
    let (k, n) = raw
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::parse(line, format!("oracle size {raw:?} is not KxN")))?;
    Ok((value(line, "oracle_sizes", k.trim())?, value(line, "oracle_sizes", n.trim())?))
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected key = value, got {line:?}")))?;
            cfg.set(i + 1, key.trim(), val.trim())?;
        }
        Ok(cfg)
    }

    /// Sets one field from its textual form. `line` is reported in errors.
    pub fn set(&mut self, line: usize, key: &str, val: &str) -> Result<()> {
        match key {
            "users" => self.users = value(line, key, val)?,
            "subcarriers" => self.subcarriers = value(line, key, val)?,
            "sps" => self.sps = value(line, key, val)?,
            "rs" => self.rs = value(line, key, val)?,
            "pmax_db" => self.pmax_db = value(line, key, val)?,
            "noise_var" => self.noise_var = value(line, key, val)?,
            "pd" => self.pd = value(line, key, val)?,
            "cost_a" => self.cost_a = value(line, key, val)?,
            "cost_v" => self.cost_v = value(line, key, val)?,
            "log_base" => {
                self.log_base = match val {
                    "e" => std::f64::consts::E,
                    _ => value(line, key, val)?,
                }
            }
            "pathloss_exp" => self.pathloss_exp = value(line, key, val)?,
            "area_side" => self.area_side = value(line, key, val)?,
            "edge_fraction" => {
                self.edge_fraction = match val {
                    "none" | "" => None,
                    _ => Some(value(line, key, val)?),
                }
            }
            "sweep" => self.sweep = val.parse().map_err(|e: Error| Error::parse(line, e.to_string()))?,
            "values" => self.values = list(line, key, val)?,
            "trials" => self.trials = value(line, key, val)?,
            "modes" => {
                self.modes = val
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|e: Error| Error::parse(line, e.to_string())))
                    .collect::<Result<_>>()?
            }
            "seed" => self.seed = value(line, key, val)?,
            "threads" => self.threads = value(line, key, val)?,
            "output" => self.output = PathBuf::from(val),
            "oracle_sizes" => {
                self.oracle_sizes = val
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| size(line, s))
                    .collect::<Result<_>>()?
            }
            "enumeration_cap" => self.enumeration_cap = value(line, key, val)?,
            "max_outer_iters" => self.solver.max_outer_iters = value(line, key, val)?,
            "patience" => self.solver.patience = value(line, key, val)?,
            "eps_p" => {
                let eps: f64 = value(line, key, val)?;
                self.solver.eps_p = eps;
                self.solver.power.eps_p = eps;
            }
            "max_dc_iters" => self.solver.power.max_dc_iters = value(line, key, val)?,
            "step1_node_limit" => self.solver.step1_node_limit = value(line, key, val)?,
            "second_start" => self.solver.second_start = value(line, key, val)?,
            "oma_floor" => self.solver.oma_floor = value(line, key, val)?,
            "pure_fallback" => self.solver.pure_fallback = value(line, key, val)?,
            _ => return Err(Error::parse(line, format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Sweep points to run: `values`, or the base value of the axis.
    pub fn points(&self) -> Vec<f64> {
        if !self.values.is_empty() {
            return self.values.clone();
        }
        vec![match self.sweep {
            SweepAxis::PmaxDb => self.pmax_db,
            SweepAxis::Rs => self.rs,
            SweepAxis::CostAv => self.cost_a,
            SweepAxis::Users => self.users as f64,
            SweepAxis::EdgeFraction => self.edge_fraction.unwrap_or(0.0),
        }]
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode is required".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("sweep values must be strictly increasing".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep values must be finite".into()));
        }
        if self.sweep == SweepAxis::Users && self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(Error::Config("user counts must be positive integers".into()));
        }
        if self.oracle_sizes.is_empty() {
            return Err(Error::Config("oracle_sizes must not be empty".into()));
        }
        self.solver.validate()?;
        for &v in &self.points() {
            self.scenario(v)?;
        }
        for &(k, n) in &self.oracle_sizes {
            self.sized(k, n).scenario(self.points()[0])?;
        }
        Ok(())
    }

    /// Copy with a different user and subcarrier count.
    pub fn sized(&self, users: usize, subcarriers: usize) -> Self {
        Self { users, subcarriers, ..self.clone() }
    }

    /// The scenario at sweep value `v`.
    pub fn scenario(&self, v: f64) -> Result<Scenario> {
        let mut users = self.users;
        let mut pmax_db = self.pmax_db;
        let mut rs = self.rs;
        let (mut a, mut vv) = (self.cost_a, self.cost_v);
        let mut edge = self.edge_fraction;
        match self.sweep {
            SweepAxis::PmaxDb => pmax_db = v,
            SweepAxis::Rs => rs = v,
            SweepAxis::CostAv => (a, vv) = (v, v),
            SweepAxis::Users => users = v as usize,
            SweepAxis::EdgeFraction => edge = Some(v),
        }
        let mut topology = NetworkInstance::round_robin(users, self.subcarriers, self.sps, rs)?;
        topology.p_max = 10f64.powf(pmax_db / 10.0);
        topology.p_d = self.pd;
        topology.noise_var = self.noise_var;
        topology.cost_a = a;
        topology.cost_v = vv;
        topology.log_base = self.log_base;
        topology.validate()?;
        let channel = ChannelModelParams {
            pathloss_exp: self.pathloss_exp,
            area_side: self.area_side,
            edge_fraction: edge,
            seed: self.seed,
        };
        channel.validate()?;
        Ok(Scenario { topology, channel })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_lists_and_sizes() {
        let cfg = ScenarioConfig::parse(
            "# header\nusers = 6 # inline\nsweep = rs\nvalues = 10, 12,14\nmodes = hybrid,oma\n\
             oracle_sizes = 6x3, 6X4\nedge_fraction = none\nlog_base = e\n",
        )
        .unwrap();
        assert_eq!(cfg.users, 6);
        assert_eq!(cfg.sweep, SweepAxis::Rs);
        assert_eq!(cfg.values, vec![10.0, 12.0, 14.0]);
        assert_eq!(cfg.modes, vec![Mode::Hybrid, Mode::PureOma]);
        assert_eq!(cfg.oracle_sizes, vec![(6, 3), (6, 4)]);
        assert_eq!(cfg.log_base, std::f64::consts::E);
        cfg.validate().unwrap();
    }

    #[test]
    fn errors_name_the_line() {
        let err = ScenarioConfig::parse("users = 3\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = ScenarioConfig::parse("users = three\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(ScenarioConfig::parse("values = 3, 1\n").unwrap().validate().is_err());
        assert!(ScenarioConfig::parse("trials = 0\n").unwrap().validate().is_err());
        assert!(ScenarioConfig::parse("sweep = users\nvalues = 2.5\n").unwrap().validate().is_err());
    }

    #[test]
    fn sweep_values_reach_the_instance() {
        let base = ScenarioConfig::default();
        let s = ScenarioConfig { sweep: SweepAxis::PmaxDb, ..base.clone() }.scenario(20.0).unwrap();
        assert!((s.topology.p_max - 100.0).abs() < 1e-12);
        let s = ScenarioConfig { sweep: SweepAxis::CostAv, ..base.clone() }.scenario(8.0).unwrap();
        assert_eq!((s.topology.cost_a, s.topology.cost_v), (8.0, 8.0));
        let s = ScenarioConfig { sweep: SweepAxis::Users, ..base.clone() }.scenario(7.0).unwrap();
        assert_eq!(s.topology.users, 7);
        let s = ScenarioConfig { sweep: SweepAxis::EdgeFraction, ..base }.scenario(0.5).unwrap();
        assert_eq!(s.channel.edge_fraction, Some(0.5));
    }
}

//! Sweep, oracle-comparison and single-realization runs, and their CSV
//! tables.

use std::io::{self, Write};

use rayon::prelude::*;

use super::config::{ScenarioConfig, SweepAxis};
use crate::error::Result;
use crate::netmodel::{generate_instance, ChannelModelParams};
use crate::solver::{
    exhaustive_oracle, run_trials, solve, trial_seed, Mode, OracleConfig, SolutionReport, TrialOutcome,
};

/// `x` with 10 significant digits, in plain notation where that stays short.
pub fn sig10(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding can carry into a new leading digit; that only adds one
        // more significant digit, which is harmless for plotting.
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.9e}")
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> (f64, usize) {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (if n == 0 { 0.0 } else { sum / n as f64 }, n)
}

/// Aggregate of one sweep point and mode.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSummary {
    pub value: f64,
    pub mode: Mode,
    pub trials: usize,
    /// Mean utility with infeasible trials counted as 0.
    pub mean_utility: f64,
    /// Standard error of `mean_utility`.
    pub se: f64,
    pub outage: f64,
    pub outage_se: f64,
    /// Mean total rate with infeasible trials counted as 0.
    pub mean_rate: f64,
    /// Mean fraction of NOMA subcarriers over feasible trials.
    pub noma_fraction: f64,
}

impl PointSummary {
    pub fn from_trials(value: f64, mode: Mode, trials: &[&TrialOutcome]) -> Self {
        let n = trials.len();
        let utility = |t: &TrialOutcome| if t.feasible { t.utility } else { 0.0 };
        let (mu, _) = mean(trials.iter().map(|t| utility(t)));
        let var = if n > 1 {
            trials.iter().map(|t| (utility(t) - mu).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let outage = trials.iter().filter(|t| !t.feasible).count() as f64 / n.max(1) as f64;
        let (mean_rate, _) = mean(trials.iter().map(|t| if t.feasible { t.total_rate } else { 0.0 }));
        let (noma_fraction, _) = mean(trials.iter().filter(|t| t.feasible).map(|t| t.noma_fraction));
        Self {
            value,
            mode,
            trials: n,
            mean_utility: mu,
            se: (var / n.max(1) as f64).sqrt(),
            outage,
            outage_se: (outage * (1.0 - outage) / n.max(1) as f64).sqrt(),
            mean_rate,
            noma_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub summary: Vec<PointSummary>,
    /// Sweep value and outcome of every trial, sorted by value, mode, trial.
    pub raw: Vec<(f64, TrialOutcome)>,
}

impl SweepTable {
    pub fn point(&self, value: f64, mode: Mode) -> Option<&PointSummary> {
        self.summary.iter().find(|s| s.value == value && s.mode == mode)
    }

    pub fn write_summary(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{},mode,trials,mean_utility,se,outage,outage_se,mean_rate,noma_fraction", self.axis)?;
        for s in &self.summary {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                sig10(s.value),
                s.mode,
                s.trials,
                sig10(s.mean_utility),
                sig10(s.se),
                sig10(s.outage),
                sig10(s.outage_se),
                sig10(s.mean_rate),
                sig10(s.noma_fraction)
            )?;
        }
        Ok(())
    }

    pub fn write_raw(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{},mode,trial,seed,feasible,utility,total_rate,noma_fraction,outer_iterations", self.axis)?;
        for (v, t) in &self.raw {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                sig10(*v),
                t.mode,
                t.trial,
                t.seed,
                u8::from(t.feasible),
                sig10(t.utility),
                sig10(t.total_rate),
                sig10(t.noma_fraction),
                t.outer_iterations
            )?;
        }
        Ok(())
    }
}

/// Runs `cfg.trials` realizations in every mode at every sweep point. Trial
/// `i` uses the channel seed `trial_seed(cfg.seed, i)` at every point, so
/// points share their realizations wherever the topology allows.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let mut summary = Vec::new();
    let mut raw = Vec::new();
    for v in cfg.points() {
        let scenario = cfg.scenario(v)?;
        let outcomes = run_trials(&scenario, cfg.trials, cfg.seed, &cfg.solver, &cfg.modes)?;
        for &mode in &cfg.modes {
            let of_mode: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.mode == mode).collect();
            summary.push(PointSummary::from_trials(v, mode, &of_mode));
        }
        raw.extend(outcomes.into_iter().map(|o| (v, o)));
    }
    Ok(SweepTable { axis: cfg.sweep, summary, raw })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapRow {
    pub users: usize,
    pub subcarriers: usize,
    pub trial: usize,
    pub seed: u64,
    pub hybrid_utility: f64,
    pub hybrid_feasible: bool,
    pub oracle_utility: f64,
    pub oracle_feasible: bool,
    /// `(oracle − hybrid)/|oracle|` with an infeasible hybrid counted as 0;
    /// `None` when the oracle finds no feasible assignment.
    pub gap: Option<f64>,
    pub evaluated: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapSummary {
    pub users: usize,
    pub subcarriers: usize,
    pub seeds: usize,
    /// Seeds with a feasible oracle, over which the gaps are averaged.
    pub compared: usize,
    pub mean_gap: f64,
    pub max_gap: f64,
    pub mean_hybrid: f64,
    pub mean_oracle: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapTable {
    pub summary: Vec<GapSummary>,
    pub rows: Vec<GapRow>,
}

impl GapTable {
    pub fn write_summary(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "users,subcarriers,seeds,compared,mean_gap,max_gap,mean_hybrid,mean_oracle")?;
        for s in &self.summary {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.users,
                s.subcarriers,
                s.seeds,
                s.compared,
                sig10(s.mean_gap),
                sig10(s.max_gap),
                sig10(s.mean_hybrid),
                sig10(s.mean_oracle)
            )?;
        }
        Ok(())
    }

    pub fn write_raw(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(
            w,
            "users,subcarriers,trial,seed,hybrid_utility,hybrid_feasible,oracle_utility,oracle_feasible,gap,evaluated"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.users,
                r.subcarriers,
                r.trial,
                r.seed,
                sig10(r.hybrid_utility),
                u8::from(r.hybrid_feasible),
                sig10(r.oracle_utility),
                u8::from(r.oracle_feasible),
                r.gap.map_or_else(|| "nan".to_string(), sig10),
                r.evaluated
            )?;
        }
        Ok(())
    }
}

fn gap_row(cfg: &ScenarioConfig, users: usize, subcarriers: usize, trial: usize) -> Result<GapRow> {
    let sized = cfg.sized(users, subcarriers);
    let scenario = sized.scenario(sized.points()[0])?;
    let seed = trial_seed(cfg.seed, trial as u64);
    let params = ChannelModelParams { seed, ..scenario.channel.clone() };
    let ch = generate_instance(&params, &scenario.topology)?;
    let hybrid = solve(&scenario.topology, &ch, &crate::solver::SolverConfig { mode: Mode::Hybrid, ..cfg.solver.clone() })?;
    let ocfg = OracleConfig {
        power: cfg.solver.power.clone(),
        enumeration_cap: cfg.enumeration_cap,
        feasibility_tol: cfg.solver.feasibility_tol,
        ..OracleConfig::default()
    };
    let oracle = exhaustive_oracle(&scenario.topology, &ch, &ocfg)?;
    let o = &oracle.report;
    let gap = (o.feasible && o.utility != 0.0).then(|| (o.utility - hybrid.utility) / o.utility.abs());
    Ok(GapRow {
        users,
        subcarriers,
        trial,
        seed,
        hybrid_utility: hybrid.utility,
        hybrid_feasible: hybrid.feasible,
        oracle_utility: o.utility,
        oracle_feasible: o.feasible,
        gap,
        evaluated: oracle.evaluated,
    })
}

/// Hybrid solve against the exhaustive oracle on `cfg.trials` realizations
/// for every size in `cfg.oracle_sizes`, at the first sweep point.
pub fn run_oracle_comparison(cfg: &ScenarioConfig) -> Result<GapTable> {
    cfg.validate()?;
    let mut summary = Vec::new();
    let mut rows = Vec::new();
    for &(k, n) in &cfg.oracle_sizes {
        let part: Vec<GapRow> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| gap_row(cfg, k, n, t))
            .collect::<Result<_>>()?;
        let gaps: Vec<f64> = part.iter().filter_map(|r| r.gap).collect();
        let (mean_gap, compared) = mean(gaps.iter().copied());
        summary.push(GapSummary {
            users: k,
            subcarriers: n,
            seeds: part.len(),
            compared,
            mean_gap,
            max_gap: gaps.iter().copied().fold(0.0, f64::max),
            mean_hybrid: mean(part.iter().map(|r| r.hybrid_utility)).0,
            mean_oracle: mean(part.iter().map(|r| r.oracle_utility)).0,
        });
        rows.extend(part);
    }
    Ok(GapTable { summary, rows })
}

#[derive(Clone, Debug)]
pub struct SingleRun {
    pub axis: SweepAxis,
    pub value: f64,
    pub seed: u64,
    pub reports: Vec<(Mode, SolutionReport)>,
}

impl SingleRun {
    pub fn write_summary(&self, mut w: impl Write) -> io::Result<()> {
        let sps = self.reports.first().map_or(0, |(_, r)| r.sp_rates.len());
        write!(w, "{},seed,mode,feasible,utility,total_rate", self.axis)?;
        for s in 0..sps {
            write!(w, ",sp{s}_rate")?;
        }
        writeln!(w, ",noma_subcarriers,outer_iterations,converged")?;
        for (mode, r) in &self.reports {
            write!(
                w,
                "{},{},{},{},{},{}",
                sig10(self.value),
                self.seed,
                mode,
                u8::from(r.feasible),
                sig10(r.utility),
                sig10(r.total_rate)
            )?;
            for rate in &r.sp_rates {
                write!(w, ",{}", sig10(*rate))?;
            }
            writeln!(w, ",{},{},{}", r.noma_subcarriers, r.outer_iterations, u8::from(r.converged))?;
        }
        Ok(())
    }

    /// Outer records of every mode, each followed by its DC trace.
    pub fn write_trace(&self, mut w: impl Write) -> io::Result<()> {
        for (mode, r) in &self.reports {
            writeln!(w, "# mode {mode}")?;
            for h in &r.history {
                writeln!(
                    w,
                    "outer start {} t {} step1_objective {:.10e} rate_scale {} utility {:.10e} feasible {} \
                     beta_change {} alpha_change {} power_change {:.3e} noma {}",
                    h.start,
                    h.t,
                    h.step1_objective,
                    h.rate_scale,
                    h.utility,
                    u8::from(h.feasible),
                    h.beta_change,
                    h.alpha_change,
                    h.power_change,
                    h.noma_subcarriers
                )?;
                h.dc.write_text(&mut w)?;
            }
        }
        Ok(())
    }
}

/// Trial 0 of the first sweep point, solved in every configured mode with
/// full traces.
pub fn run_single(cfg: &ScenarioConfig) -> Result<SingleRun> {
    cfg.validate()?;
    let value = cfg.points()[0];
    let scenario = cfg.scenario(value)?;
    let seed = trial_seed(cfg.seed, 0);
    let ch = generate_instance(&ChannelModelParams { seed, ..scenario.channel.clone() }, &scenario.topology)?;
    let reports = cfg
        .modes
        .iter()
        .map(|&mode| {
            let scfg = crate::solver::SolverConfig { mode, ..cfg.solver.clone() };
            solve(&scenario.topology, &ch, &scfg).map(|r| (mode, r))
        })
        .collect::<Result<_>>()?;
    Ok(SingleRun { axis: cfg.sweep, value, seed, reports })
}

use dynma::netmodel::{
    check_feasibility, generate_instance, sp_rate, total_rate, total_utility, AccessDecision,
    ChannelModelParams, ChannelRealization, Matrix, NetworkInstance, PowerMatrix, SubcarrierMode,
    DEFAULT_FEASIBILITY_TOL,
};
use dynma::solver::{
    exhaustive_oracle, outage_probability, run_trials, solve, Mode, OracleConfig, Scenario,
    SolverConfig,
};

fn draw(inst: &NetworkInstance, seed: u64) -> ChannelRealization {
    let params = ChannelModelParams { seed, ..Default::default() };
    generate_instance(&params, inst).unwrap()
}

fn network(users: usize, subcarriers: usize, sps: usize, rate: f64, p_max: f64) -> NetworkInstance {
    let mut inst = NetworkInstance::round_robin(users, subcarriers, sps, rate).unwrap();
    inst.p_max = p_max;
    inst
}

#[test]
fn single_user_hybrid_is_oma() {
    for seed in 0..10 {
        let inst = network(1, 4, 1, 2.0, 10.0);
        let ch = draw(&inst, seed);
        let h = solve(&inst, &ch, &SolverConfig::with_mode(Mode::Hybrid)).unwrap();
        let o = solve(&inst, &ch, &SolverConfig::with_mode(Mode::PureOma)).unwrap();
        assert_eq!(h.noma_subcarriers, 0);
        assert_eq!(h.feasible, o.feasible);
        assert!((h.utility - o.utility).abs() <= 1e-9 * o.utility.abs().max(1.0), "seed {seed}");
        assert!(h.powers.distance(&o.powers) < 1e-6, "seed {seed}");
    }
}

#[test]
fn free_noma_without_targets_is_not_worse_than_oma() {
    for seed in 0..15 {
        let mut inst = network(6, 3, 2, 0.0, 100.0);
        inst.cost_a = 0.0;
        inst.cost_v = 0.0;
        let ch = draw(&inst, seed);
        let h = solve(&inst, &ch, &SolverConfig::with_mode(Mode::Hybrid)).unwrap();
        let o = solve(&inst, &ch, &SolverConfig::with_mode(Mode::PureOma)).unwrap();
        assert!(h.feasible && o.feasible);
        assert!(h.utility >= o.utility - 1e-6 * o.utility.abs(), "seed {seed}: {} < {}", h.utility, o.utility);
    }
}

#[test]
fn report_agrees_with_the_evaluators() {
    for seed in 0..6 {
        let inst = network(8, 4, 2, 3.0, 50.0);
        let ch = draw(&inst, seed);
        for mode in Mode::ALL {
            let r = solve(&inst, &ch, &SolverConfig::with_mode(mode)).unwrap();
            let check = check_feasibility(&inst, &ch, &r.decision, &r.powers, DEFAULT_FEASIBILITY_TOL);
            assert_eq!(r.feasible, check.feasible);
            let u = total_utility(&inst, &ch, &r.decision, &r.powers);
            assert!((r.raw_utility - u).abs() < 1e-9);
            assert_eq!(r.utility, if r.feasible { u } else { 0.0 });
            assert!((r.total_rate - total_rate(&inst, &ch, &r.decision, &r.powers)).abs() < 1e-9);
            for (s, &rate) in r.sp_rates.iter().enumerate() {
                assert!((rate - sp_rate(&inst, &ch, &r.decision, &r.powers, s)).abs() < 1e-9);
            }
            assert_eq!(r.noma_subcarriers, r.modes.iter().filter(|m| m.is_noma()).count());
            assert_eq!(r.modes, r.decision.modes());
            assert!(r.powers.total() <= inst.p_max * (1.0 + 1e-9));
        }
    }
}

#[test]
fn pure_modes_fix_the_access_technology() {
    for seed in 0..6 {
        let inst = network(8, 4, 2, 2.0, 50.0);
        let ch = draw(&inst, seed);
        let o = solve(&inst, &ch, &SolverConfig::with_mode(Mode::PureOma)).unwrap();
        assert_eq!(o.noma_subcarriers, 0);
        let n = solve(&inst, &ch, &SolverConfig::with_mode(Mode::PureNoma)).unwrap();
        assert_eq!(n.noma_subcarriers + n.noma_fallbacks, inst.subcarriers, "seed {seed}");
    }
}

#[test]
fn exhaustive_search_dominates_every_mode() {
    for seed in 0..6 {
        let inst = network(4, 2, 2, 1.0, 20.0);
        let ch = draw(&inst, seed);
        let oracle = exhaustive_oracle(&inst, &ch, &OracleConfig::default()).unwrap();
        for mode in Mode::ALL {
            let r = solve(&inst, &ch, &SolverConfig::with_mode(mode)).unwrap();
            if r.feasible {
                assert!(oracle.report.feasible);
                assert!(r.utility <= oracle.report.utility + 1e-6, "seed {seed} {mode:?}");
            }
        }
    }
}

#[test]
fn two_users_one_subcarrier_reach_the_optimum() {
    for seed in 0..20 {
        let inst = network(2, 1, 1, 0.5, 10.0);
        let ch = draw(&inst, seed);
        let oracle = exhaustive_oracle(&inst, &ch, &OracleConfig::default()).unwrap();
        let h = solve(&inst, &ch, &SolverConfig::default()).unwrap();
        assert_eq!(h.feasible, oracle.report.feasible);
        if oracle.report.feasible {
            let gap = (oracle.report.utility - h.utility) / oracle.report.utility.abs();
            assert!(gap <= 1e-6, "seed {seed}: gap {gap}");
        }
    }
}

/// Best utility over every option of a one-subcarrier network, scoring a
/// dense power grid with the exact evaluators.
fn grid_optimum(inst: &NetworkInstance, ch: &ChannelRealization, steps: usize) -> f64 {
    let (kk, p) = (inst.users, inst.p_max);
    let score = |mode: SubcarrierMode, powers: &[(usize, f64)]| -> Option<f64> {
        let d = AccessDecision::from_modes(kk, &[mode]).unwrap();
        let mut m = Matrix::zeros(kk, 1);
        for &(k, v) in powers {
            m[(k, 0)] = v;
        }
        let pm = PowerMatrix::from_matrix(m);
        check_feasibility(inst, ch, &d, &pm, DEFAULT_FEASIBILITY_TOL)
            .feasible
            .then(|| total_utility(inst, ch, &d, &pm))
    };
    let mut best = f64::NEG_INFINITY;
    for user in 0..kk {
        for i in 0..=steps {
            let v = p * i as f64 / steps as f64;
            if let Some(u) = score(SubcarrierMode::Oma { user }, &[(user, v)]) {
                best = best.max(u);
            }
        }
    }
    for a in 0..kk {
        for b in 0..kk {
            if a == b || ch.gain(a, 0) < ch.gain(b, 0) {
                continue;
            }
            for i in 1..=steps {
                let p1 = p * i as f64 / steps as f64;
                for j in 0..=steps {
                    let p2 = (p - p1) * j as f64 / steps as f64;
                    if let Some(u) = score(SubcarrierMode::Noma { first: a, second: b }, &[(a, p1), (b, p2)]) {
                        best = best.max(u);
                    }
                }
            }
        }
    }
    best
}

#[test]
fn three_users_one_subcarrier_match_a_power_grid() {
    for seed in 0..8 {
        let mut inst = network(3, 1, 1, 0.0, 8.0);
        inst.cost_a = 0.3;
        inst.cost_v = 0.2;
        let ch = draw(&inst, seed);
        let grid = grid_optimum(&inst, &ch, 300);
        let oracle = exhaustive_oracle(&inst, &ch, &OracleConfig::default()).unwrap();
        assert!(oracle.report.feasible);
        let o = oracle.report.utility;
        assert!(o >= grid - 1e-9 * grid.abs(), "seed {seed}: oracle {o} below grid {grid}");
        assert!((o - grid) / grid.abs() <= 1e-3, "seed {seed}: oracle {o} grid {grid}");
        let h = solve(&inst, &ch, &SolverConfig::default()).unwrap();
        assert!(h.utility <= o + 1e-6);
    }
}

#[test]
fn outage_is_zero_without_targets_and_one_when_unreachable() {
    let topology = network(6, 3, 2, 0.0, 100.0);
    let scenario = Scenario { topology: topology.clone(), channel: ChannelModelParams::default() };
    let cfg = SolverConfig::default();
    for est in outage_probability(&scenario, 8, 3, &cfg, &Mode::ALL).unwrap() {
        assert_eq!(est.probability, 0.0, "{:?}", est.mode);
    }
    let hopeless = Scenario { topology: network(6, 3, 2, 1e4, 100.0), ..scenario };
    for est in outage_probability(&hopeless, 8, 3, &cfg, &Mode::ALL).unwrap() {
        assert_eq!(est.probability, 1.0, "{:?}", est.mode);
        assert_eq!(est.standard_error, 0.0);
    }
}

#[test]
fn trials_do_not_depend_on_thread_count() {
    let scenario = Scenario { topology: network(6, 3, 2, 4.0, 50.0), channel: ChannelModelParams::default() };
    let cfg = SolverConfig::default();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_trials(&scenario, 6, 11, &cfg, &Mode::ALL).unwrap())
    };
    assert_eq!(run(1), run(4));
}

use dynma::netmodel::{
    check_feasibility, sp_rate, total_utility, AccessDecision, ChannelRealization, Matrix,
    NetworkInstance, PowerMatrix, SubcarrierMode,
};
use dynma::power::{
    closed_form_update, dc_power_allocation, solve_surrogate, surrogate_lagrangian,
    surrogate_objective, surrogate_sp_rate, true_objective, Allocation, ClosedFormContext,
    DualMethod, DualVariables, PowerConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn channel(gains: Matrix) -> ChannelRealization {
    ChannelRealization::new(vec![[0.0; 2]; gains.rows()], gains).unwrap()
}

/// Classical water-filling by bisection on the water level `μ`:
/// `p_n = max(0, μ − σ²/h_n)` with `Σ p_n = P`.
fn bisection_water_filling(gains: &[f64], noise: f64, budget: f64) -> Vec<f64> {
    let fill = |mu: f64| -> Vec<f64> { gains.iter().map(|h| (mu - noise / h).max(0.0)).collect() };
    let (mut lo, mut hi) = (0.0, budget + gains.iter().map(|h| noise / h).fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fill(mid).iter().sum::<f64>() > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    fill(0.5 * (lo + hi))
}

#[test]
fn oma_single_sp_matches_bisection_water_filling() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..30 {
        let users = rng.random_range(1..=5);
        let subcarriers = rng.random_range(1..=8);
        let mut inst = NetworkInstance::round_robin(users, subcarriers, 1, 0.0).unwrap();
        inst.p_max = rng.random_range(0.5..200.0);
        let ch = channel(Matrix::from_fn(users, subcarriers, |_, _| rng.random_range(0.01..3.0)));
        let modes: Vec<SubcarrierMode> = (0..subcarriers)
            .map(|_| SubcarrierMode::Oma { user: rng.random_range(0..users) })
            .collect();
        let d = AccessDecision::from_modes(users, &modes).unwrap();
        let init = PowerMatrix::uniform(users, subcarriers, inst.p_max / subcarriers as f64);
        let res = dc_power_allocation(&inst, &ch, &d, &init, &PowerConfig::default()).unwrap();
        let gains: Vec<f64> = modes
            .iter()
            .enumerate()
            .map(|(n, m)| match m {
                SubcarrierMode::Oma { user } => ch.gain(*user, n),
                _ => unreachable!(),
            })
            .collect();
        let oracle = bisection_water_filling(&gains, inst.noise_var, inst.p_max);
        for (n, m) in modes.iter().enumerate() {
            let SubcarrierMode::Oma { user } = *m else { unreachable!() };
            for k in 0..users {
                let want = if k == user { oracle[n] } else { 0.0 };
                assert!(
                    (res.powers[(k, n)] - want).abs() < 1e-6,
                    "trial {trial} ({k},{n}): {} vs {want}",
                    res.powers[(k, n)]
                );
            }
        }
    }
}

#[test]
fn optimal_start_converges_in_one_iteration() {
    let inst = NetworkInstance::round_robin(1, 1, 1, 0.0).unwrap();
    let ch = channel(Matrix::filled(1, 1, 0.7));
    let d = AccessDecision::from_modes(1, &[SubcarrierMode::Oma { user: 0 }]).unwrap();
    let init = PowerMatrix::uniform(1, 1, inst.p_max);
    let res = dc_power_allocation(&inst, &ch, &d, &init, &PowerConfig::default()).unwrap();
    assert!(res.trace.converged);
    assert_eq!(res.trace.iterates.len(), 1);
    assert!((res.powers[(0, 0)] - inst.p_max).abs() < 1e-9);
}

struct Pair {
    inst: NetworkInstance,
    ch: ChannelRealization,
    d: AccessDecision,
}

fn pair(h1: f64, h2: f64, rates: [f64; 2], p_max: f64) -> Pair {
    let mut inst = NetworkInstance::round_robin(2, 1, 2, 0.0).unwrap();
    inst.min_rate = rates.to_vec();
    inst.p_max = p_max;
    let ch = channel(Matrix::from_vec(2, 1, vec![h1, h2]).unwrap());
    let d = AccessDecision::from_modes(2, &[SubcarrierMode::Noma { first: 0, second: 1 }]).unwrap();
    Pair { inst, ch, d }
}

fn powers(p1: f64, p2: f64) -> PowerMatrix {
    PowerMatrix::from_matrix(Matrix::from_vec(2, 1, vec![p1, p2]).unwrap())
}

/// Global maximum of the true objective over the feasible `(p₁, p₂)` set,
/// by a coarse grid refined around the incumbent.
fn grid_optimum(c: &Pair) -> Option<f64> {
    let eval = |p1: f64, p2: f64| -> Option<f64> {
        let p = powers(p1, p2);
        check_feasibility(&c.inst, &c.ch, &c.d, &p, 1e-12)
            .feasible
            .then(|| total_utility(&c.inst, &c.ch, &c.d, &p))
    };
    let pm = c.inst.p_max;
    let mut best: Option<(f64, f64, f64)> = None;
    let g = 600;
    for i in 0..=g {
        for j in 0..=g {
            let (p1, p2) = (pm * i as f64 / g as f64, pm * j as f64 / g as f64);
            if let Some(v) = eval(p1, p2) {
                if best.is_none_or(|b| v > b.0) {
                    best = Some((v, p1, p2));
                }
            }
        }
    }
    let (mut v, mut c1, mut c2) = best?;
    let mut radius = pm / g as f64;
    for _ in 0..40 {
        let m = 20;
        for i in -m..=m {
            for j in -m..=m {
                let p1 = (c1 + radius * i as f64 / m as f64).max(0.0);
                let p2 = (c2 + radius * j as f64 / m as f64).max(0.0);
                if let Some(u) = eval(p1, p2) {
                    if u > v {
                        (v, c1, c2) = (u, p1, p2);
                    }
                }
            }
        }
        radius *= 0.5;
    }
    Some(v)
}

#[test]
fn noma_pair_reaches_the_grid_optimum() {
    let cases = [
        pair(5.0, 1.0, [0.0, 0.0], 100.0),
        pair(5.0, 1.0, [3.0, 4.0], 100.0),
        pair(2.0, 1.8, [1.0, 2.0], 10.0),
        pair(30.0, 0.2, [6.0, 3.0], 100.0),
        pair(1.0, 0.5, [0.0, 1.0], 3.0),
    ];
    for (i, c) in cases.iter().enumerate() {
        let oracle = grid_optimum(c).unwrap_or_else(|| panic!("case {i} infeasible"));
        let init = powers(c.inst.p_max / 4.0, c.inst.p_max / 2.0);
        let res = dc_power_allocation(&c.inst, &c.ch, &c.d, &init, &PowerConfig::default()).unwrap();
        assert!(res.feasible, "case {i}");
        assert!(res.objective >= oracle - 1e-4, "case {i}: {} vs grid {oracle}", res.objective);
    }
}

#[test]
fn converged_pair_is_stationary_for_the_lagrangian() {
    let cases = [
        pair(5.0, 1.0, [0.0, 0.0], 100.0),
        pair(5.0, 1.0, [3.0, 4.0], 100.0),
        pair(2.0, 1.8, [1.0, 2.0], 10.0),
        pair(8.0, 0.3, [0.0, 4.0], 50.0),
    ];
    for (i, c) in cases.iter().enumerate() {
        let init = powers(c.inst.p_max / 4.0, c.inst.p_max / 2.0);
        let res = dc_power_allocation(&c.inst, &c.ch, &c.d, &init, &PowerConfig::default()).unwrap();
        let e = res.powers.clone();
        let sol = solve_surrogate(&c.inst, &c.ch, &c.d, &e, &res.duals, &PowerConfig::default());
        assert!(sol.duals.is_nonnegative());
        let lag = |p: &PowerMatrix| surrogate_lagrangian(&c.inst, &c.ch, &c.d, p, &e, &sol.duals);
        for k in 0..2 {
            let x = sol.powers[(k, 0)];
            if x <= 1e-6 || x >= c.inst.p_max - 1e-6 {
                continue;
            }
            let hstep = 1e-6 * (1.0 + x);
            let mut plus = sol.powers.clone();
            let mut minus = sol.powers.clone();
            plus[(k, 0)] += hstep;
            minus[(k, 0)] -= hstep;
            let fd = (lag(&plus) - lag(&minus)) / (2.0 * hstep);
            assert!(fd.abs() < 1e-5, "case {i} coordinate {k}: derivative {fd}");
        }
    }
}

#[test]
fn closed_form_first_power_matches_grid_on_the_lagrangian() {
    let c = pair(6.0, 1.2, [1.0, 1.0], 100.0);
    let e = powers(3.0, 20.0);
    let mut duals = DualVariables::zeros(2, 2, 1);
    duals.lambda = vec![0.4, 0.9];
    duals.eta = 0.03;
    duals.gamma[0] = 0.01;
    let ctx = ClosedFormContext::new(&c.inst, &c.ch, c.d.mode(0), 0, &e).unwrap();
    let Allocation::Noma { p1, p2 } = closed_form_update(&ctx, &duals) else { panic!() };
    let lag = |a: f64, b: f64| surrogate_lagrangian(&c.inst, &c.ch, &c.d, &powers(a, b), &e, &duals);
    let pn = p1 + p2;
    let at = lag(p1, p2);
    let grid = (1..10_000)
        .map(|i| pn * i as f64 / 10_000.0)
        .map(|x| lag(x, pn - x))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(at >= grid - 1e-12 * grid.abs());
}

fn random_noma_case(seed: u64) -> (NetworkInstance, ChannelRealization, AccessDecision, PowerMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = rng.random_range(2..=6);
    let subcarriers = rng.random_range(1..=5);
    let sps = rng.random_range(1..=2.min(users));
    let mut inst = NetworkInstance::round_robin(users, subcarriers, sps, 0.0).unwrap();
    inst.min_rate = (0..sps).map(|_| rng.random_range(0.0..3.0)).collect();
    inst.p_max = rng.random_range(5.0..100.0);
    let ch = channel(Matrix::from_fn(users, subcarriers, |_, _| rng.random_range(0.02..5.0)));
    let modes: Vec<SubcarrierMode> = (0..subcarriers)
        .map(|n| {
            let a = rng.random_range(0..users);
            let b = (a + rng.random_range(1..users)) % users;
            match rng.random_range(0..3) {
                0 => SubcarrierMode::Oma { user: a },
                _ if ch.gain(a, n) >= ch.gain(b, n) => SubcarrierMode::Noma { first: a, second: b },
                _ => SubcarrierMode::Noma { first: b, second: a },
            }
        })
        .collect();
    let d = AccessDecision::from_modes(users, &modes).unwrap();
    let p = PowerMatrix::from_matrix(Matrix::from_fn(users, subcarriers, |_, _| {
        rng.random_range(0.0..inst.p_max / subcarriers as f64)
    }));
    (inst, ch, d, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn surrogate_is_tight_at_the_expansion_point(seed in any::<u64>()) {
        let (inst, ch, d, e) = random_noma_case(seed);
        let t = true_objective(&inst, &ch, &d, &e);
        let j = surrogate_objective(&inst, &ch, &d, &e, &e);
        prop_assert!((t - j).abs() <= 1e-12 * t.abs().max(1.0), "{t} vs {j}");
        for s in 0..inst.service_providers() {
            let r = sp_rate(&inst, &ch, &d, &e, s);
            let rs = surrogate_sp_rate(&inst, &ch, &d, &e, &e, s);
            prop_assert!((r - rs).abs() <= 1e-12 * r.abs().max(1.0));
        }
    }

    #[test]
    fn surrogate_minorizes_objective_and_rates(seed in any::<u64>(), other in any::<u64>()) {
        let (inst, ch, d, e) = random_noma_case(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(other);
        for _ in 0..20 {
            let p = PowerMatrix::from_matrix(Matrix::from_fn(inst.users, inst.subcarriers, |_, _| {
                rng.random_range(0.0..inst.p_max)
            }));
            let t = true_objective(&inst, &ch, &d, &p);
            let j = surrogate_objective(&inst, &ch, &d, &p, &e);
            prop_assert!(j <= t + 1e-9 * t.abs().max(1.0));
            for s in 0..inst.service_providers() {
                let r = sp_rate(&inst, &ch, &d, &p, s);
                prop_assert!(surrogate_sp_rate(&inst, &ch, &d, &p, &e, s) <= r + 1e-9 * r.abs().max(1.0));
            }
        }
    }

    #[test]
    fn accepted_iterates_never_lose_objective(seed in any::<u64>()) {
        let (inst, ch, d, init) = random_noma_case(seed);
        let res = dc_power_allocation(&inst, &ch, &d, &init, &PowerConfig::default()).unwrap();
        let accepted: Vec<f64> = res.trace.iterates.iter().filter(|i| i.accepted).map(|i| i.objective).collect();
        for w in accepted.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8, "{} then {}", w[0], w[1]);
        }
        for it in &res.trace.iterates {
            prop_assert!(it.surrogate_value.is_finite());
            if it.accepted {
                prop_assert!(it.feasible);
            }
        }
        prop_assert!(res.duals.is_nonnegative());
        for n in 0..inst.subcarriers {
            for k in 0..inst.users {
                if !d.mode(n).serves(k) {
                    prop_assert_eq!(res.powers[(k, n)], 0.0);
                }
            }
        }
    }
}

#[test]
fn subgradient_method_approaches_the_exact_solution() {
    let c = pair(5.0, 1.0, [2.0, 3.0], 20.0);
    let e = powers(2.0, 10.0);
    let zero = DualVariables::zeros(2, 2, 1);
    let exact = solve_surrogate(&c.inst, &c.ch, &c.d, &e, &zero, &PowerConfig::default());
    assert!(exact.feasible);
    let run = |iters: usize| {
        let cfg = PowerConfig {
            method: DualMethod::Subgradient,
            max_dual_iters: iters,
            eps_inner: 1e-12,
            ..PowerConfig::default()
        };
        let sub = solve_surrogate(&c.inst, &c.ch, &c.d, &e, &zero, &cfg);
        assert!(sub.duals.is_nonnegative());
        sub.powers.distance(&exact.powers)
    };
    let (coarse, fine) = (run(1_000), run(50_000));
    assert!(fine < 0.5 * coarse, "{coarse} then {fine}");
}

#[test]
fn bad_shapes_are_rejected() {
    let c = pair(5.0, 1.0, [0.0, 0.0], 10.0);
    let init = PowerMatrix::zeros(3, 1);
    assert!(dc_power_allocation(&c.inst, &c.ch, &c.d, &init, &PowerConfig::default()).is_err());
    let cfg = PowerConfig { eps_p: 0.0, ..PowerConfig::default() };
    assert!(dc_power_allocation(&c.inst, &c.ch, &c.d, &powers(1.0, 1.0), &cfg).is_err());
}

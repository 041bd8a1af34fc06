use comp_core::cones::ClarabelSolver;
use comp_core::dbrb::{point_in_s, Evaluator};
use comp_core::oracle::{enumerate_optimal, oracle_point_in_s, oracle_vs_dbrb, sample_feasible_points, OracleResult};
use comp_core::{compute_root_box, solve_dbrb, DbrbOptions, Error, Instance, SystemParams, Termination};

const DELTA: f64 = 0.05;

fn tiny(seed: u64, backhaul: f64) -> Instance {
    let p = SystemParams { num_bs: 2, antennas_per_bs: 2, num_users: 2, backhaul_cap: backhaul, ..SystemParams::default() };
    Instance::generate(p, seed).unwrap()
}

fn single(seed: u64, backhaul: f64) -> Instance {
    let p = SystemParams { num_bs: 1, antennas_per_bs: 2, num_users: 1, backhaul_cap: backhaul, ..SystemParams::default() };
    Instance::generate(p, seed).unwrap()
}

fn objective(r: &OracleResult) -> f64 {
    r.objective.expect("feasible")
}

#[test]
fn single_link_matches_closed_form() {
    for (seed, cap) in [(0, 3.0), (1, 100.0), (2, 8.0), (3, 1e3)] {
        let inst = single(seed, cap);
        let snr = inst.params().power_budget_w * inst.channels().norm_sqr(0) / inst.noise_power();
        let exact = cap.min(snr.ln_1p());
        let got = objective(&enumerate_optimal(&inst, DELTA).unwrap());
        assert!(got <= exact + 1e-6 && got >= exact - DELTA, "seed {seed}: {got} vs {exact}");
        let dbrb = solve_dbrb(&inst, &DbrbOptions::default()).unwrap();
        assert!((dbrb.lower - exact).abs() < 1e-3 * exact.max(1.0), "seed {seed}: {} vs {exact}", dbrb.lower);
        assert!(dbrb.upper >= exact - 1e-6);
    }
}

#[test]
fn golden_instance() {
    let golden: OracleResult =
        serde_json::from_str(include_str!("data/oracle_golden_b2m2k2_seed42.json")).unwrap();
    let got = enumerate_optimal(&tiny(42, 20.0), DELTA).unwrap();
    assert!((objective(&got) - objective(&golden)).abs() < 1e-9);
    assert_eq!(got.selection, golden.selection);
}

#[test]
fn finer_grid_never_loses() {
    for seed in [0, 5] {
        let inst = tiny(seed, 5.0);
        let coarse = objective(&enumerate_optimal(&inst, 2.0 * DELTA).unwrap());
        let fine = objective(&enumerate_optimal(&inst, DELTA).unwrap());
        assert!(fine >= coarse - 1e-12, "seed {seed}: {fine} < {coarse}");
    }
}

#[test]
fn reported_point_is_feasible() {
    let solver = ClarabelSolver::default();
    for seed in [1, 4] {
        let inst = tiny(seed, 5.0);
        let r = enumerate_optimal(&inst, DELTA).unwrap();
        let (sel, z) = (r.selection.clone().unwrap(), r.rates.clone().unwrap());
        assert!((z.iter().sum::<f64>() - objective(&r)).abs() < 1e-12);
        let ev = Evaluator::new(&inst, &solver);
        assert!(point_in_s(&ev, &sel, &z).unwrap());
        assert!(oracle_point_in_s(&inst, &sel, &z).unwrap());
    }
}

#[test]
fn monotone_in_backhaul_and_power() {
    let inst = tiny(7, 5.0);
    let by_cap: Vec<f64> =
        [2.0, 5.0, 10.0].iter().map(|&c| objective(&enumerate_optimal(&inst.with_backhaul(c).unwrap(), DELTA).unwrap())).collect();
    assert!(by_cap.windows(2).all(|w| w[0] <= w[1] + 1e-9), "{by_cap:?}");
    let base = inst.params().power_budget_w;
    let by_power: Vec<f64> = [0.1, 1.0, 10.0]
        .iter()
        .map(|&f| objective(&enumerate_optimal(&inst.with_power_budget(base * f).unwrap(), DELTA).unwrap()))
        .collect();
    assert!(by_power.windows(2).all(|w| w[0] <= w[1] + 1e-9), "{by_power:?}");
}

#[test]
fn nonincreasing_in_sinr_target() {
    // the grid origin moves with the target, so compare up to the grid error
    let inst = tiny(7, 5.0);
    let vals: Vec<f64> = [0.5, 1.0, 4.0]
        .iter()
        .map(|&g| objective(&enumerate_optimal(&inst.with_sinr_target(g).unwrap(), DELTA).unwrap()))
        .collect();
    let slack = inst.num_users() as f64 * DELTA;
    assert!(vals.windows(2).all(|w| w[1] <= w[0] + slack), "{vals:?}");
}

#[test]
fn infeasible_target_is_reported_by_both() {
    let inst = tiny(0, 20.0).with_sinr_target(1e12).unwrap();
    assert!(matches!(compute_root_box(&inst), Err(Error::InfeasibleInstance { .. })));
    assert_eq!(enumerate_optimal(&inst, DELTA).unwrap().objective, None);
    let report = oracle_vs_dbrb(&inst, DELTA, &DbrbOptions::default()).unwrap();
    assert!(report.both_infeasible && report.pass);
    assert_eq!(report.dbrb_termination, Termination::Infeasible);
}

#[test]
fn cost_guard_refuses_large_instances() {
    let p = SystemParams { num_bs: 3, antennas_per_bs: 1, num_users: 3, ..SystemParams::default() };
    let inst = Instance::generate(p, 0).unwrap();
    assert!(matches!(enumerate_optimal(&inst, DELTA), Err(Error::CostGuard(_))));
    let p = SystemParams { num_bs: 1, antennas_per_bs: 4, num_users: 4, ..SystemParams::default() };
    assert!(matches!(enumerate_optimal(&Instance::generate(p, 0).unwrap(), DELTA), Err(Error::CostGuard(_))));
    assert!(enumerate_optimal(&tiny(0, 5.0), 0.0).is_err());
}

#[test]
fn large_backhaul_and_low_target_agree() {
    let inst = tiny(3, 1e3).with_sinr_target(1e-3).unwrap();
    let report = oracle_vs_dbrb(&inst, DELTA, &DbrbOptions { eps_abs: 1e-2, ..DbrbOptions::default() }).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn sampled_points_are_feasible_and_in_box() {
    let inst = tiny(2, 5.0);
    let root = compute_root_box(&inst).unwrap();
    let pts = sample_feasible_points(&inst, &root, 5.0, 20, 1, 200).unwrap();
    assert_eq!(pts.len(), 20);
    for (sel, z) in &pts {
        assert!(z.iter().sum::<f64>() >= 5.0);
        let mut point = sel.as_f64();
        point.extend(z);
        assert!(root.contains(&point, 0.0));
    }
}

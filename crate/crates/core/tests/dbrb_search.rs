use comp_core::cones::ClarabelSolver;
use comp_core::dbrb::{bound, branch, reduce, BoundOutcome, Evaluator, ReductionOptions, UPPER_BOUND_SLACK};
use comp_core::oracle::{oracle_vs_dbrb, sample_feasible_points};
use comp_core::{compute_root_box, rates, solve_dbrb, DbrbOptions, Instance, SearchBox, SystemParams, Termination};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny(seed: u64, backhaul: f64) -> Instance {
    let p = SystemParams { num_bs: 2, antennas_per_bs: 2, num_users: 2, backhaul_cap: backhaul, ..SystemParams::default() };
    Instance::generate(p, seed).unwrap()
}

/// A random descendant of the root after `depth` splits.
fn random_sub_box(root: &SearchBox, depth: usize, rng: &mut ChaCha8Rng) -> SearchBox {
    let mut bx = root.clone();
    for _ in 0..depth {
        match branch(&bx) {
            Some((l, r)) => bx = if rng.random::<bool>() { l } else { r },
            None => break,
        }
    }
    bx
}

#[test]
fn agrees_with_the_oracle() {
    for (seed, cap) in [(0, 5.0), (3, 20.0)] {
        let report = oracle_vs_dbrb(&tiny(seed, cap), 0.05, &DbrbOptions { eps_abs: 1e-2, ..DbrbOptions::default() }).unwrap();
        assert!(report.pass, "seed {seed}: {report:?}");
    }
}

#[test]
fn trace_and_incumbent_invariants() {
    for (seed, cap) in [(1, 5.0), (2, 20.0), (6, 10.0)] {
        let inst = tiny(seed, cap);
        let res = solve_dbrb(&inst, &DbrbOptions::default()).unwrap();
        assert!(matches!(res.termination, Termination::Converged | Termination::Exhausted));
        assert!(!res.trace.is_empty());
        for w in res.trace.windows(2) {
            assert!(w[1].ub <= w[0].ub, "seed {seed}: upper bound rose");
            assert!(w[1].lb >= w[0].lb, "seed {seed}: lower bound fell");
            assert!(w[1].iter > w[0].iter);
        }
        for row in &res.trace {
            assert!(row.lb <= row.ub + 1e-9);
        }
        let inc = res.incumbent.unwrap();
        assert!(inc.check(&inst, 1e-6).is_feasible());
        assert!((inc.objective - rates(&inst, &inc.beamformer).sum()).abs() < 1e-9);
        assert!((res.lower - inc.objective).abs() < 1e-12);
        assert!(res.upper - res.lower <= (1e-3 * res.lower).max(1e-4) + 1e-12);
    }
}

#[test]
fn threads_do_not_change_the_search() {
    let inst = tiny(4, 5.0);
    let a = solve_dbrb(&inst, &DbrbOptions::default()).unwrap();
    let b = solve_dbrb(&inst, &DbrbOptions { threads: 2, ..DbrbOptions::default() }).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.termination, b.termination);
    assert_eq!(a.trace.len(), b.trace.len());
    for (x, y) in a.trace.iter().zip(&b.trace) {
        assert_eq!((x.iter, x.ub, x.lb, x.live_boxes), (y.iter, y.ub, y.lb, y.live_boxes));
    }
    assert_eq!(a.lower, b.lower);
    assert_eq!(a.upper, b.upper);
}

#[test]
fn more_backhaul_never_hurts() {
    let inst = tiny(8, 2.0);
    let opts = DbrbOptions { eps_abs: 1e-2, ..DbrbOptions::default() };
    let mut prev_upper = f64::NEG_INFINITY;
    let mut prev_lower = f64::NEG_INFINITY;
    for cap in [2.0, 5.0, 10.0, 20.0] {
        let res = solve_dbrb(&inst.with_backhaul(cap).unwrap(), &opts).unwrap();
        let gap = res.upper - res.lower;
        assert!(res.upper >= prev_lower - 1e-9, "cap {cap}");
        assert!(res.lower >= prev_lower - gap - 1e-9, "cap {cap}");
        assert!(res.upper >= prev_upper - gap - 1e-2, "cap {cap}");
        prev_upper = res.upper;
        prev_lower = res.lower;
    }
}

#[test]
fn reduction_keeps_every_sampled_point() {
    let solver = ClarabelSolver::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    for seed in [2, 5] {
        let inst = tiny(seed, 5.0);
        let ev = Evaluator::new(&inst, &solver);
        let root = compute_root_box(&inst).unwrap();
        for trial in 0..6 {
            let bx = random_sub_box(&root, trial, &mut rng);
            let theta = bx.objective_lower() + 0.4 * (bx.objective_upper() - bx.objective_lower());
            let pts = sample_feasible_points(&inst, &bx, theta, 15, seed * 100 + trial as u64, 150).unwrap();
            let reduced = reduce(&bx, theta, &ev, &ReductionOptions::default()).unwrap();
            for (sel, z) in &pts {
                let reduced = reduced.as_ref().unwrap_or_else(|| panic!("box emptied despite a feasible point {z:?}"));
                let mut point = sel.as_f64();
                point.extend(z);
                assert!(reduced.contains(&point, 1e-9), "lost {point:?} from {reduced:?}");
                checked += 1;
            }
            if let Some(r) = &reduced {
                assert!(r.is_subset_of(&bx, 0.0));
            }
        }
    }
    assert!(checked >= 50, "only {checked} points checked");
}

#[test]
fn bounds_cover_sampled_points() {
    let solver = ClarabelSolver::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for seed in [1, 7] {
        let inst = tiny(seed, 5.0);
        let ev = Evaluator::new(&inst, &solver);
        let root = compute_root_box(&inst).unwrap();
        for trial in 0..5 {
            let bx = random_sub_box(&root, 2 * trial, &mut rng);
            let theta = bx.objective_lower();
            let pts = sample_feasible_points(&inst, &bx, theta, 10, seed + 31 * trial as u64, 100).unwrap();
            match bound(&bx, theta, &ev).unwrap() {
                BoundOutcome::Prune => assert!(pts.is_empty(), "pruned a box with feasible points"),
                BoundOutcome::Bounded { upper, incumbent } => {
                    assert!(upper <= bx.objective_upper() + UPPER_BOUND_SLACK);
                    for (_, z) in &pts {
                        assert!(z.iter().sum::<f64>() <= upper + 1e-6);
                    }
                    if let Some(inc) = incumbent {
                        assert!(inc.check(&inst, 1e-6).is_feasible());
                        assert!(inc.objective <= upper + 1e-6);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn branching_partitions_the_box(
        pins in prop::collection::vec(0u8..3, 4),
        lo in prop::collection::vec(0.0f64..2.0, 2),
        width in prop::collection::vec(0.0f64..3.0, 2),
    ) {
        let mut lower: Vec<f64> = pins.iter().map(|&p| if p == 1 { 1.0 } else { 0.0 }).collect();
        let mut upper: Vec<f64> = pins.iter().map(|&p| if p == 0 { 0.0 } else { 1.0 }).collect();
        lower.extend(&lo);
        upper.extend(lo.iter().zip(&width).map(|(l, w)| l + w));
        let bx = SearchBox::new(lower, upper, 4).unwrap();
        match branch(&bx) {
            None => prop_assert!((0..bx.dim()).all(|i| bx.edge(i) == 0.0)),
            Some((l, r)) => {
                prop_assert!(l.is_subset_of(&bx, 0.0) && r.is_subset_of(&bx, 0.0));
                let split: Vec<usize> = (0..bx.dim()).filter(|&i| l.upper()[i] != bx.upper()[i]).collect();
                prop_assert_eq!(split.len(), 1);
                let j = split[0];
                let longest = (0..bx.dim()).map(|i| bx.edge(i)).fold(0.0, f64::max);
                prop_assert_eq!(bx.edge(j), longest);
                prop_assert_eq!(r.lower()[j] >= l.upper()[j], true);
                if bx.is_boolean(j) {
                    prop_assert_eq!((l.upper()[j], r.lower()[j]), (0.0, 1.0));
                } else {
                    prop_assert_eq!(l.upper()[j], r.lower()[j]);
                }
                for i in (0..bx.dim()).filter(|&i| i != j) {
                    prop_assert_eq!((l.lower()[i], l.upper()[i]), (bx.lower()[i], bx.upper()[i]));
                    prop_assert_eq!((r.lower()[i], r.upper()[i]), (bx.lower()[i], bx.upper()[i]));
                }
            }
        }
    }
}

use comp_core::cones::{beamformer_from_primal, build_feasibility_program, ClarabelSolver, ConeSolver, ConeStatus, FeasibilityGoal};
use comp_core::dbrb::{point_in_s, Evaluator};
use comp_core::problem::ConstraintKind;
use comp_core::{
    backhaul_usage, check_feasible, compute_root_box, rates, sinr, soc_rotate, Beamformer, Incumbent, Instance,
    RateVector, SelectionVector, SoftPower, SystemParams,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn tiny(seed: u64, backhaul: f64) -> Instance {
    let p = SystemParams { num_bs: 2, antennas_per_bs: 2, num_users: 2, backhaul_cap: backhaul, ..SystemParams::default() };
    Instance::generate(p, seed).unwrap()
}

fn random_beamformer(inst: &Instance, coeffs: &[f64], power_fraction: f64) -> Beamformer {
    let (nb, nk, m) = (inst.num_bs(), inst.num_users(), inst.antennas());
    let len = nb * m;
    let mut cols: Vec<Vec<Complex64>> = (0..nk)
        .map(|k| (0..len).map(|i| Complex64::new(coeffs[2 * (k * len + i)], coeffs[2 * (k * len + i) + 1])).collect())
        .collect();
    // scale each BS so its total power is the requested fraction of the budget
    for b in 0..nb {
        let power: f64 = cols.iter().map(|c| c[b * m..(b + 1) * m].iter().map(|v| v.norm_sqr()).sum::<f64>()).sum();
        let s = (power_fraction * inst.params().power_budget_w / power.max(1e-300)).sqrt();
        for c in &mut cols {
            c[b * m..(b + 1) * m].iter_mut().for_each(|v| *v *= s);
        }
    }
    Beamformer::from_columns(cols).unwrap()
}

#[test]
fn feasibility_solutions_satisfy_the_constraints() {
    let solver = ClarabelSolver::default();
    for seed in 0..8 {
        let inst = tiny(seed, 20.0);
        let root = compute_root_box(&inst).unwrap();
        let sel = SelectionVector(vec![true; inst.num_links()]);
        for goal in [FeasibilityGoal::Find, FeasibilityGoal::MinPower] {
            let prog = build_feasibility_program(&sel, root.z_lower(), &inst, goal).unwrap();
            let sol = solver.solve(&prog).unwrap();
            assert_eq!(sol.status, ConeStatus::Optimal, "seed {seed}");
            let w = beamformer_from_primal(&inst, prog.layout.as_ref().unwrap(), &sol.primal);
            let m = inst.antennas();
            let u = SoftPower(
                (0..inst.num_bs())
                    .flat_map(|b| (0..inst.num_users()).map(move |k| (b, k)))
                    .map(|(b, k)| w.block_power(b, k, m))
                    .collect(),
            );
            let report = check_feasible(&inst, &w, &sel.as_f64(), &u, 1e-6);
            // the backhaul depends on the achieved rates; everything else must hold
            assert!(!report.violates(|k| !matches!(k, ConstraintKind::Backhaul { .. })), "{report:?}");
            for k in 0..inst.num_users() {
                assert!(sinr(&inst, &w, k) >= inst.params().sinr_target - 1e-6);
            }
        }
    }
}

#[test]
fn min_power_solution_sits_at_the_floors() {
    let solver = ClarabelSolver::default();
    let inst = tiny(1, 20.0);
    let sel = SelectionVector(vec![true; 4]);
    let z = [1.0, 1.5];
    let prog = build_feasibility_program(&sel, &z, &inst, FeasibilityGoal::MinPower).unwrap();
    let sol = solver.solve(&prog).unwrap();
    let w = beamformer_from_primal(&inst, prog.layout.as_ref().unwrap(), &sol.primal);
    let r = rates(&inst, &w);
    for k in 0..2 {
        assert!((r.0[k] - z[k]).abs() < 1e-5, "{:?}", r.0);
    }
}

#[test]
fn disconnected_selection_has_no_program() {
    let inst = tiny(0, 20.0);
    let sel = SelectionVector(vec![true, false, true, false]);
    assert!(build_feasibility_program(&sel, &[0.7, 0.7], &inst, FeasibilityGoal::Find).is_none());
}

#[test]
fn membership_cases() {
    let solver = ClarabelSolver::default();
    let inst = tiny(2, 5.0);
    let ev = Evaluator::new(&inst, &solver);
    let root = compute_root_box(&inst).unwrap();
    let all = SelectionVector(vec![true; 4]);
    assert!(point_in_s(&ev, &all, root.z_lower()).unwrap());
    // a user without a link
    assert!(!point_in_s(&ev, &SelectionVector(vec![true, false, true, false]), root.z_lower()).unwrap());
    // both users on both sites with 3 + 3 nats overloads a 5 nat backhaul
    assert!(!point_in_s(&ev, &all, &[3.0, 3.0]).unwrap());
    // one user per site: the backhaul allows 4 + 4, but not rates beyond the power limit
    let split = SelectionVector(vec![true, false, false, true]);
    let zmax: Vec<f64> = root.z_upper().iter().map(|z| z + 1.0).collect();
    assert!(!point_in_s(&ev, &split, &zmax).unwrap());
}

#[test]
fn incumbents_are_consistent() {
    let solver = ClarabelSolver::default();
    let inst = tiny(3, 20.0);
    let root = compute_root_box(&inst).unwrap();
    let sel = SelectionVector(vec![true; 4]);
    let prog = build_feasibility_program(&sel, root.z_lower(), &inst, FeasibilityGoal::MinPower).unwrap();
    let sol = solver.solve(&prog).unwrap();
    let w = beamformer_from_primal(&inst, prog.layout.as_ref().unwrap(), &sol.primal);
    let inc = Incumbent::from_beamformer(&inst, sel, w, 1e-6).unwrap();
    assert!(inc.check(&inst, 1e-6).is_feasible());
    assert!((inc.objective - rates(&inst, &inc.beamformer).sum()).abs() < 1e-9);
    for &r in &inc.rates.0 {
        assert!(r >= inst.min_rate() - 1e-6);
    }
}

#[test]
fn single_link_closed_form_root() {
    let p = SystemParams { num_bs: 1, antennas_per_bs: 3, num_users: 1, backhaul_cap: 100.0, ..SystemParams::default() };
    let inst = Instance::generate(p, 9).unwrap();
    let root = compute_root_box(&inst).unwrap();
    let snr = inst.params().power_budget_w * inst.channels().norm_sqr(0) / inst.noise_power();
    assert!((root.z_upper()[0] - snr.ln_1p()).abs() < 1e-12);
    // matched filter at full power attains the bound
    let h = inst.channels().user(0);
    let scale = (inst.params().power_budget_w / inst.channels().norm_sqr(0)).sqrt();
    let w = Beamformer::from_columns(vec![h.iter().map(|v| v.conj() * scale).collect()]).unwrap();
    assert!((rates(&inst, &w).0[0] - snr.ln_1p()).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotation_keeps_every_sinr(seed in 0u64..50, coeffs in prop::collection::vec(-1.0f64..1.0, 16)) {
        let inst = tiny(seed, 20.0);
        let w = random_beamformer(&inst, &coeffs, 0.7);
        let r = soc_rotate(&inst, &w);
        for k in 0..2 {
            let (a, b) = (sinr(&inst, &w, k), sinr(&inst, &r, k));
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            let hw: Complex64 = inst.channels().user(k).iter().zip(r.column(k)).map(|(h, v)| h * v).sum();
            prop_assert!(hw.im.abs() <= 1e-9 * hw.norm().max(1e-300));
        }
    }

    #[test]
    fn rates_within_root_power_bound(seed in 0u64..50, frac in 0.01f64..1.0,
                                     coeffs in prop::collection::vec(-1.0f64..1.0, 16)) {
        let inst = tiny(seed, 1e6);
        let w = random_beamformer(&inst, &coeffs, frac);
        let root = compute_root_box(&inst).unwrap();
        for (k, r) in rates(&inst, &w).0.iter().enumerate() {
            prop_assert!(*r <= root.z_upper()[k] + 1e-9);
        }
    }

    #[test]
    fn backhaul_load_is_monotone(x in prop::collection::vec(0.0f64..1.0, 6), r in prop::collection::vec(0.0f64..5.0, 3),
                                 i in 0usize..6, dx in 0.0f64..1.0, j in 0usize..3, dr in 0.0f64..2.0) {
        let base = RateVector(r.clone());
        for b in 0..2 {
            let u0 = backhaul_usage(&x, &base, b);
            let mut x2 = x.clone();
            x2[i] += dx;
            prop_assert!(backhaul_usage(&x2, &base, b) >= u0);
            let mut r2 = r.clone();
            r2[j] += dr;
            prop_assert!(backhaul_usage(&x, &RateVector(r2), b) >= u0);
        }
    }

    #[test]
    fn feasible_points_meet_the_rate_floor(seed in 0u64..50, coeffs in prop::collection::vec(-1.0f64..1.0, 16)) {
        let inst = tiny(seed, 20.0);
        let w = random_beamformer(&inst, &coeffs, 1.0);
        let sel = vec![1.0; 4];
        let m = inst.antennas();
        let u = SoftPower((0..2).flat_map(|b| (0..2).map(move |k| (b, k))).map(|(b, k)| w.block_power(b, k, m)).collect());
        if check_feasible(&inst, &w, &sel, &u, 0.0).is_feasible() {
            for r in rates(&inst, &w).0 {
                prop_assert!(r >= inst.min_rate());
            }
        }
    }
}

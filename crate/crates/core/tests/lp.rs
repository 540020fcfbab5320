mod common;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use online_covering::experts::{collect_predictions, Roster};
use online_covering::instance::{gen_random, GeneratorParams};
use online_covering::lp::{
    build_dual_lp, build_lincomb_lp, build_relaxation_lp, solve_dynamic, solve_lp, solve_lp_with, solve_offline_opt,
    LinearProgram, LpStatus, PivotRule, SimplexOptions,
};

fn check_against_vertices(p: &LinearProgram, rule: PivotRule) -> Result<(), String> {
    let sol = solve_lp_with(p, SimplexOptions { rule, max_pivots: None }).map_err(|e| e.to_string())?;
    match (common::brute_force(p), sol.status) {
        (None, LpStatus::Infeasible) => Ok(()),
        (Some((v, _)), LpStatus::Optimal) => {
            if (sol.objective - v).abs() > 1e-7 {
                return Err(format!("simplex {} vs vertices {v}", sol.objective));
            }
            if p.max_violation(&sol.x) > 1e-7 {
                return Err(format!("simplex point violates by {:e}", p.max_violation(&sol.x)));
            }
            Ok(())
        }
        (bf, s) => Err(format!("simplex says {s:?}, vertices give {bf:?}")),
    }
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut optimal, mut infeasible) = (0, 0);
    for case in 0..300 {
        let p = common::random_small_lp(&mut rng);
        for rule in [PivotRule::Bland, PivotRule::Dantzig] {
            if let Err(e) = check_against_vertices(&p, rule) {
                panic!("case {case} ({rule:?}): {e}\n{}", serde_json::to_string(&p).unwrap());
            }
        }
        match common::brute_force(&p) {
            Some(_) => optimal += 1,
            None => infeasible += 1,
        }
    }
    // Both outcomes are exercised.
    assert!(optimal >= 100 && infeasible >= 20, "{optimal} optimal, {infeasible} infeasible");
}

#[test]
fn covering_strong_duality() {
    for seed in 0..12u64 {
        let p = GeneratorParams::preset(1 + (seed as usize % 4)).unwrap().with_seed(500 + seed);
        let inst = gen_random(&p).unwrap();
        let (primal, dual) = common::covering_pair(&inst);
        let a = solve_lp(&primal).unwrap();
        let b = solve_lp(&dual).unwrap();
        let (pv, dv) = (a.value().unwrap(), b.value().unwrap());
        assert!((pv - dv).abs() <= 1e-7 * pv.abs().max(1.0), "seed {seed}: {pv} vs {dv}");
        assert!(primal.max_violation(&a.x) <= 1e-7);
        assert!(dual.max_violation(&b.x) <= 1e-7);
        // Same value as the library's offline program.
        let opt = solve_offline_opt(&inst).unwrap().value().unwrap();
        assert!((opt - pv).abs() <= 1e-7 * pv.max(1.0));
    }
}

#[test]
fn benchmark_programs_are_ordered() {
    for seed in 0..8u64 {
        let p = GeneratorParams::preset(1 + (seed as usize % 4)).unwrap().with_seed(900 + seed);
        let inst = gen_random(&p).unwrap();
        let mut experts = Roster::from_params(&p).build(&inst, None, None).unwrap();
        let pm = collect_predictions(&inst, &mut experts, 1e-7).unwrap();
        let val = |lp: &LinearProgram| solve_lp(lp).unwrap().value().unwrap();
        let lin = val(&build_lincomb_lp(&inst, &pm).0);
        let rel = val(&build_relaxation_lp(&inst, &pm).0);
        let dual = val(&build_dual_lp(&inst, &pm).0);
        let dynamic = solve_dynamic(&inst, &pm).unwrap().value().unwrap();
        let opt = solve_offline_opt(&inst).unwrap().value().unwrap();
        let tol = 1e-6 * lin.max(1.0_f64);
        assert!((rel - dual).abs() <= tol, "seed {seed}: relaxation {rel} dual {dual}");
        assert!(opt <= rel + tol && rel <= lin + tol && opt <= dynamic + tol && dynamic <= lin + tol);
        for s in pm.final_predictions() {
            let cost: f64 = inst.costs.iter().zip(&s).map(|(c, x)| c * x).sum();
            assert!(lin <= cost + tol, "seed {seed}: lincomb {lin} above an expert ({cost})");
        }
    }
}

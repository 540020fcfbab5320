mod common;

use proptest::prelude::*;

use online_covering::experts::{collect_predictions, Roster, EXPERT_TOL};
use online_covering::harness::{execute, AlgoKind, ExperimentConfig, HarnessConfig};
use online_covering::instance::{gen_random, GeneratorParams};

fn params() -> impl Strategy<Value = GeneratorParams> {
    (2usize..10, 1usize..10, 1u32..20, 1u32..5, 0usize..4, 0usize..3, 0usize..3, 0usize..2, any::<u64>())
        .prop_flat_map(|(v, c, cmax, amax, zmax, pe, re, ae, seed)| {
            let zmax = zmax.min(v - 1);
            (1u32..=cmax, 1u32..=amax, 0usize..=zmax, 0usize..3).prop_map(move |(cmin, amin, zmin, oe)| {
                GeneratorParams {
                    variables: v,
                    constraints: c,
                    min_cost: cmin,
                    max_cost: cmax,
                    min_coeff: amin,
                    max_coeff: amax,
                    min_zeros: zmin,
                    max_zeros: zmax,
                    perfect_experts: pe,
                    online_experts: oe,
                    random_experts: re,
                    adversarial_experts: ae,
                    seed,
                }
            })
        })
        .prop_filter("at least one expert", |p| p.num_experts() > 0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    /// Every algorithm's trace is monotone, keeps all revealed rows covered
    /// and reports the cost of its final solution.
    #[test]
    fn online_invariants(p in params()) {
        let inst = gen_random(&p).unwrap();
        let cfg = ExperimentConfig::new("prop", inst, None)
            .with_algos(vec![AlgoKind::Alg, AlgoKind::Mwa, AlgoKind::Anand, AlgoKind::Combined]);
        let out = execute(&cfg, &HarnessConfig::default()).unwrap();
        for name in ["online/alg", "online/mwa", "online/anand", "online/combined", "beta-certificate", "sandwich"] {
            let c = out.report.check(name).unwrap_or_else(|| panic!("missing {name}"));
            prop_assert!(!c.failed(), "{}: {}", name, c.detail);
        }
        let run = out.alg.unwrap();
        let x = &run.trace.last().unwrap().x;
        prop_assert_eq!(x, &run.x);
    }

    /// Experts built from generator parameters stay valid on every step.
    #[test]
    fn experts_stay_valid(p in params()) {
        let inst = gen_random(&p).unwrap();
        let mut experts = Roster::from_params(&p).build(&inst, None, None).unwrap();
        let pm = collect_predictions(&inst, &mut experts, EXPERT_TOL).unwrap();
        prop_assert_eq!(pm.surviving().len(), p.num_experts());
        for t in 0..pm.len() {
            for k in 0..pm.num_experts {
                let s = pm.get(t, k);
                prop_assert!(s.iter().all(|v| *v >= 0.0));
                for row in &inst.rows[..=t] {
                    prop_assert!(common::dot(row, s) >= 1.0 - 1e-9);
                }
                if t > 0 {
                    let before = pm.get(t - 1, k);
                    prop_assert!(s.iter().zip(before).all(|(a, b)| a >= b));
                }
            }
        }
    }
}

#[test]
fn experts_valid_on_presets() {
    for seed in 0..100u64 {
        let p = GeneratorParams::preset(1 + (seed as usize % 4)).unwrap().with_seed(seed);
        let inst = gen_random(&p).unwrap();
        let mut experts = Roster::from_params(&p).build(&inst, None, None).unwrap();
        let pm = collect_predictions(&inst, &mut experts, EXPERT_TOL).unwrap();
        assert_eq!(pm.surviving().len(), p.num_experts(), "seed {seed}");
    }
}

#[test]
fn preprocessing_properties() {
    for seed in 0..5 {
        let w = common::preprocess_suite(seed, 1000);
        assert_eq!(w.steps, 1000);
        assert!(w.holds(1e-9), "seed {seed}: {w:?}");
    }
}

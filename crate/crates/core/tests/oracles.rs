//! Library models checked against the brute-force references on random
//! inputs.

mod common;

use common::oracle::{self, SimBudget, SimNest, UNBOUNDED};
use convpipe_core::accelmodel::{schedule, LoopNestSpec, ResourceBudget};
use convpipe_core::pipeline::{pipelined_total, sequential_total};
use proptest::prelude::*;

fn spec(trips: &[u64], unroll: &[u64], level: usize, mults: u64, adds: u64) -> LoopNestSpec {
    LoopNestSpec {
        name: "p".into(),
        trip_counts: trips.to_vec(),
        unroll_factors: unroll.to_vec(),
        pipelined_level: level,
        accesses: vec![],
        mults_per_body: mults,
        adds_per_body: adds,
    }
}

fn nest_strategy() -> impl Strategy<Value = (Vec<u64>, Vec<u64>, usize, u64, u64)> {
    (1usize..=3).prop_flat_map(|n| {
        (
            prop::collection::vec(1u64..=12, n),
            prop::collection::vec(prop::sample::select(vec![1u64, 2, 4, 8]), n),
            0..n,
            0u64..=4,
            0u64..=4,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn formula_matches_simulator(
        (trips, unroll, level, mults, adds) in nest_strategy(),
        cap_m in prop::sample::select(vec![3u64, 7, 25, UNBOUNDED]),
        cap_a in prop::sample::select(vec![3u64, 7, 25, UNBOUNDED]),
        depth in 1u64..16,
    ) {
        let budget = ResourceBudget { max_multipliers: cap_m, max_adders: cap_a, pipeline_depth: depth, ..ResourceBudget::default() };
        let lib = schedule(&spec(&trips, &unroll, level, mults, adds), &[], &budget).unwrap();
        let sim = oracle::simulate_schedule(
            &SimNest { trips, unroll, level, mults, adds, accesses: vec![] },
            &SimBudget { mults: cap_m, adds: cap_a, depth },
        );
        prop_assert_eq!(lib.cycles, sim.cycles);
        prop_assert_eq!(lib.effective_ii, sim.ii);
        prop_assert_eq!(lib.inner_iterations, sim.iterations_per_tile);
        prop_assert_eq!(lib.multipliers_demanded, sim.mult_demand);
    }

    #[test]
    fn more_multipliers_never_slow_a_nest(
        (trips, unroll, level, mults, adds) in nest_strategy(),
        cap in 1u64..30,
        extra in 1u64..30,
    ) {
        let n = spec(&trips, &unroll, level, mults, adds);
        let tight = ResourceBudget { max_multipliers: cap, ..ResourceBudget::default() };
        let loose = ResourceBudget { max_multipliers: cap + extra, ..ResourceBudget::default() };
        prop_assert!(schedule(&n, &[], &loose).unwrap().cycles <= schedule(&n, &[], &tight).unwrap().cycles);
    }

    #[test]
    fn pipeline_recurrence_matches_tick_simulation(
        stages in prop::collection::vec((1u64..30, 1u64..30), 1..80),
    ) {
        let host: Vec<u64> = stages.iter().map(|s| s.0).collect();
        let accel: Vec<u64> = stages.iter().map(|s| s.1).collect();
        let sim = oracle::simulate_pipeline(&host, &accel);
        let as_f = |v: &[u64]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
        let (h, a) = (as_f(&host), as_f(&accel));
        prop_assert_eq!(pipelined_total(&h, &a), sim.pipelined as f64);
        prop_assert_eq!(sequential_total(&h, &a), sim.sequential as f64);
        let bottleneck = h.iter().sum::<f64>().max(a.iter().sum::<f64>());
        prop_assert!(pipelined_total(&h, &a) >= bottleneck);
    }
}

#[test]
fn bank_enumeration_agrees_with_cyclic_arithmetic() {
    for unroll in 1..=8u64 {
        for banks in 1..=8u64 {
            let clashes = oracle::enumerate_bank_clashes(64, unroll, banks);
            assert_eq!(
                clashes.is_empty(),
                unroll <= banks,
                "unroll {unroll} banks {banks}"
            );
        }
    }
}

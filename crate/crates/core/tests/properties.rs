use proptest::prelude::*;
use relaynet::demand::mean_scenario;
use relaynet::demand::ScenarioSet;
use relaynet::milp::{formulate, CostParams, Pattern, VarKey};
use relaynet::services::Consistency;
use relaynet::solver::{solve_milp, MilpStatus, SolveOptions};
use relaynet::Model;
use relaynet_testkit::{random_instance, RandomSpec};

fn spec(seed: u64) -> RandomSpec {
    RandomSpec {
        seed,
        hubs: 3,
        commodities: 2,
        scenarios: 2,
        capacity: 2,
        service_keep: 0.7,
        ..RandomSpec::default()
    }
}

fn optimum(model: &Model) -> (f64, Vec<f64>) {
    let sol = solve_milp(
        model,
        &SolveOptions {
            rel_gap_tol: 1e-9,
            ..SolveOptions::default()
        },
    )
    .unwrap();
    assert_eq!(sol.status, MilpStatus::Optimal);
    (sol.objective.unwrap(), sol.values)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn scp_solutions_map_into_mcp(seed in 0u64..10_000) {
        let scp = random_instance(&RandomSpec { pattern: Pattern::FluScp, ..spec(seed) });
        let mcp = scp.with_pattern(Pattern::FluMcp);
        let (scp_model, scp_map) = formulate(&scp).unwrap();
        let (mcp_model, mcp_map) = formulate(&mcp).unwrap();
        let (scp_obj, scp_x) = optimum(&scp_model);
        let mut mapped = vec![0.0; mcp_model.num_vars()];
        for (j, key) in mcp_map.iter() {
            let v = scp_map.value(key, &scp_x);
            mapped[j] = match *key {
                VarKey::F { k, w, .. } => scp.scenarios.scenarios[w].volumes[k] * v,
                _ => v,
            };
        }
        prop_assert!(mcp_model.violations(&mapped, 1e-6).is_empty());
        prop_assert!(close(mcp_model.objective_value(&mapped), scp_obj));
        let (mcp_obj, _) = optimum(&mcp_model);
        prop_assert!(mcp_obj <= scp_obj + 1e-6);
    }

    #[test]
    fn single_scenario_matches_its_deterministic_model(seed in 0u64..10_000, p in 0usize..3) {
        let inst = random_instance(&RandomSpec { scenarios: 1, pattern: Pattern::ALL[p], ..spec(seed) });
        let det = inst.with_scenarios(ScenarioSet {
            scenarios: vec![mean_scenario(&inst.scenarios)],
            seed: 0,
        }).unwrap();
        let (a, _) = optimum(&formulate(&inst).unwrap().0);
        let (b, _) = optimum(&formulate(&det).unwrap().0);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn scaling_costs_scales_the_optimum(seed in 0u64..10_000, alpha in 0.1f64..10.0) {
        let inst = random_instance(&spec(seed));
        let (model, _) = formulate(&inst).unwrap();
        let (obj, x) = optimum(&model);
        let mut scaled = model.clone();
        for v in &mut scaled.vars {
            v.obj *= alpha;
        }
        let (scaled_obj, _) = optimum(&scaled);
        prop_assert!(close(scaled_obj, alpha * obj), "{} vs {}", scaled_obj, alpha * obj);
        prop_assert!(scaled.violations(&x, 1e-9).is_empty());
        prop_assert!(close(scaled.objective_value(&x), scaled_obj));
    }

    #[test]
    fn more_hauler_sizes_never_cost_more(seed in 0u64..10_000, p in 0usize..3) {
        let fixed = random_instance(&RandomSpec { pattern: Pattern::ALL[p], haulers: vec![8], ..spec(seed) });
        let various = fixed.with_haulers(vec![4, 8]).unwrap();
        let (a, _) = optimum(&formulate(&fixed).unwrap().0);
        let (b, _) = optimum(&formulate(&various).unwrap().0);
        prop_assert!(b <= a + 1e-6, "{} > {}", b, a);
    }

    #[test]
    fn more_capacity_never_costs_more(seed in 0u64..10_000, p in 0usize..3, cap in 1u32..3) {
        let small = random_instance(&RandomSpec { pattern: Pattern::ALL[p], capacity: cap, ..spec(seed) });
        let large = random_instance(&RandomSpec { pattern: Pattern::ALL[p], capacity: cap + 1, ..spec(seed) });
        let (a, _) = optimum(&formulate(&small).unwrap().0);
        let (b, _) = optimum(&formulate(&large).unwrap().0);
        prop_assert!(b <= a + 1e-6, "{} > {}", b, a);
    }

    #[test]
    fn daily_ties_cost_something_without_a_discount(seed in 0u64..10_000, p in 0usize..3) {
        let base = random_instance(&RandomSpec {
            pattern: Pattern::ALL[p],
            num_steps: 4,
            num_cycles: 2,
            cycle_steps: 2,
            ..spec(seed)
        });
        let weekly = base
            .with_costs(CostParams { consistency_discount: 1.0, ..CostParams::default() })
            .unwrap();
        let daily = weekly.with_consistency(Consistency::Daily).unwrap();
        let (w, _) = optimum(&formulate(&weekly).unwrap().0);
        let (d, _) = optimum(&formulate(&daily).unwrap().0);
        prop_assert!(w <= d + 1e-6, "{} > {}", w, d);
    }
}

//! Test support: seeded random instances and an exact reference solver that
//! shares no code with the simplex engine.

pub mod audit;
pub mod exact;

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaynet::demand::{write_commodities, write_scenarios, Commodity, Scenario, ScenarioSet};
use relaynet::milp::{CostParams, Instance, Pattern};
use relaynet::network::{load_physical_network, ArcRow, Hub, NetworkDoc, TimeGrid};
use relaynet::services::{Consistency, HosPolicy, ServiceOverride};

#[derive(Debug, Clone)]
pub struct RandomSpec {
    pub seed: u64,
    pub hubs: usize,
    pub commodities: usize,
    pub scenarios: usize,
    /// Last time instant T; steps are 6 hours.
    pub num_steps: usize,
    pub pattern: Pattern,
    pub consistency: Consistency,
    /// Cycles in the start window, `cycle_steps` steps each.
    pub num_cycles: usize,
    pub cycle_steps: usize,
    pub haulers: Vec<u32>,
    pub capacity: u32,
    pub max_volume: u32,
    /// Chance that each enumerated (route, start) survives.
    pub service_keep: f64,
    /// Chance of an extra arc beyond the spanning tree, per hub pair.
    pub extra_arc: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            hubs: 3,
            commodities: 2,
            scenarios: 2,
            num_steps: 4,
            pattern: Pattern::FluMcp,
            consistency: Consistency::Weekly,
            num_cycles: 1,
            cycle_steps: 4,
            haulers: vec![8],
            capacity: 10,
            max_volume: 12,
            service_keep: 1.0,
            extra_arc: 0.3,
        }
    }
}

/// Network document for `hubs` hubs west to east: a random spanning tree plus
/// random extra arcs, 1-step arcs of 150 to 275 miles.
pub fn random_network(rng: &mut ChaCha8Rng, hubs: usize, extra_arc: f64) -> NetworkDoc {
    let mut arcs = Vec::new();
    let mut linked = std::collections::BTreeSet::new();
    let mut add = |rng: &mut ChaCha8Rng, a: usize, b: usize| {
        if linked.insert((a.min(b), a.max(b))) {
            arcs.push(ArcRow {
                from: a,
                to: b,
                travel_steps: 1,
                distance_miles: rng.random_range(150..=275) as f64,
                directed: false,
            });
        }
    };
    for i in 1..hubs {
        let j = rng.random_range(0..i);
        add(rng, j, i);
    }
    for a in 0..hubs {
        for b in a + 1..hubs {
            if rng.random_bool(extra_arc) {
                add(rng, a, b);
            }
        }
    }
    NetworkDoc {
        hubs: (0..hubs)
            .map(|i| Hub {
                id: i,
                name: format!("H{i}"),
                lon: Some(-90.0 + i as f64),
                lat: Some(33.0),
            })
            .collect(),
        arcs,
    }
}

pub fn random_instance(spec: &RandomSpec) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let doc = random_network(&mut rng, spec.hubs, spec.extra_arc);
    let pnet = load_physical_network(&doc).expect("generated network is valid");
    let t = spec.num_steps;
    assert!(t >= 2, "need at least two steps for a round trip");

    let commodities: Vec<Commodity> = (0..spec.commodities)
        .map(|id| {
            let o = rng.random_range(0..spec.hubs);
            let mut d = rng.random_range(0..spec.hubs - 1);
            if d >= o {
                d += 1;
            }
            let entry = rng.random_range(0..=t - 2);
            let due = rng.random_range(entry + 2..=t);
            Commodity::new(id, o, d, entry, due)
        })
        .collect();
    let n = spec.scenarios;
    let scenarios = ScenarioSet {
        scenarios: (0..n)
            .map(|id| Scenario {
                id,
                probability: 1.0 / n as f64,
                volumes: (0..spec.commodities)
                    .map(|_| rng.random_range(0..=spec.max_volume) as f64)
                    .collect(),
            })
            .collect(),
        seed: spec.seed,
    };
    let costs = CostParams {
        default_capacity: spec.capacity,
        ..CostParams::default()
    };
    let grid = TimeGrid {
        step_hours: 6.0,
        num_steps: t,
        num_cycles: spec.num_cycles,
        cycle_steps: spec.cycle_steps,
    };
    let inst = Instance::new(
        pnet,
        grid,
        HosPolicy::default(),
        commodities,
        scenarios,
        costs,
        spec.haulers.clone(),
        spec.pattern,
        spec.consistency,
    )
    .expect("generated instance is valid");

    if spec.service_keep >= 1.0 {
        return inst;
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut prune = Vec::new();
    for s in inst.catalog.services() {
        let key = (s.route_label(), s.cycle, s.start_in_cycle);
        if seen.insert(key.clone()) && !rng.random_bool(spec.service_keep) {
            prune.push(ServiceOverride {
                route: key.0,
                start_in_cycle: key.2,
                cycle: key.1,
                capacity: 0,
                contract_fee: None,
            });
        }
    }
    inst.with_overrides(prune).expect("pruning keeps the instance valid")
}

/// Three hubs A-B-C on a line, 275-mile arcs, two 6-hour steps, one
/// commodity A to B over the whole horizon, one scenario per volume.
pub fn desk_instance(pattern: Pattern, volumes: &[f64]) -> Instance {
    let doc = NetworkDoc {
        hubs: ["A", "B", "C"]
            .iter()
            .enumerate()
            .map(|(id, n)| Hub {
                id,
                name: (*n).into(),
                lon: None,
                lat: None,
            })
            .collect(),
        arcs: (1..3)
            .map(|i| ArcRow {
                from: i - 1,
                to: i,
                travel_steps: 1,
                distance_miles: 275.0,
                directed: false,
            })
            .collect(),
    };
    let scenarios = ScenarioSet {
        scenarios: volumes
            .iter()
            .enumerate()
            .map(|(id, &v)| Scenario {
                id,
                probability: 1.0 / volumes.len() as f64,
                volumes: vec![v],
            })
            .collect(),
        seed: 0,
    };
    Instance::new(
        load_physical_network(&doc).expect("line network is valid"),
        TimeGrid {
            step_hours: 6.0,
            num_steps: 2,
            num_cycles: 1,
            cycle_steps: 3,
        },
        HosPolicy::default(),
        vec![Commodity::new(0, 0, 1, 0, 2)],
        scenarios,
        CostParams::default(),
        vec![8],
        pattern,
        Consistency::Weekly,
    )
    .expect("desk instance is valid")
}

/// Tiny instance family cycling through 2 to 4 hubs, 1 to 3 commodities,
/// 1 or 2 scenarios and all three patterns; most draws stay within reach of
/// exhaustive enumeration.
pub fn small_spec(seed: u64) -> RandomSpec {
    let hubs = 2 + (seed / 3 % 3) as usize;
    RandomSpec {
        seed,
        hubs,
        commodities: 1 + (seed % 3) as usize,
        scenarios: 1 + (seed / 9 % 2) as usize,
        num_steps: 2,
        pattern: Pattern::ALL[(seed % 3) as usize],
        capacity: 2,
        max_volume: 10,
        service_keep: if hubs == 2 { 1.0 } else { 0.4 },
        extra_arc: 0.2,
        ..RandomSpec::default()
    }
}

/// The 4-hub, 5-scenario family used for value-of-stochastic-solution and
/// pattern-ordering batteries.
pub fn battery_spec(seed: u64) -> RandomSpec {
    RandomSpec {
        seed,
        hubs: 4,
        commodities: 2,
        scenarios: 5,
        num_steps: 4,
        capacity: 3,
        max_volume: 12,
        service_keep: 0.6,
        ..RandomSpec::default()
    }
}

/// Writes `spec`'s instance as command-line input documents under `dir` and
/// returns the config path. Pruned services become capacity-0 overrides.
pub fn write_run_files(spec: &RandomSpec, dir: &Path) -> std::io::Result<PathBuf> {
    let inst = random_instance(spec);
    let doc = random_network(&mut ChaCha8Rng::seed_from_u64(spec.seed), spec.hubs, spec.extra_arc);
    let bad = |e: relaynet::Error| std::io::Error::other(e.to_string());
    fs::write(dir.join("network.toml"), doc.to_toml_string().map_err(bad)?)?;
    let mut buf = Vec::new();
    write_commodities(&mut buf, &inst.commodities).map_err(bad)?;
    fs::write(dir.join("commodities.csv"), &buf)?;
    buf.clear();
    write_scenarios(&mut buf, &inst.scenarios).map_err(bad)?;
    fs::write(dir.join("scenarios.csv"), &buf)?;
    let mut overrides = String::from("route,start_in_cycle,cycle,capacity\n");
    for o in &inst.overrides {
        overrides.push_str(&format!("{},{},{},{}\n", o.route, o.start_in_cycle, o.cycle, o.capacity));
    }
    fs::write(dir.join("overrides.csv"), overrides)?;
    let haulers: Vec<String> = spec.haulers.iter().map(u32::to_string).collect();
    let cfg = format!(
        "seed = {}\noverrides = \"overrides.csv\"\npattern = \"{}\"\nconsistency = \"{}\"\nhaulers = [{}]\n\n\
         [grid]\nstep_hours = 6.0\nnum_steps = {}\nnum_cycles = {}\ncycle_steps = {}\n\n\
         [costs]\ndefault_capacity = {}\n\n[solve]\nrel_gap_tol = 1e-9\n",
        spec.seed,
        spec.pattern,
        spec.consistency,
        haulers.join(", "),
        spec.num_steps,
        spec.num_cycles,
        spec.cycle_steps,
        spec.capacity
    );
    let path = dir.join("relaynet.toml");
    fs::write(&path, cfg)?;
    Ok(path)
}

use relaynet::demand::{
    generate_commodities, generate_scenarios, mean_scenario, outsourcing_cost, read_commodities, read_scenarios,
    write_commodities, write_scenarios, Commodity, DemandSpec, Scenario, ScenarioSet,
};
use relaynet::network::{load_physical_network, ArcRow, Hub, NetworkDoc, PhysicalNetwork, TimeGrid};

fn net() -> PhysicalNetwork {
    load_physical_network(&NetworkDoc {
        hubs: (0..3)
            .map(|id| Hub {
                id,
                name: format!("H{id}"),
                lon: Some(-85.0 + id as f64),
                lat: Some(33.0),
            })
            .collect(),
        arcs: vec![
            ArcRow {
                from: 0,
                to: 1,
                travel_steps: 1,
                distance_miles: 275.0,
                directed: false,
            },
            ArcRow {
                from: 1,
                to: 2,
                travel_steps: 1,
                distance_miles: 150.0,
                directed: false,
            },
        ],
    })
    .unwrap()
}

fn grid() -> TimeGrid {
    TimeGrid {
        step_hours: 6.0,
        num_steps: 20,
        num_cycles: 5,
        cycle_steps: 4,
    }
}

#[test]
fn commodities_cover_every_ordered_pair_per_day() {
    let ks = generate_commodities(&net(), &grid(), &DemandSpec::default());
    assert_eq!(ks.len(), 4 * 6);
    for (i, k) in ks.iter().enumerate() {
        assert_eq!(k.id, i);
        assert_ne!(k.origin, k.destination);
        assert_eq!(k.entry_step % 4, 0);
        assert_eq!(k.window_steps(), 8);
        k.validate(3, &grid()).unwrap();
    }
}

#[test]
fn windows_are_capped_at_the_horizon() {
    let g = TimeGrid { num_steps: 10, ..grid() };
    let ks = generate_commodities(&net(), &g, &DemandSpec::default());
    assert!(ks.iter().all(|k| k.due_step <= 10));
    assert!(ks.iter().any(|k| k.due_step == 10 && k.window_steps() < 8));
}

#[test]
fn scenarios_are_reproducible_from_the_seed() {
    let pnet = net();
    let ks = generate_commodities(&pnet, &grid(), &DemandSpec::default());
    let spec = DemandSpec::default();
    let a = generate_scenarios(&spec, &ks, pnet.hubs(), 6, 42).unwrap();
    let b = generate_scenarios(&spec, &ks, pnet.hubs(), 6, 42).unwrap();
    let c = generate_scenarios(&spec, &ks, pnet.hubs(), 6, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    a.validate(ks.len()).unwrap();
    for w in &a.scenarios {
        assert!(w.volumes.iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
    }
}

#[test]
fn zero_dispersion_gives_rounded_means_with_east_bias() {
    let pnet = net();
    let ks = generate_commodities(&pnet, &grid(), &DemandSpec::default());
    let spec = DemandSpec {
        dispersion: 0.0,
        east_share: 0.75,
        mean_volume: 4.0,
        ..DemandSpec::default()
    };
    let set = generate_scenarios(&spec, &ks, pnet.hubs(), 3, 1).unwrap();
    for w in &set.scenarios {
        for (k, v) in ks.iter().zip(&w.volumes) {
            let expect = if k.destination > k.origin { 6.0 } else { 2.0 };
            assert_eq!(*v, expect);
        }
    }
}

#[test]
fn sample_mean_tracks_the_requested_mean() {
    let pnet = net();
    let ks = generate_commodities(&pnet, &grid(), &DemandSpec::default());
    let set = generate_scenarios(&DemandSpec::default(), &ks, pnet.hubs(), 400, 7).unwrap();
    let mean = mean_scenario(&set);
    let avg = mean.volumes.iter().sum::<f64>() / mean.volumes.len() as f64;
    assert!((avg - 4.0).abs() < 0.3, "{avg}");
}

#[test]
fn zero_scenarios_are_refused() {
    let pnet = net();
    let ks = generate_commodities(&pnet, &grid(), &DemandSpec::default());
    assert!(generate_scenarios(&DemandSpec::default(), &ks, pnet.hubs(), 0, 1).is_err());
}

#[test]
fn mean_scenario_weights_by_probability() {
    let set = ScenarioSet {
        scenarios: vec![
            Scenario {
                id: 0,
                probability: 0.25,
                volumes: vec![8.0, 0.0],
            },
            Scenario {
                id: 1,
                probability: 0.75,
                volumes: vec![4.0, 2.0],
            },
        ],
        seed: 0,
    };
    let m = mean_scenario(&set);
    assert_eq!(m.volumes, vec![5.0, 1.5]);
    assert_eq!(m.probability, 1.0);
}

#[test]
fn probabilities_must_sum_to_one() {
    let set = ScenarioSet {
        scenarios: vec![Scenario {
            id: 0,
            probability: 0.5,
            volumes: vec![1.0],
        }],
        seed: 0,
    };
    assert!(set.validate(1).is_err());
}

#[test]
fn outsourcing_uses_the_shortest_road_distance() {
    let pnet = net();
    let k = Commodity::new(0, 0, 2, 0, 4);
    let w = Scenario {
        id: 0,
        probability: 1.0,
        volumes: vec![5.0],
    };
    let cost = outsourcing_cost(&k, &w, 0.93, &pnet).unwrap();
    assert!((cost - 0.93 * 425.0 * 5.0).abs() < 1e-9);
}

#[test]
fn csv_documents_round_trip() {
    let pnet = net();
    let ks = generate_commodities(&pnet, &grid(), &DemandSpec::default());
    let mut buf = Vec::new();
    write_commodities(&mut buf, &ks).unwrap();
    let back = read_commodities(buf.as_slice()).unwrap();
    assert_eq!(back.len(), ks.len());
    for (a, b) in ks.iter().zip(&back) {
        assert_eq!(
            (a.id, a.origin, a.destination, a.entry_step, a.due_step),
            (b.id, b.origin, b.destination, b.entry_step, b.due_step)
        );
    }
    let set = generate_scenarios(&DemandSpec::default(), &ks, pnet.hubs(), 3, 9).unwrap();
    let mut buf = Vec::new();
    write_scenarios(&mut buf, &set).unwrap();
    let back = read_scenarios(buf.as_slice(), ks.len()).unwrap();
    assert_eq!(back.scenarios, set.scenarios);
}

#[test]
fn scenario_documents_reject_unknown_commodities_and_split_probabilities() {
    let head = "scenario_id,probability,commodity_id,volume\n";
    let unknown = format!("{head}0,1.0,0,3\n0,1.0,5,4\n");
    assert!(read_scenarios(unknown.as_bytes(), 2).is_err());
    let split = format!("{head}0,1.0,0,3\n0,0.5,1,4\n");
    assert!(read_scenarios(split.as_bytes(), 2).is_err());
    let ok = format!("{head}0,0.5,1,4\n1,0.5,0,2\n");
    let set = read_scenarios(ok.as_bytes(), 2).unwrap();
    assert_eq!(set.scenarios[0].volumes, vec![0.0, 4.0]);
    assert_eq!(set.scenarios[1].volumes, vec![2.0, 0.0]);
}

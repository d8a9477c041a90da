use relaynet::network::{build_time_space_network, load_physical_network, ArcKind, ArcRow, Hub, NetworkDoc, TimeGrid, TsNode};
use relaynet::Error;

fn doc(arcs: Vec<ArcRow>, n: usize) -> NetworkDoc {
    NetworkDoc {
        hubs: (0..n)
            .map(|id| Hub {
                id,
                name: format!("H{id}"),
                lon: Some(id as f64),
                lat: None,
            })
            .collect(),
        arcs,
    }
}

fn arc(from: usize, to: usize, steps: i64, miles: f64) -> ArcRow {
    ArcRow {
        from,
        to,
        travel_steps: steps,
        distance_miles: miles,
        directed: false,
    }
}

fn grid(num_steps: usize) -> TimeGrid {
    TimeGrid {
        step_hours: 6.0,
        num_steps,
        num_cycles: 1,
        cycle_steps: num_steps,
    }
}

#[test]
fn undirected_rows_expand_to_both_directions() {
    let pnet = load_physical_network(&doc(vec![arc(0, 1, 1, 200.0), arc(1, 2, 2, 300.0)], 3)).unwrap();
    assert_eq!(pnet.arcs().len(), 4);
    assert_eq!(pnet.arc_between(2, 1).unwrap().travel_steps, 2);
    assert!(pnet.arc_between(0, 2).is_none());
    assert_eq!(pnet.hub_by_name("H2"), Some(2));
}

#[test]
fn directed_rows_stay_one_way() {
    let mut row = arc(0, 1, 1, 100.0);
    row.directed = true;
    let pnet = load_physical_network(&doc(vec![row], 2)).unwrap();
    assert_eq!(pnet.arcs().len(), 1);
    assert!(matches!(pnet.shortest_distance_miles(1, 0), Err(Error::Unreachable { from: 1, to: 0 })));
}

#[test]
fn invalid_rows_are_reported_with_their_index() {
    let cases = [
        vec![arc(0, 0, 1, 10.0)],
        vec![arc(0, 1, 0, 10.0)],
        vec![arc(0, 1, 1, -3.0)],
        vec![arc(0, 5, 1, 10.0)],
        vec![arc(0, 1, 1, 10.0), arc(1, 0, 1, 10.0)],
    ];
    for (i, arcs) in cases.into_iter().enumerate() {
        let err = load_physical_network(&doc(arcs, 2)).unwrap_err();
        assert!(matches!(err, Error::InvalidRow { what: "arc", .. }), "case {i}: {err}");
    }
}

#[test]
fn duplicate_hub_ids_are_rejected() {
    let mut d = doc(vec![], 2);
    d.hubs[1].id = 0;
    assert!(load_physical_network(&d).is_err());
}

#[test]
fn shortest_distance_prefers_the_cheaper_detour() {
    let pnet = load_physical_network(&doc(
        vec![arc(0, 1, 1, 100.0), arc(1, 2, 1, 100.0), arc(0, 2, 1, 250.0)],
        3,
    ))
    .unwrap();
    assert_eq!(pnet.shortest_distance_miles(0, 2).unwrap(), 200.0);
    assert_eq!(pnet.distances_from(2), vec![Some(200.0), Some(100.0), Some(0.0)]);
}

#[test]
fn toml_document_round_trips() {
    let d = doc(vec![arc(0, 1, 2, 123.5)], 2);
    let text = d.to_toml_string().unwrap();
    assert_eq!(NetworkDoc::from_toml_str(&text).unwrap(), d);
}

#[test]
fn time_space_expansion_counts() {
    let pnet = load_physical_network(&doc(vec![arc(0, 1, 1, 200.0), arc(1, 2, 2, 300.0)], 3)).unwrap();
    let t = 4;
    let tsn = build_time_space_network(&pnet, grid(t)).unwrap();
    assert_eq!(tsn.num_nodes(), 3 * (t + 1));
    assert_eq!(tsn.holding_arcs().count(), 3 * t);
    // 1-step arcs start at 0..=3, 2-step arcs at 0..=2, each in two directions.
    assert_eq!(tsn.moving_arcs().count(), 2 * 4 + 2 * 3);
    for a in tsn.arcs() {
        assert!(a.head.t <= t);
        match a.kind {
            ArcKind::Holding => assert_eq!((a.head.hub, a.head.t), (a.tail.hub, a.tail.t + 1)),
            ArcKind::Moving => {
                let p = pnet.arc_between(a.tail.hub, a.head.hub).unwrap();
                assert_eq!(a.head.t - a.tail.t, p.travel_steps);
            }
        }
    }
    let id = tsn.moving_arc(1, 2, 2).unwrap();
    assert_eq!(tsn.arc(id).head, TsNode { hub: 2, t: 4 });
    assert!(tsn.moving_arc(1, 3, 2).is_none());
}

#[test]
fn arc_ids_are_dense_and_adjacency_is_consistent() {
    let pnet = load_physical_network(&doc(vec![arc(0, 1, 1, 200.0)], 2)).unwrap();
    let tsn = build_time_space_network(&pnet, grid(3)).unwrap();
    for (i, a) in tsn.arcs().iter().enumerate() {
        assert_eq!(a.id, i);
        assert!(tsn.out_arcs(a.tail).contains(&i));
        assert!(tsn.in_arcs(a.head).contains(&i));
        assert_eq!(tsn.physical_arc(i).is_some(), a.kind == ArcKind::Moving);
    }
    for id in 0..tsn.num_nodes() {
        assert_eq!(tsn.node_id(tsn.node(id)), id);
    }
}

#[test]
fn bad_grids_are_rejected() {
    let pnet = load_physical_network(&doc(vec![arc(0, 1, 1, 200.0)], 2)).unwrap();
    for g in [
        TimeGrid { step_hours: 0.0, ..grid(3) },
        TimeGrid { num_steps: 0, ..grid(3) },
        TimeGrid { num_cycles: 0, ..grid(3) },
    ] {
        assert!(build_time_space_network(&pnet, g).is_err());
    }
}

use std::collections::BTreeMap;

use relaynet::milp::CostParams;
use relaynet::network::{ArcKind, build_time_space_network, load_physical_network, ArcRow, Hub, NetworkDoc, TimeGrid};
use relaynet::services::{apply_overrides, enumerate_services, read_overrides, Consistency, DrivingBasis, HosPolicy};

fn line(miles: &[f64]) -> relaynet::network::PhysicalNetwork {
    load_physical_network(&NetworkDoc {
        hubs: (0..=miles.len())
            .map(|id| Hub {
                id,
                name: format!("H{id}"),
                lon: None,
                lat: None,
            })
            .collect(),
        arcs: miles
            .iter()
            .enumerate()
            .map(|(i, &m)| ArcRow {
                from: i,
                to: i + 1,
                travel_steps: 1,
                distance_miles: m,
                directed: false,
            })
            .collect(),
    })
    .unwrap()
}

fn grid(num_steps: usize, num_cycles: usize, cycle_steps: usize) -> TimeGrid {
    TimeGrid {
        step_hours: 6.0,
        num_steps,
        num_cycles,
        cycle_steps,
    }
}

#[test]
fn every_service_respects_hours_of_service() {
    let pnet = line(&[275.0, 150.0, 200.0]);
    let tsn = build_time_space_network(&pnet, grid(8, 2, 4)).unwrap();
    let hos = HosPolicy::default();
    let costs = CostParams::default();
    let cat = enumerate_services(&tsn, &pnet, &hos, &costs, Consistency::Weekly);
    assert!(!cat.is_empty());
    for s in cat.services() {
        let out = tsn.arc(s.legs[0]);
        let back = tsn.arc(s.legs[1]);
        assert_eq!(out.tail.hub, s.home_hub);
        assert_eq!(out.head.hub, s.away_hub);
        assert_eq!(back.head.hub, s.home_hub);
        assert!(back.tail.t >= out.head.t);
        let on_duty = (back.head.t - out.tail.t) as f64 * 6.0;
        assert_eq!(s.on_duty_hours, on_duty);
        assert!(on_duty <= 14.0);
        let miles = 2.0 * pnet.arc_between(s.home_hub, s.away_hub).unwrap().distance_miles;
        assert!((s.driving_hours - miles / 50.0).abs() < 1e-12);
        assert!(s.driving_hours <= 11.0);
        assert_eq!(s.contract_fee, 29.0 * on_duty);
    }
}

#[test]
fn round_trip_count_on_a_two_step_horizon() {
    // Each of the 4 directed arcs of a 3-hub line supports one 12-hour service
    // starting at step 0; 275 x 2 / 50 = 11 hours of driving is still legal.
    let pnet = line(&[275.0, 275.0]);
    let tsn = build_time_space_network(&pnet, grid(2, 1, 3)).unwrap();
    let cat = enumerate_services(&tsn, &pnet, &HosPolicy::default(), &CostParams::default(), Consistency::Weekly);
    assert_eq!(cat.len(), 4);
    assert!(cat.services().iter().all(|s| s.on_duty_hours == 12.0 && s.contract_fee == 348.0));
}

#[test]
fn long_arcs_break_the_driving_limit() {
    let pnet = line(&[300.0]);
    let g = TimeGrid {
        step_hours: 5.0,
        ..grid(2, 1, 3)
    };
    let tsn = build_time_space_network(&pnet, g).unwrap();
    let cat = enumerate_services(&tsn, &pnet, &HosPolicy::default(), &CostParams::default(), Consistency::Weekly);
    assert!(cat.is_empty());
    let lenient = HosPolicy {
        driving_basis: DrivingBasis::Schedule,
        ..HosPolicy::default()
    };
    let cat = enumerate_services(&tsn, &pnet, &lenient, &CostParams::default(), Consistency::Weekly);
    assert_eq!(cat.len(), 2);
}

#[test]
fn covering_lists_match_service_legs() {
    let pnet = line(&[200.0, 200.0]);
    let tsn = build_time_space_network(&pnet, grid(6, 1, 4)).unwrap();
    let cat = enumerate_services(&tsn, &pnet, &HosPolicy::default(), &CostParams::default(), Consistency::Weekly);
    let mut expected: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in cat.services() {
        for &a in &s.legs {
            expected.entry(a).or_default().push(s.id);
        }
    }
    for a in tsn.arcs() {
        let got = match a.kind {
            ArcKind::Moving => {
                let mut v = cat.services_on_arc(a.id).unwrap().to_vec();
                v.sort_unstable();
                v
            }
            ArcKind::Holding => {
                assert!(cat.services_on_arc(a.id).is_err());
                Vec::new()
            }
        };
        assert_eq!(got, expected.get(&a.id).cloned().unwrap_or_default(), "arc {}", a.id);
    }
}

#[test]
fn daily_templates_repeat_across_cycles_with_a_discount() {
    let pnet = line(&[200.0]);
    let g = grid(12, 2, 4);
    let tsn = build_time_space_network(&pnet, g).unwrap();
    let costs = CostParams::default();
    let daily = enumerate_services(&tsn, &pnet, &HosPolicy::default(), &costs, Consistency::Daily);
    let weekly = enumerate_services(&tsn, &pnet, &HosPolicy::default(), &costs, Consistency::Weekly);
    assert_eq!(daily.len(), weekly.len());
    for (key, members) in daily.templates() {
        assert_eq!(members.len(), 2, "{key:?}");
        let cycles: Vec<usize> = members.iter().map(|&s| daily.service(s).cycle).collect();
        assert_eq!(cycles, vec![0, 1]);
        for &s in members {
            let svc = daily.service(s);
            assert_eq!(svc.start_in_cycle, key.start_in_cycle);
            assert!((svc.contract_fee - 29.0 * 0.8 * svc.on_duty_hours).abs() < 1e-9);
            let partners = daily.consistency_partners(s).unwrap();
            assert!(partners.iter().all(|p| members.contains(p)));
        }
    }
}

#[test]
fn overrides_change_capacity_and_remove_services() {
    let pnet = line(&[200.0]);
    let tsn = build_time_space_network(&pnet, grid(4, 1, 4)).unwrap();
    let base = enumerate_services(&tsn, &pnet, &HosPolicy::default(), &CostParams::default(), Consistency::Weekly);
    let text = "route,start_in_cycle,cycle,capacity,contract_fee\n0-1-0,0,0,0,\n1-0-1,1,0,3,99.5\n";
    let rows = read_overrides(text.as_bytes()).unwrap();
    let cat = apply_overrides(&base, &tsn, &rows).unwrap();
    assert!(cat.len() < base.len());
    assert!(!cat
        .services()
        .iter()
        .any(|s| s.route_label() == "0-1-0" && s.start_in_cycle == 0));
    let changed: Vec<_> = cat
        .services()
        .iter()
        .filter(|s| s.route_label() == "1-0-1" && s.start_in_cycle == 1)
        .collect();
    assert!(!changed.is_empty());
    assert!(changed.iter().all(|s| s.capacity == 3 && s.contract_fee == 99.5));
    for (i, s) in cat.services().iter().enumerate() {
        assert_eq!(s.id, i);
    }
}

#[test]
fn overrides_for_unknown_routes_fail() {
    let pnet = line(&[200.0]);
    let tsn = build_time_space_network(&pnet, grid(4, 1, 4)).unwrap();
    let base = enumerate_services(&tsn, &pnet, &HosPolicy::default(), &CostParams::default(), Consistency::Weekly);
    let rows = read_overrides("route,start_in_cycle,cycle,capacity,contract_fee\n0-7-0,0,0,1,\n".as_bytes()).unwrap();
    assert!(apply_overrides(&base, &tsn, &rows).is_err());
}

#[test]
fn consistency_parses_from_text() {
    assert_eq!("daily".parse::<Consistency>().unwrap(), Consistency::Daily);
    assert_eq!(Consistency::Weekly.to_string().parse::<Consistency>().unwrap(), Consistency::Weekly);
    assert!("monthly".parse::<Consistency>().is_err());
}

//! Feasibility and cost audit of a deterministic-equivalent solution, read
//! straight off the variable keys and the time-space network.

use std::collections::BTreeMap;

use relaynet::milp::{Instance, Pattern, VarKey, VarMap};
use relaynet::network::{ArcKind, TsNode};
use relaynet::services::Consistency;

#[derive(Debug, Clone, Default)]
pub struct Audit {
    /// Worst violation of the capacity, assignment and sizing rows.
    pub pattern_residual: f64,
    /// Worst node imbalance of any commodity flow.
    pub flow_residual: f64,
    /// Worst distance of an integer column from an integer.
    pub integrality_residual: f64,
    /// Services with X > 0 that break the on-duty or driving limit.
    pub hos_breaches: Vec<usize>,
    /// Daily template groups whose members carry different X.
    pub inconsistent_groups: usize,
    /// Flow placed on an arc outside the commodity's window.
    pub out_of_window_flow: f64,
    /// Objective recomputed from unit prices.
    pub cost: f64,
}

impl Audit {
    pub fn passes(&self, pattern_tol: f64, flow_tol: f64) -> bool {
        self.pattern_residual <= pattern_tol
            && self.flow_residual <= flow_tol
            && self.integrality_residual <= 1e-6
            && self.hos_breaches.is_empty()
            && self.inconsistent_groups == 0
            && self.out_of_window_flow <= flow_tol
    }
}

#[derive(Default)]
struct Columns {
    x: BTreeMap<usize, f64>,
    y: BTreeMap<(usize, usize, u32), f64>,
    yh: BTreeMap<(usize, usize, u32), f64>,
    z: BTreeMap<(usize, usize), f64>,
    f: BTreeMap<(usize, usize, usize), f64>,
}

fn columns(map: &VarMap, values: &[f64]) -> Columns {
    let mut c = Columns::default();
    for (j, key) in map.iter() {
        let v = values[j];
        match *key {
            VarKey::X { s } => {
                c.x.insert(s, v);
            }
            VarKey::Y { s, u, w } => {
                c.y.insert((w, s, u), v);
            }
            VarKey::Yh { k, u, w } => {
                c.yh.insert((w, k, u), v);
            }
            VarKey::Z { k, w } => {
                c.z.insert((w, k), v);
            }
            VarKey::F { k, a, w } => {
                c.f.insert((w, k, a), v);
            }
        }
    }
    c
}

fn get<K: Ord>(m: &BTreeMap<K, f64>, k: &K) -> f64 {
    m.get(k).copied().unwrap_or(0.0)
}

fn shortfall(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).max(0.0)
}

/// Audits `values` of the model built for `inst` (columns named by `map`).
pub fn audit(inst: &Instance, map: &VarMap, values: &[f64]) -> Audit {
    let cols = columns(map, values);
    let tsn = &inst.tsn;
    let grid = *tsn.grid();
    let services = inst.catalog.services();
    let costs = &inst.costs;
    let mut out = Audit::default();

    let integral = cols
        .x
        .values()
        .chain(cols.y.values())
        .chain(cols.yh.values())
        .chain(cols.z.values())
        .copied()
        .chain(if inst.pattern == Pattern::FluMcp {
            Vec::new()
        } else {
            cols.f.values().copied().collect()
        });
    for v in integral {
        out.integrality_residual = out.integrality_residual.max((v - v.round()).abs());
    }

    let mut covering: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in services {
        for &a in &s.legs {
            covering.entry(a).or_default().push(s.id);
        }
    }

    let fee = |on_duty: f64| {
        let rate = match inst.consistency {
            Consistency::Weekly => costs.driver_hourly,
            Consistency::Daily => costs.driver_hourly * costs.consistency_discount,
        };
        let tractor = if inst.pattern == Pattern::Hs {
            costs.tractor_hourly
        } else {
            0.0
        };
        (rate + tractor) * on_duty
    };
    for s in services {
        let x = get(&cols.x, &s.id);
        out.pattern_residual = out
            .pattern_residual
            .max(shortfall(x, s.capacity as f64))
            .max(shortfall(0.0, x));
        let first = tsn.arc(s.legs[0]);
        let last = tsn.arc(*s.legs.last().unwrap());
        let on_duty = (last.head.t - first.tail.t) as f64 * grid.step_hours;
        out.cost += x * fee(on_duty);
        if x > 0.5 {
            let miles: f64 = s
                .legs
                .iter()
                .map(|&a| {
                    let arc = tsn.arc(a);
                    inst.pnet
                        .arc_between(arc.tail.hub, arc.head.hub)
                        .expect("service leg follows a road")
                        .distance_miles
                })
                .sum();
            let connected = s
                .legs
                .windows(2)
                .all(|p| tsn.arc(p[0]).head.hub == tsn.arc(p[1]).tail.hub && tsn.arc(p[0]).head.t <= tsn.arc(p[1]).tail.t);
            let round_trip = first.tail.hub == last.head.hub;
            if on_duty > 14.0 + 1e-9 || miles / 50.0 > 11.0 + 1e-9 || !connected || !round_trip {
                out.hos_breaches.push(s.id);
            }
        }
    }

    if inst.consistency == Consistency::Daily {
        let mut groups: BTreeMap<(usize, usize, usize, usize), Vec<f64>> = BTreeMap::new();
        for s in services {
            let first = tsn.arc(s.legs[0]);
            let last = tsn.arc(*s.legs.last().unwrap());
            let key = (
                first.tail.hub,
                first.head.hub,
                first.tail.t % grid.cycle_steps,
                last.tail.t - first.tail.t,
            );
            groups.entry(key).or_default().push(get(&cols.x, &s.id));
        }
        out.inconsistent_groups = groups
            .values()
            .filter(|xs| xs.iter().any(|&x| (x - xs[0]).abs() > 1e-6))
            .count();
    }

    for w in &inst.scenarios.scenarios {
        let wid = w.id;
        let mut recourse = 0.0;
        for s in services {
            let x = get(&cols.x, &s.id);
            let on_duty = s.on_duty_hours;
            let mut trucks = 0.0;
            for &u in &inst.haulers {
                let y = get(&cols.y, &(wid, s.id, u));
                trucks += y;
                recourse += y * (costs.tractor_hourly + costs.hauler_rate(u).unwrap()) * on_duty;
            }
            if inst.pattern.is_flu() {
                out.pattern_residual = out.pattern_residual.max(shortfall(trucks, x));
            }
        }

        for arc in tsn.arcs().iter().filter(|a| a.kind == ArcKind::Moving) {
            let load: f64 = (0..inst.commodities.len())
                .map(|k| {
                    let f = get(&cols.f, &(wid, k, arc.id));
                    match inst.pattern {
                        Pattern::FluScp => w.volumes[k] * f,
                        _ => f,
                    }
                })
                .sum();
            let cover = covering.get(&arc.id).map_or(&[][..], |v| v.as_slice());
            let room: f64 = match inst.pattern {
                Pattern::Hs => cover.iter().map(|s| get(&cols.x, s)).sum(),
                _ => cover
                    .iter()
                    .flat_map(|&s| inst.haulers.iter().map(move |&u| (s, u)))
                    .map(|(s, u)| u as f64 * get(&cols.y, &(wid, s, u)))
                    .sum(),
            };
            out.pattern_residual = out.pattern_residual.max(shortfall(load, room));
        }

        for (k, c) in inst.commodities.iter().enumerate() {
            let v = w.volumes[k];
            let z = get(&cols.z, &(wid, k));
            let miles = inst
                .pnet
                .shortest_distance_miles(c.origin, c.destination)
                .unwrap_or(0.0);
            let outsource = match costs.outsourcing {
                relaynet::milp::OutsourcingMode::PerVehicle => costs.outsource_per_vehicle_mile * miles * v,
                relaynet::milp::OutsourcingMode::Fixed => costs.outsource_per_vehicle_mile * miles,
            };
            recourse += z * outsource;
            if v <= 0.0 {
                continue;
            }
            out.pattern_residual = out.pattern_residual.max(shortfall(z, 1.0)).max(shortfall(0.0, z));

            let haulers: f64 = inst.haulers.iter().map(|&u| get(&cols.yh, &(wid, k, u))).sum();
            let window_hours = (c.due_step - c.entry_step) as f64 * grid.step_hours;
            for &u in &inst.haulers {
                recourse += get(&cols.yh, &(wid, k, u)) * costs.hauler_rate(u).unwrap() * window_hours;
            }
            let shipped = match inst.pattern {
                Pattern::FluMcp => v * (1.0 - z),
                Pattern::FluScp => 1.0 - z,
                Pattern::Hs => {
                    let size: f64 = inst
                        .haulers
                        .iter()
                        .map(|&u| u as f64 * get(&cols.yh, &(wid, k, u)))
                        .sum();
                    out.pattern_residual = out.pattern_residual.max(shortfall(v, size + v * z));
                    haulers
                }
            };

            let mut balance: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for arc in tsn.arcs() {
                let f = get(&cols.f, &(wid, k, arc.id));
                if f == 0.0 {
                    continue;
                }
                out.pattern_residual = out.pattern_residual.max(shortfall(0.0, f));
                if arc.tail.t < c.entry_step || arc.head.t > c.due_step {
                    out.out_of_window_flow = out.out_of_window_flow.max(f.abs());
                }
                *balance.entry((arc.head.hub, arc.head.t)).or_default() += f;
                *balance.entry((arc.tail.hub, arc.tail.t)).or_default() -= f;
            }
            let source = TsNode {
                hub: c.origin,
                t: c.entry_step,
            };
            let sink = TsNode {
                hub: c.destination,
                t: c.due_step,
            };
            *balance.entry((source.hub, source.t)).or_default() += shipped;
            *balance.entry((sink.hub, sink.t)).or_default() -= shipped;
            for r in balance.values() {
                out.flow_residual = out.flow_residual.max(r.abs());
            }
        }
        out.cost += w.probability * recourse;
    }
    out
}

//! Deterministic-equivalent and second-stage MILP builders.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::model::{MilpModel, Sense, VarId, VarKind};
use super::{Instance, Pattern};
use crate::demand::{CommodityId, Scenario};
use crate::error::{Error, Result};
use crate::network::{ArcId, ArcKind, NodeId, TsNode};
use crate::services::{Consistency, ServiceId};

/// Semantic identity of a model column. Scenario fields hold scenario ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarKey {
    /// Truckers contracted on a service.
    X { s: ServiceId },
    /// Trucks of size `u` assigned to a service (FLU).
    Y { s: ServiceId, u: u32, w: usize },
    /// Haulers of size `u` used by a commodity (HS).
    Yh { k: CommodityId, u: u32, w: usize },
    /// Outsourcing flag.
    Z { k: CommodityId, w: usize },
    /// Flow of a commodity on an arc.
    F { k: CommodityId, a: ArcId, w: usize },
}

impl VarKey {
    pub fn scenario(&self) -> Option<usize> {
        match *self {
            VarKey::X { .. } => None,
            VarKey::Y { w, .. } | VarKey::Yh { w, .. } | VarKey::Z { w, .. } | VarKey::F { w, .. } => Some(w),
        }
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarKey::X { s } => write!(f, "X_s{s}"),
            VarKey::Y { s, u, w } => write!(f, "Y_s{s}_u{u}_w{w}"),
            VarKey::Yh { k, u, w } => write!(f, "Yh_k{k}_u{u}_w{w}"),
            VarKey::Z { k, w } => write!(f, "Z_k{k}_w{w}"),
            VarKey::F { k, a, w } => write!(f, "F_k{k}_a{a}_w{w}"),
        }
    }
}

/// Two-way lookup between model columns and their semantic keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarMap {
    keys: Vec<VarKey>,
    index: BTreeMap<VarKey, VarId>,
}

impl VarMap {
    fn push(&mut self, key: VarKey, id: VarId) {
        debug_assert_eq!(id, self.keys.len());
        self.keys.push(key);
        self.index.insert(key, id);
    }

    pub fn get(&self, key: &VarKey) -> Option<VarId> {
        self.index.get(key).copied()
    }

    pub fn key(&self, id: VarId) -> VarKey {
        self.keys[id]
    }

    pub fn x(&self, s: ServiceId) -> Option<VarId> {
        self.get(&VarKey::X { s })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, &VarKey)> {
        self.keys.iter().enumerate()
    }

    /// Value of `key` in `values`, 0 when the column was pruned.
    pub fn value(&self, key: &VarKey, values: &[f64]) -> f64 {
        self.get(key).map_or(0.0, |j| values[j])
    }
}

/// First-stage decision: truckers contracted per service id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub x: Vec<u32>,
}

impl DesignSolution {
    pub fn zeros(num_services: usize) -> Self {
        Self {
            x: vec![0; num_services],
        }
    }

    /// Reads the X columns of a solved model, rounding to integers.
    pub fn from_values(map: &VarMap, values: &[f64], num_services: usize) -> Self {
        Self {
            x: (0..num_services)
                .map(|s| map.x(s).map_or(0, |j| values[j].round().max(0.0) as u32))
                .collect(),
        }
    }

    pub fn validate(&self, inst: &Instance) -> Result<()> {
        if self.x.len() != inst.catalog.len() {
            return Err(Error::Validation(format!(
                "design has {} entries for {} services",
                self.x.len(),
                inst.catalog.len()
            )));
        }
        for (s, svc) in inst.catalog.services().iter().enumerate() {
            if self.x[s] > svc.capacity {
                return Err(Error::Validation(format!(
                    "design contracts {} truckers on service {s}, capacity is {}",
                    self.x[s], svc.capacity
                )));
            }
        }
        if inst.consistency == Consistency::Daily {
            for (_, group) in inst.catalog.templates() {
                if group.windows(2).any(|p| self.x[p[0]] != self.x[p[1]]) {
                    return Err(Error::Validation(format!(
                        "design is not constant over template group {group:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn first_stage_cost(&self, inst: &Instance) -> f64 {
        inst.catalog
            .services()
            .iter()
            .zip(&self.x)
            .map(|(s, &x)| inst.first_stage_cost(s) * x as f64)
            .sum()
    }
}

/// Arcs commodity `k` may use: inside its delivery window, moving arcs only
/// when some service covers them, and lying on some origin-to-destination
/// path.
pub fn commodity_arcs(inst: &Instance, k: CommodityId) -> Vec<ArcId> {
    let tsn = &inst.tsn;
    let c = &inst.commodities[k];
    let usable: Vec<bool> = tsn
        .arcs()
        .iter()
        .map(|a| {
            a.tail.t >= c.entry_step
                && a.head.t <= c.due_step
                && (a.kind == ArcKind::Holding || !inst.catalog.covering(a.id).is_empty())
        })
        .collect();
    let source = TsNode {
        hub: c.origin,
        t: c.entry_step,
    };
    let sink = TsNode {
        hub: c.destination,
        t: c.due_step,
    };
    let forward = reach(tsn.num_nodes(), tsn.node_id(source), |n| {
        tsn.out_arcs(tsn.node(n))
            .iter()
            .filter(|&&a| usable[a])
            .map(|&a| tsn.node_id(tsn.arc(a).head))
            .collect()
    });
    let backward = reach(tsn.num_nodes(), tsn.node_id(sink), |n| {
        tsn.in_arcs(tsn.node(n))
            .iter()
            .filter(|&&a| usable[a])
            .map(|&a| tsn.node_id(tsn.arc(a).tail))
            .collect()
    });
    tsn.arcs()
        .iter()
        .filter(|a| usable[a.id] && forward[tsn.node_id(a.tail)] && backward[tsn.node_id(a.head)])
        .map(|a| a.id)
        .collect()
}

fn reach(n: usize, start: NodeId, next: impl Fn(NodeId) -> Vec<NodeId>) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for m in next(v) {
            if !seen[m] {
                seen[m] = true;
                queue.push_back(m);
            }
        }
    }
    seen
}

enum FirstStage<'a> {
    Free,
    Fixed(&'a DesignSolution),
}

/// Deterministic equivalent over every scenario of `inst`, weighted by the
/// scenario probabilities.
pub fn formulate(inst: &Instance) -> Result<(MilpModel<f64>, VarMap)> {
    let weighted: Vec<(&Scenario, f64)> = inst
        .scenarios
        .scenarios
        .iter()
        .map(|w| (w, w.probability))
        .collect();
    build(inst, FirstStage::Free, &weighted, format!("relay_{}", inst.pattern))
}

/// Recourse problem of scenario `w` with the first stage fixed to `design`.
/// Its objective is the recourse cost alone.
pub fn formulate_second_stage(
    inst: &Instance,
    design: &DesignSolution,
    w: &Scenario,
) -> Result<(MilpModel<f64>, VarMap)> {
    design.validate(inst)?;
    if w.volumes.len() != inst.commodities.len() {
        return Err(Error::Validation(format!(
            "scenario {} has {} volumes for {} commodities",
            w.id,
            w.volumes.len(),
            inst.commodities.len()
        )));
    }
    build(
        inst,
        FirstStage::Fixed(design),
        &[(w, 1.0)],
        format!("relay_{}_w{}", inst.pattern, w.id),
    )
}

struct Builder {
    model: MilpModel<f64>,
    map: VarMap,
}

impl Builder {
    fn var(&mut self, key: VarKey, kind: VarKind, lower: f64, upper: f64, obj: f64) -> VarId {
        let id = self
            .model
            .add_var(key.to_string(), kind, Some(lower), Some(upper), obj);
        self.map.push(key, id);
        id
    }

    fn row(&mut self, name: String, coeffs: Vec<(VarId, f64)>, sense: Sense, rhs: f64) {
        let coeffs: Vec<(VarId, f64)> = coeffs.into_iter().filter(|&(_, a)| a != 0.0).collect();
        if coeffs.is_empty() {
            let ok = match sense {
                Sense::Le => 0.0 <= rhs,
                Sense::Ge => 0.0 >= rhs,
                Sense::Eq => rhs == 0.0,
            };
            if ok {
                return;
            }
        }
        self.model.add_constraint(name, coeffs, sense, rhs);
    }
}

fn build(
    inst: &Instance,
    first: FirstStage<'_>,
    scenarios: &[(&Scenario, f64)],
    name: String,
) -> Result<(MilpModel<f64>, VarMap)> {
    inst.validate()?;
    if scenarios.is_empty() {
        return Err(Error::Validation("no scenarios to formulate".into()));
    }
    let tsn = &inst.tsn;
    let services = inst.catalog.services();
    let haulers = &inst.haulers;
    let pattern = inst.pattern;
    let mut b = Builder {
        model: MilpModel::new(name),
        map: VarMap::default(),
    };

    let x: Vec<Option<VarId>> = match first {
        FirstStage::Free => services
            .iter()
            .map(|s| {
                Some(b.var(
                    VarKey::X { s: s.id },
                    VarKind::Integer,
                    0.0,
                    s.capacity as f64,
                    inst.first_stage_cost(s),
                ))
            })
            .collect(),
        FirstStage::Fixed(_) => vec![None; services.len()],
    };
    let fixed = |s: ServiceId| match first {
        FirstStage::Fixed(d) => d.x[s] as f64,
        FirstStage::Free => 0.0,
    };

    let arcs_of: Vec<Vec<ArcId>> = (0..inst.commodities.len())
        .map(|k| commodity_arcs(inst, k))
        .collect();

    for &(scen, p) in scenarios {
        let w = scen.id;
        let volume = |k: usize| scen.volumes[k];

        // Columns.
        let mut y: BTreeMap<(ServiceId, u32), VarId> = BTreeMap::new();
        let mut yh: BTreeMap<(CommodityId, u32), VarId> = BTreeMap::new();
        let mut z = Vec::with_capacity(inst.commodities.len());
        let mut f: Vec<BTreeMap<ArcId, VarId>> = vec![BTreeMap::new(); inst.commodities.len()];
        if pattern.is_flu() {
            for s in services {
                for &u in haulers {
                    let id = b.var(
                        VarKey::Y { s: s.id, u, w },
                        VarKind::Integer,
                        0.0,
                        s.capacity as f64,
                        p * inst.truck_rental_cost(s, u),
                    );
                    y.insert((s.id, u), id);
                }
            }
        }
        for k in 0..inst.commodities.len() {
            let v = volume(k);
            if pattern == Pattern::Hs && v > 0.0 {
                for &u in haulers {
                    let id = b.var(
                        VarKey::Yh { k, u, w },
                        VarKind::Integer,
                        0.0,
                        (v / u as f64).ceil(),
                        p * inst.hauler_rental_cost(k, u),
                    );
                    yh.insert((k, u), id);
                }
            }
            z.push(b.var(
                VarKey::Z { k, w },
                VarKind::Binary,
                0.0,
                1.0,
                p * inst.outsourcing_cost(k, scen),
            ));
            if v > 0.0 {
                let (kind, upper) = match pattern {
                    Pattern::FluMcp => (VarKind::Continuous, v),
                    Pattern::FluScp => (VarKind::Binary, 1.0),
                    Pattern::Hs => (
                        VarKind::Integer,
                        haulers.iter().map(|&u| (v / u as f64).ceil()).sum(),
                    ),
                };
                for &a in &arcs_of[k] {
                    let id = b.var(VarKey::F { k, a, w }, kind, 0.0, upper, 0.0);
                    f[k].insert(a, id);
                }
            }
        }

        // Trucker assignment (FLU).
        if pattern.is_flu() {
            for s in services {
                let mut coeffs: Vec<(VarId, f64)> = haulers.iter().map(|&u| (y[&(s.id, u)], 1.0)).collect();
                let mut rhs = fixed(s.id);
                if let Some(xs) = x[s.id] {
                    coeffs.push((xs, -1.0));
                    rhs = 0.0;
                }
                b.row(format!("eq3_s{}_w{w}", s.id), coeffs, Sense::Le, rhs);
            }
        }

        // Arc capacity.
        let mut on_arc: BTreeMap<ArcId, Vec<(CommodityId, VarId)>> = BTreeMap::new();
        for (k, cols) in f.iter().enumerate() {
            for (&a, &id) in cols {
                if tsn.arc(a).kind == ArcKind::Moving {
                    on_arc.entry(a).or_default().push((k, id));
                }
            }
        }
        for (&a, flows) in &on_arc {
            let covering = inst.catalog.covering(a);
            match pattern {
                Pattern::FluMcp | Pattern::FluScp => {
                    let mut coeffs = Vec::new();
                    for &s in covering {
                        for &u in haulers {
                            coeffs.push((y[&(s, u)], u as f64));
                        }
                    }
                    for &(k, id) in flows {
                        let c = if pattern == Pattern::FluMcp { 1.0 } else { volume(k) };
                        coeffs.push((id, -c));
                    }
                    let tag = if pattern == Pattern::FluMcp { "eq4" } else { "eq4p" };
                    b.row(format!("{tag}_arc{a}_w{w}"), coeffs, Sense::Ge, 0.0);
                }
                Pattern::Hs => {
                    let mut coeffs: Vec<(VarId, f64)> = flows.iter().map(|&(_, id)| (id, 1.0)).collect();
                    let mut rhs = 0.0;
                    for &s in covering {
                        match x[s] {
                            Some(xs) => coeffs.push((xs, -1.0)),
                            None => rhs += fixed(s),
                        }
                    }
                    b.row(format!("eq3h_arc{a}_w{w}"), coeffs, Sense::Le, rhs);
                }
            }
        }

        // Hauler sizing (HS).
        if pattern == Pattern::Hs {
            for k in 0..inst.commodities.len() {
                let v = volume(k);
                if v <= 0.0 {
                    continue;
                }
                let mut coeffs: Vec<(VarId, f64)> = haulers.iter().map(|&u| (yh[&(k, u)], u as f64)).collect();
                coeffs.push((z[k], v));
                b.row(format!("eq4h_k{k}_w{w}"), coeffs, Sense::Ge, v);
            }
        }

        // Flow balance.
        for (k, c) in inst.commodities.iter().enumerate() {
            let v = volume(k);
            if v <= 0.0 {
                continue;
            }
            let origin = tsn.node_id(TsNode {
                hub: c.origin,
                t: c.entry_step,
            });
            let dest = tsn.node_id(TsNode {
                hub: c.destination,
                t: c.due_step,
            });
            let mut rows: BTreeMap<NodeId, Vec<(VarId, f64)>> = BTreeMap::new();
            rows.entry(origin).or_default();
            rows.entry(dest).or_default();
            for (&a, &id) in &f[k] {
                let arc = tsn.arc(a);
                rows.entry(tsn.node_id(arc.head)).or_default().push((id, 1.0));
                rows.entry(tsn.node_id(arc.tail)).or_default().push((id, -1.0));
            }
            let tag = match pattern {
                Pattern::FluMcp => "eq5",
                Pattern::FluScp => "eq5p",
                Pattern::Hs => "eq5h",
            };
            for (node, mut coeffs) in rows {
                let sign = if node == origin {
                    -1.0
                } else if node == dest {
                    1.0
                } else {
                    0.0
                };
                let mut rhs = 0.0;
                if sign != 0.0 {
                    match pattern {
                        Pattern::FluMcp => {
                            coeffs.push((z[k], sign * v));
                            rhs = sign * v;
                        }
                        Pattern::FluScp => {
                            coeffs.push((z[k], sign));
                            rhs = sign;
                        }
                        Pattern::Hs => {
                            for &u in haulers {
                                coeffs.push((yh[&(k, u)], -sign));
                            }
                        }
                    }
                }
                let n = tsn.node(node);
                b.row(
                    format!("{tag}_k{k}_n{}_t{}_w{w}", n.hub, n.t),
                    coeffs,
                    Sense::Eq,
                    rhs,
                );
            }
        }
    }

    // Strong schedule consistency.
    if matches!(first, FirstStage::Free) && inst.consistency == Consistency::Daily {
        for (_, group) in inst.catalog.templates() {
            for pair in group.windows(2) {
                let (a, c) = (pair[0], pair[1]);
                if let (Some(xa), Some(xc)) = (x[a], x[c]) {
                    b.row(format!("cons_s{a}_s{c}"), vec![(xa, 1.0), (xc, -1.0)], Sense::Eq, 0.0);
                }
            }
        }
    }

    Ok((b.model, b.map))
}

//! Physical hub network and its time-space expansion.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type HubId = usize;
pub type ArcId = usize;
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hub {
    pub id: HubId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
}

/// A directed physical arc. Travel time already includes the buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalArc {
    pub from: HubId,
    pub to: HubId,
    pub travel_steps: usize,
    pub distance_miles: f64,
}

/// One row of the `arcs` list in a network document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcRow {
    pub from: HubId,
    pub to: HubId,
    pub travel_steps: i64,
    pub distance_miles: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub directed: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Network document: a `hubs` list and an `arcs` list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkDoc {
    #[serde(default)]
    pub hubs: Vec<Hub>,
    #[serde(default)]
    pub arcs: Vec<ArcRow>,
}

impl NetworkDoc {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("network document: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("network document: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalNetwork {
    hubs: Vec<Hub>,
    arcs: Vec<PhysicalArc>,
    out_arcs: Vec<Vec<usize>>,
}

impl PhysicalNetwork {
    pub fn hubs(&self) -> &[Hub] {
        &self.hubs
    }

    pub fn arcs(&self) -> &[PhysicalArc] {
        &self.arcs
    }

    pub fn num_hubs(&self) -> usize {
        self.hubs.len()
    }

    /// Directed arcs leaving `hub`, as indices into [`arcs`](Self::arcs).
    pub fn out_arcs(&self, hub: HubId) -> &[usize] {
        &self.out_arcs[hub]
    }

    pub fn arc_between(&self, from: HubId, to: HubId) -> Option<&PhysicalArc> {
        self.out_arcs
            .get(from)?
            .iter()
            .map(|&i| &self.arcs[i])
            .find(|a| a.to == to)
    }

    pub fn hub_by_name(&self, name: &str) -> Option<HubId> {
        self.hubs.iter().find(|h| h.name == name).map(|h| h.id)
    }

    /// Length of a shortest `from -> to` path measured in miles.
    pub fn shortest_distance_miles(&self, from: HubId, to: HubId) -> Result<f64> {
        let n = self.num_hubs();
        if from >= n || to >= n {
            return Err(Error::Usage(format!("hub id out of range: {from} -> {to}")));
        }
        let dist = self.distances_from(from);
        dist[to].ok_or(Error::Unreachable { from, to })
    }

    /// Single-source shortest distances (Dijkstra); `None` marks unreachable hubs.
    pub fn distances_from(&self, source: HubId) -> Vec<Option<f64>> {
        #[derive(PartialEq)]
        struct Entry(f64, HubId);
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> Ordering {
                self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
            }
        }

        let mut dist: Vec<Option<f64>> = vec![None; self.num_hubs()];
        let mut heap = BinaryHeap::new();
        dist[source] = Some(0.0);
        heap.push(Reverse(Entry(0.0, source)));
        while let Some(Reverse(Entry(d, hub))) = heap.pop() {
            if dist[hub].is_some_and(|best| d > best) {
                continue;
            }
            for &ai in &self.out_arcs[hub] {
                let arc = &self.arcs[ai];
                let nd = d + arc.distance_miles;
                if dist[arc.to].is_none_or(|cur| nd < cur) {
                    dist[arc.to] = Some(nd);
                    heap.push(Reverse(Entry(nd, arc.to)));
                }
            }
        }
        dist
    }
}

/// Validates a network document and expands bidirectional rows into two
/// directed arcs.
pub fn load_physical_network(doc: &NetworkDoc) -> Result<PhysicalNetwork> {
    let n = doc.hubs.len();
    let mut hubs: Vec<Option<Hub>> = vec![None; n];
    for (row, hub) in doc.hubs.iter().enumerate() {
        if hub.id >= n {
            return Err(Error::InvalidRow {
                what: "hub",
                row,
                reason: format!("id {} outside 0..{n}", hub.id),
            });
        }
        if hubs[hub.id].is_some() {
            return Err(Error::InvalidRow {
                what: "hub",
                row,
                reason: format!("duplicate id {}", hub.id),
            });
        }
        hubs[hub.id] = Some(hub.clone());
    }
    let hubs: Vec<Hub> = hubs.into_iter().map(|h| h.expect("dense ids")).collect();

    let mut arcs = Vec::with_capacity(doc.arcs.len() * 2);
    let mut seen: BTreeMap<(HubId, HubId), usize> = BTreeMap::new();
    for (row, r) in doc.arcs.iter().enumerate() {
        let bad = |reason: String| Error::InvalidRow {
            what: "arc",
            row,
            reason,
        };
        if r.from >= n {
            return Err(bad(format!("unknown hub id {}", r.from)));
        }
        if r.to >= n {
            return Err(bad(format!("unknown hub id {}", r.to)));
        }
        if r.from == r.to {
            return Err(bad(format!("self-loop at hub {}", r.from)));
        }
        if r.travel_steps < 1 {
            return Err(bad(format!("travel_steps must be >= 1, got {}", r.travel_steps)));
        }
        if !(r.distance_miles.is_finite() && r.distance_miles > 0.0) {
            return Err(bad(format!("distance_miles must be > 0, got {}", r.distance_miles)));
        }
        let mut pairs = vec![(r.from, r.to)];
        if !r.directed {
            pairs.push((r.to, r.from));
        }
        for (from, to) in pairs {
            if let Some(prev) = seen.insert((from, to), row) {
                return Err(bad(format!(
                    "duplicate arc {from} -> {to} (first given in row {prev})"
                )));
            }
            arcs.push(PhysicalArc {
                from,
                to,
                travel_steps: r.travel_steps as usize,
                distance_miles: r.distance_miles,
            });
        }
    }

    let mut out_arcs = vec![Vec::new(); n];
    for (i, a) in arcs.iter().enumerate() {
        out_arcs[a.from].push(i);
    }
    Ok(PhysicalNetwork {
        hubs,
        arcs,
        out_arcs,
    })
}

/// Discretized planning horizon with instants `0..=num_steps`.
///
/// `num_cycles * cycle_steps` is the window in which services may start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub step_hours: f64,
    pub num_steps: usize,
    pub num_cycles: usize,
    pub cycle_steps: usize,
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_hours.is_finite() && self.step_hours > 0.0) {
            return Err(Error::Validation(format!(
                "step_hours must be positive, got {}",
                self.step_hours
            )));
        }
        if self.num_steps == 0 {
            return Err(Error::Validation("num_steps must be >= 1".into()));
        }
        if self.num_cycles == 0 || self.cycle_steps == 0 {
            return Err(Error::Validation(
                "num_cycles and cycle_steps must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Steps in which a service may start.
    pub fn start_window(&self) -> usize {
        self.num_cycles * self.cycle_steps
    }

    pub fn steps_per_day(&self) -> f64 {
        24.0 / self.step_hours
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TsNode {
    pub hub: HubId,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArcKind {
    Moving,
    Holding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TsArc {
    pub id: ArcId,
    pub kind: ArcKind,
    pub tail: TsNode,
    pub head: TsNode,
}

#[derive(Debug, Clone)]
pub struct TimeSpaceNetwork {
    grid: TimeGrid,
    num_hubs: usize,
    arcs: Vec<TsArc>,
    physical: Vec<Option<usize>>,
    out_arcs: Vec<Vec<ArcId>>,
    in_arcs: Vec<Vec<ArcId>>,
    moving_lookup: BTreeMap<(HubId, usize, HubId), ArcId>,
}

impl TimeSpaceNetwork {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn num_hubs(&self) -> usize {
        self.num_hubs
    }

    pub fn num_nodes(&self) -> usize {
        self.num_hubs * (self.grid.num_steps + 1)
    }

    pub fn node_id(&self, node: TsNode) -> NodeId {
        node.hub * (self.grid.num_steps + 1) + node.t
    }

    pub fn node(&self, id: NodeId) -> TsNode {
        let width = self.grid.num_steps + 1;
        TsNode {
            hub: id / width,
            t: id % width,
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = TsNode> + '_ {
        (0..self.num_nodes()).map(|i| self.node(i))
    }

    pub fn arcs(&self) -> &[TsArc] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> &TsArc {
        &self.arcs[id]
    }

    pub fn moving_arcs(&self) -> impl Iterator<Item = &TsArc> {
        self.arcs.iter().filter(|a| a.kind == ArcKind::Moving)
    }

    pub fn holding_arcs(&self) -> impl Iterator<Item = &TsArc> {
        self.arcs.iter().filter(|a| a.kind == ArcKind::Holding)
    }

    /// Index of the physical arc a moving arc replicates.
    pub fn physical_arc(&self, id: ArcId) -> Option<usize> {
        self.physical[id]
    }

    pub fn out_arcs(&self, node: TsNode) -> &[ArcId] {
        &self.out_arcs[self.node_id(node)]
    }

    pub fn in_arcs(&self, node: TsNode) -> &[ArcId] {
        &self.in_arcs[self.node_id(node)]
    }

    /// Moving arc departing `from` at `t` towards `to`, if it fits the horizon.
    pub fn moving_arc(&self, from: HubId, t: usize, to: HubId) -> Option<ArcId> {
        self.moving_lookup.get(&(from, t, to)).copied()
    }
}

/// Replicates every hub at each instant and connects the copies with moving
/// and holding arcs. Arc ids are sorted by (kind, tail hub, tail time, head hub).
pub fn build_time_space_network(pnet: &PhysicalNetwork, grid: TimeGrid) -> Result<TimeSpaceNetwork> {
    grid.validate()?;
    let horizon = grid.num_steps;
    let mut keyed: Vec<((ArcKind, HubId, usize, HubId), TsArc, Option<usize>)> = Vec::new();
    for (pi, pa) in pnet.arcs().iter().enumerate() {
        for t in 0..=horizon {
            let arrival = t + pa.travel_steps;
            if arrival > horizon {
                break;
            }
            let arc = TsArc {
                id: 0,
                kind: ArcKind::Moving,
                tail: TsNode { hub: pa.from, t },
                head: TsNode {
                    hub: pa.to,
                    t: arrival,
                },
            };
            keyed.push(((ArcKind::Moving, pa.from, t, pa.to), arc, Some(pi)));
        }
    }
    for hub in 0..pnet.num_hubs() {
        for t in 0..horizon {
            let arc = TsArc {
                id: 0,
                kind: ArcKind::Holding,
                tail: TsNode { hub, t },
                head: TsNode { hub, t: t + 1 },
            };
            keyed.push(((ArcKind::Holding, hub, t, hub), arc, None));
        }
    }
    keyed.sort_by_key(|(k, _, _)| *k);

    let num_hubs = pnet.num_hubs();
    let num_nodes = num_hubs * (horizon + 1);
    let mut tsn = TimeSpaceNetwork {
        grid,
        num_hubs,
        arcs: Vec::with_capacity(keyed.len()),
        physical: Vec::with_capacity(keyed.len()),
        out_arcs: vec![Vec::new(); num_nodes],
        in_arcs: vec![Vec::new(); num_nodes],
        moving_lookup: BTreeMap::new(),
    };
    for (id, (key, mut arc, phys)) in keyed.into_iter().enumerate() {
        arc.id = id;
        let tail = tsn.node_id(arc.tail);
        let head = tsn.node_id(arc.head);
        tsn.out_arcs[tail].push(id);
        tsn.in_arcs[head].push(id);
        if key.0 == ArcKind::Moving {
            tsn.moving_lookup.insert((key.1, key.2, key.3), id);
        }
        tsn.arcs.push(arc);
        tsn.physical.push(phys);
    }
    Ok(tsn)
}

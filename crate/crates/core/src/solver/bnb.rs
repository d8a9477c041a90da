//! Best-bound branch-and-bound over the simplex engine.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::lp::{check_size, LpProblem, LpStatus, Simplex};
use crate::error::Result;
use crate::milp::{MilpModel, Sense, VarKind};

const CUTS_PER_ROUND: usize = 50;
/// Relative root bound gain below which cut rounds stop.
const CUT_STALL: f64 = 1e-4;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    MostFractional,
    #[default]
    PseudoCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub rel_gap_tol: f64,
    pub int_feas_tol: f64,
    pub time_limit_s: Option<f64>,
    pub node_limit: Option<usize>,
    pub branching: Branching,
    pub seed: u64,
    /// Rounds of root Gomory cuts; 0 disables them.
    pub cut_rounds: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rel_gap_tol: 1e-6,
            int_feas_tol: 1e-6,
            time_limit_s: None,
            node_limit: None,
            branching: Branching::PseudoCost,
            seed: 0,
            cut_rounds: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MilpStatus {
    Optimal,
    /// Feasible point without optimality proof (e.g. an imported solution).
    Feasible,
    Infeasible,
    Unbounded,
    /// Node or time limit reached; `values` holds the best incumbent, if any.
    Limit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct MilpSolution<T> {
    pub status: MilpStatus,
    pub objective: Option<T>,
    pub values: Vec<T>,
    /// Best proven lower bound.
    pub bound: Option<T>,
    pub stats: SolveStats,
}

impl<T: Scalar> MilpSolution<T> {
    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn relative_gap(&self) -> Option<f64> {
        let (o, b) = (self.objective?.to_f64_lossy(), self.bound?.to_f64_lossy());
        Some((o - b) / o.abs().max(1.0))
    }
}

struct Node<T> {
    /// Parent LP value; `None` for the root.
    bound: Option<T>,
    seq: usize,
    parent: Option<usize>,
    /// Bound changes along the path from the root, applied in order.
    changes: Vec<(usize, Option<T>, Option<T>)>,
    branch: Option<BranchRecord<T>>,
}

struct BranchRecord<T> {
    var: usize,
    up: bool,
    distance: T,
    parent_obj: T,
}

impl<T: Scalar> PartialEq for Node<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Node<T> {}
impl<T: Scalar> PartialOrd for Node<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Node<T> {
    // Max-heap: the smallest bound, then the earliest node, pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        let key = |b: &Option<T>| b.map_or((0u8, None), |v| (1u8, Some(v)));
        key(&other.bound)
            .partial_cmp(&key(&self.bound))
            .unwrap_or(Ordering::Equal)
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Clone, Copy, Default)]
struct PseudoCost {
    down_sum: f64,
    down_n: u32,
    up_sum: f64,
    up_n: u32,
}

/// Solves `model` to optimality within `opts.rel_gap_tol`.
///
/// Nodes are explored best-bound first with ties broken by creation order;
/// each node re-solves with the dual simplex from the basis left by the
/// previous node, which stays dual feasible under bound changes.
pub fn solve_milp<T: Scalar>(model: &MilpModel<T>, opts: &SolveOptions) -> Result<MilpSolution<T>> {
    model.validate()?;
    let started = Instant::now();
    let n = model.num_vars();
    let int_tol = T::from_f64_lossy(opts.int_feas_tol);
    let integer: Vec<usize> = (0..n).filter(|&j| model.vars[j].kind.is_integral()).collect();

    let mut stats = SolveStats::default();
    let finish = |status, objective, values, bound, mut stats: SolveStats| {
        stats.wall_time_s = started.elapsed().as_secs_f64();
        Ok(MilpSolution {
            status,
            objective,
            values,
            bound,
            stats,
        })
    };

    // Root bound tightening for integer columns.
    let mut root_lower: Vec<Option<T>> = model.vars.iter().map(|v| v.lower).collect();
    let mut root_upper: Vec<Option<T>> = model.vars.iter().map(|v| v.upper).collect();
    for &j in &integer {
        root_lower[j] = root_lower[j].map(|l| (l - int_tol).ceil());
        root_upper[j] = root_upper[j].map(|u| (u + int_tol).floor());
        if let (Some(l), Some(u)) = (root_lower[j], root_upper[j]) {
            if l > u {
                return finish(MilpStatus::Infeasible, None, Vec::new(), None, stats);
            }
        }
    }

    check_size(model.num_cons())?;
    let work = with_root_cuts(model, &root_lower, &root_upper, opts.cut_rounds)?;
    let problem = LpProblem::from_model(&work);
    let mut simplex = Simplex::new(&problem);
    for j in 0..n {
        simplex.set_bounds(j, root_lower[j], root_upper[j]);
    }
    simplex.sync();

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: None,
        seq,
        parent: None,
        changes: Vec::new(),
        branch: None,
    });
    seq += 1;

    let mut incumbent: Option<(T, Vec<T>)> = None;
    let mut pruned_bound: Option<T> = None;
    let mut current_changes: Vec<(usize, Option<T>, Option<T>)> = Vec::new();
    let mut pseudo = vec![PseudoCost::default(); n];
    let gap_tol = |inc: T| -> T {
        T::from_f64_lossy(opts.rel_gap_tol * inc.to_f64_lossy().abs().max(1.0))
    };
    let mut limit_hit = false;
    let mut root_unbounded = false;

    // After branching, one child is solved next (a plunge) so that
    // incumbents appear early; the sibling waits in the heap.
    let mut plunge: Option<Node<T>> = None;
    loop {
        let Some(node) = plunge.take().or_else(|| heap.pop()) else {
            break;
        };
        if let (Some((inc, _)), Some(nb)) = (&incumbent, node.bound) {
            if nb >= *inc - gap_tol(*inc) {
                pruned_bound = Some(pruned_bound.map_or(nb, |b: T| b.min_of(nb)));
                continue;
            }
        }
        if opts.node_limit.is_some_and(|lim| stats.nodes >= lim)
            || opts
                .time_limit_s
                .is_some_and(|lim| started.elapsed().as_secs_f64() >= lim)
        {
            limit_hit = true;
            heap.push(node);
            break;
        }
        stats.nodes += 1;

        // Move the working bounds from the previous node to this one.
        for &(j, _, _) in &current_changes {
            simplex.set_bounds(j, root_lower[j], root_upper[j]);
        }
        for &(j, lo, up) in &node.changes {
            simplex.set_bounds(j, lo, up);
        }
        current_changes.clone_from(&node.changes);
        let before = simplex.iterations();
        let status = if node.parent.is_some() {
            simplex.reoptimize()?
        } else {
            simplex.solve()?
        };
        stats.lp_iterations += simplex.iterations() - before;

        match status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.parent.is_none() {
                    root_unbounded = true;
                    break;
                }
                continue;
            }
            LpStatus::Optimal => {}
        }
        let obj = simplex.objective();

        if let Some(rec) = &node.branch {
            let gain = (obj - rec.parent_obj).to_f64_lossy().max(0.0);
            let per_unit = gain / rec.distance.to_f64_lossy().max(1e-9);
            let pc = &mut pseudo[rec.var];
            if rec.up {
                pc.up_sum += per_unit;
                pc.up_n += 1;
            } else {
                pc.down_sum += per_unit;
                pc.down_n += 1;
            }
        }

        if let Some((inc, _)) = &incumbent {
            if obj >= *inc - gap_tol(*inc) {
                pruned_bound = Some(pruned_bound.map_or(obj, |b: T| b.min_of(obj)));
                continue;
            }
        }

        let x = simplex.values().to_vec();
        let pick = choose_branch(&integer, &x, int_tol, opts.branching, &pseudo);
        if pick.is_some() {
            if let Some((value, rounded)) = round_up(model, &integer, &x, int_tol) {
                if incumbent.as_ref().is_none_or(|(inc, _)| value < *inc) {
                    incumbent = Some((value, rounded));
                }
            }
        }
        let Some(j) = pick else {
            // Integral: snap and keep if it improves the incumbent.
            let mut snapped = x;
            for &k in &integer {
                snapped[k] = snap(snapped[k]);
            }
            let value = model.objective_value(&snapped);
            if incumbent.as_ref().is_none_or(|(inc, _)| value < *inc) {
                incumbent = Some((value, snapped));
            }
            continue;
        };

        let v = x[j];
        let down = v.floor();
        let up = down + T::one();
        let (lo, hi) = simplex.bounds(j);
        for (is_up, lo, hi) in [(false, lo, Some(down)), (true, Some(up), hi)] {
            let mut changes = node.changes.clone();
            changes.push((j, lo, hi));
            let child = Node {
                bound: Some(obj),
                seq,
                parent: Some(node.seq),
                changes,
                branch: Some(BranchRecord {
                    var: j,
                    up: is_up,
                    distance: if is_up { up - v } else { v - down },
                    parent_obj: obj,
                }),
            };
            seq += 1;
            if is_up {
                plunge = Some(child);
            } else {
                heap.push(child);
            }
        }
    }

    if root_unbounded {
        return finish(MilpStatus::Unbounded, None, Vec::new(), None, stats);
    }

    let open_bound = heap.iter().filter_map(|nd| nd.bound).fold(None, |acc: Option<T>, b| {
        Some(acc.map_or(b, |a| a.min_of(b)))
    });
    match incumbent {
        Some((obj, values)) => {
            let mut bound = obj;
            for b in [pruned_bound, open_bound].into_iter().flatten() {
                bound = bound.min_of(b);
            }
            let status = if limit_hit {
                MilpStatus::Limit
            } else {
                MilpStatus::Optimal
            };
            finish(status, Some(obj), values, Some(bound), stats)
        }
        None if limit_hit => finish(MilpStatus::Limit, None, Vec::new(), open_bound, stats),
        None => finish(MilpStatus::Infeasible, None, Vec::new(), None, stats),
    }
}

/// Appends rounds of Gomory cuts separated at the root LP optimum, stopping
/// once the bound stalls.
fn with_root_cuts<T: Scalar>(
    model: &MilpModel<T>,
    lower: &[Option<T>],
    upper: &[Option<T>],
    rounds: usize,
) -> Result<MilpModel<T>> {
    let mut work = model.clone();
    let is_int: Vec<bool> = model.vars.iter().map(|v| v.kind.is_integral()).collect();
    if !is_int.contains(&true) {
        return Ok(work);
    }
    let mut last: Option<T> = None;
    for round in 0..rounds {
        let problem = LpProblem::from_model(&work);
        let mut simplex = Simplex::new(&problem);
        for j in 0..model.num_vars() {
            simplex.set_bounds(j, lower[j], upper[j]);
        }
        simplex.sync();
        if simplex.solve()? != LpStatus::Optimal {
            break;
        }
        let obj = simplex.objective();
        if let Some(prev) = last {
            let scale = obj.abs().max_of(T::one());
            if obj - prev <= T::from_f64_lossy(CUT_STALL) * scale {
                break;
            }
        }
        last = Some(obj);
        let cuts = simplex.gomory_cuts(&is_int, CUTS_PER_ROUND, model.num_cons());
        if cuts.is_empty() {
            break;
        }
        for (k, (coeffs, rhs)) in cuts.into_iter().enumerate() {
            work.add_constraint(format!("gmi{round}_{k}"), coeffs, Sense::Ge, rhs);
        }
    }
    Ok(work)
}

/// Rounds fractional integer columns up and keeps the point if it satisfies
/// every bound and row.
fn round_up<T: Scalar>(model: &MilpModel<T>, integer: &[usize], x: &[T], tol: T) -> Option<(T, Vec<T>)> {
    let mut y = x.to_vec();
    for &j in integer {
        let f = y[j].floor();
        y[j] = if y[j] - f <= tol { f } else { f + T::one() };
    }
    let feas = T::from_f64_lossy(1e-9);
    if !model.bound_violations(&y, feas).is_empty() || !model.violations(&y, feas).is_empty() {
        return None;
    }
    Some((model.objective_value(&y), y))
}

fn snap<T: Scalar>(v: T) -> T {
    let f = v.floor();
    if v - f < (f + T::one()) - v {
        f
    } else {
        f + T::one()
    }
}

fn choose_branch<T: Scalar>(
    integer: &[usize],
    x: &[T],
    tol: T,
    rule: Branching,
    pseudo: &[PseudoCost],
) -> Option<usize> {
    let fractional = integer.iter().filter_map(|&j| {
        let f = x[j] - x[j].floor();
        let dist = f.min_of(T::one() - f);
        (dist > tol).then_some((j, f.to_f64_lossy(), dist.to_f64_lossy()))
    });
    match rule {
        Branching::MostFractional => {
            let mut best: Option<(usize, f64)> = None;
            for (j, _, dist) in fractional {
                if best.is_none_or(|(_, d)| dist > d) {
                    best = Some((j, dist));
                }
            }
            best.map(|b| b.0)
        }
        Branching::PseudoCost => {
            let avg = |sum: f64, cnt: u32, fallback: f64| {
                if cnt > 0 {
                    sum / cnt as f64
                } else {
                    fallback
                }
            };
            let (mut gs, mut gn) = (0.0, 0u32);
            for pc in pseudo {
                gs += pc.down_sum + pc.up_sum;
                gn += pc.down_n + pc.up_n;
            }
            let global = if gn > 0 { gs / gn as f64 } else { 1.0 };
            let mut best: Option<(usize, f64)> = None;
            for (j, f, _) in fractional {
                let pc = pseudo[j];
                let down = avg(pc.down_sum, pc.down_n, global) * f;
                let up = avg(pc.up_sum, pc.up_n, global) * (1.0 - f);
                let score = down.max(1e-6) * up.max(1e-6);
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((j, score));
                }
            }
            best.map(|b| b.0)
        }
    }
}

/// Objective and feasibility of an integer assignment, used by tests and the
/// importer. Returns `None` if any integrality requirement is violated.
pub fn integral_violation<T: Scalar>(model: &MilpModel<T>, x: &[T], tol: T) -> Option<usize> {
    model.vars.iter().enumerate().find_map(|(j, v)| {
        if v.kind == VarKind::Continuous {
            return None;
        }
        let f = x[j] - x[j].floor();
        (f.min_of(T::one() - f) > tol).then_some(j)
    })
}

//! Exhaustive reference solver in exact rational arithmetic.
//!
//! Integer columns are enumerated depth first over their bounds. Once all of
//! them are fixed, the continuous remainder is decided by Fourier-Motzkin
//! elimination, which also yields the exact optimum of its objective.

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use relaynet::milp::{MilpModel, Sense};

pub type Q = BigRational;

pub fn q(v: f64) -> Q {
    Q::from_float(v).expect("finite model data")
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    /// Exact optimum, `None` when infeasible.
    pub objective: Option<Q>,
    pub argmin: Option<Vec<Q>>,
    pub nodes: usize,
}

impl Enumeration {
    pub fn objective_f64(&self) -> Option<f64> {
        self.objective.as_ref().map(to_f64)
    }
}

pub fn to_f64(v: &Q) -> f64 {
    use num_traits::ToPrimitive;
    v.to_f64().unwrap_or(f64::NAN)
}

/// Number of integer assignments a naive enumeration would visit.
pub fn domain_size(model: &MilpModel<f64>) -> f64 {
    model
        .vars
        .iter()
        .filter(|v| v.kind.is_integral())
        .map(|v| match (v.lower, v.upper) {
            (Some(l), Some(u)) => (u.floor() - l.ceil() + 1.0).max(0.0),
            _ => f64::INFINITY,
        })
        .product()
}

/// Linear inequality `sum coeffs . y <= rhs` over continuous columns.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Ineq {
    coeffs: Vec<(usize, Q)>,
    rhs: Q,
}

struct Row {
    coeffs: Vec<(usize, Q)>,
    sense: Sense,
    rhs: Q,
}

struct Search<'a> {
    model: &'a MilpModel<f64>,
    rows: Vec<Row>,
    obj: Vec<Q>,
    lower: Vec<Option<Q>>,
    upper: Vec<Option<Q>>,
    integer: Vec<usize>,
    continuous: Vec<usize>,
    /// Rows touching each column.
    touching: Vec<Vec<usize>>,
    best: Option<(Q, Vec<Q>)>,
    nodes: usize,
    budget: usize,
}

/// Exact optimum of `model` (minimization). Returns `None` when more than
/// `budget` search nodes would be needed. Every integer column needs finite
/// bounds.
pub fn enumerate_optimum(model: &MilpModel<f64>, budget: usize) -> Option<Enumeration> {
    let n = model.num_vars();
    let rows: Vec<Row> = model
        .cons
        .iter()
        .map(|c| Row {
            coeffs: c.coeffs.iter().map(|&(j, a)| (j, q(a))).collect(),
            sense: c.sense,
            rhs: q(c.rhs),
        })
        .collect();
    let mut touching = vec![Vec::new(); n];
    for (i, r) in rows.iter().enumerate() {
        for &(j, _) in &r.coeffs {
            touching[j].push(i);
        }
    }
    let integer: Vec<usize> = (0..n).filter(|&j| model.vars[j].kind.is_integral()).collect();
    let continuous: Vec<usize> = (0..n).filter(|&j| !model.vars[j].kind.is_integral()).collect();
    let mut s = Search {
        model,
        rows,
        obj: model.vars.iter().map(|v| q(v.obj)).collect(),
        lower: model.vars.iter().map(|v| v.lower.map(q)).collect(),
        upper: model.vars.iter().map(|v| v.upper.map(q)).collect(),
        integer,
        continuous,
        touching,
        best: None,
        nodes: 0,
        budget,
    };
    for &j in &s.integer {
        let (Some(l), Some(u)) = (&s.lower[j], &s.upper[j]) else {
            panic!("integer column {} needs finite bounds", model.vars[j].name);
        };
        s.lower[j] = Some(l.ceil());
        s.upper[j] = Some(u.floor());
    }
    let mut fixed: Vec<Option<Q>> = vec![None; n];
    if !s.dfs(0, &mut fixed, Q::zero()) {
        return None;
    }
    let nodes = s.nodes;
    Some(match s.best {
        Some((obj, x)) => Enumeration {
            objective: Some(obj),
            argmin: Some(x),
            nodes,
        },
        None => Enumeration {
            objective: None,
            argmin: None,
            nodes,
        },
    })
}

impl Search<'_> {
    /// Returns false when the node budget is exhausted.
    fn dfs(&mut self, depth: usize, fixed: &mut Vec<Option<Q>>, partial: Q) -> bool {
        self.nodes += 1;
        if self.nodes > self.budget {
            return false;
        }
        if let (Some((best, _)), Some(bound)) = (&self.best, self.optimistic(depth, &partial)) {
            if bound >= *best {
                return true;
            }
        }
        if depth == self.integer.len() {
            self.leaf(fixed, partial);
            return true;
        }
        let j = self.integer[depth];
        let lo = self.lower[j].clone().expect("integer bounds");
        let hi = self.upper[j].clone().expect("integer bounds");
        let mut v = lo;
        while v <= hi {
            fixed[j] = Some(v.clone());
            if self.rows_possible(j, fixed) {
                let next = partial.clone() + &self.obj[j] * &v;
                if !self.dfs(depth + 1, fixed, next) {
                    return false;
                }
            }
            v += Q::one();
        }
        fixed[j] = None;
        true
    }

    /// Lower bound on the objective of any completion, if finite.
    fn optimistic(&self, depth: usize, partial: &Q) -> Option<Q> {
        let mut total = partial.clone();
        let rest = self.integer[depth..].iter().chain(&self.continuous);
        for &j in rest {
            let c = &self.obj[j];
            if c.is_zero() {
                continue;
            }
            let bound = if c.is_positive() { &self.lower[j] } else { &self.upper[j] };
            total += c * bound.as_ref()?;
        }
        Some(total)
    }

    /// Whether every row touching column `j` can still be satisfied given the
    /// fixed columns and the bounds of the free ones.
    fn rows_possible(&self, j: usize, fixed: &[Option<Q>]) -> bool {
        self.touching[j].iter().all(|&i| {
            let r = &self.rows[i];
            let mut lo = Some(Q::zero());
            let mut hi = Some(Q::zero());
            for (k, a) in &r.coeffs {
                match &fixed[*k] {
                    Some(x) => {
                        let t = a * x;
                        lo = lo.map(|l| l + &t);
                        hi = hi.map(|h| h + &t);
                    }
                    None => {
                        let (l, u) = (&self.lower[*k], &self.upper[*k]);
                        let (min, max) = if a.is_positive() { (l, u) } else { (u, l) };
                        lo = lo.and_then(|acc| min.as_ref().map(|m| acc + a * m));
                        hi = hi.and_then(|acc| max.as_ref().map(|m| acc + a * m));
                    }
                }
            }
            let le_ok = lo.as_ref().is_none_or(|l| *l <= r.rhs);
            let ge_ok = hi.as_ref().is_none_or(|h| *h >= r.rhs);
            match r.sense {
                Sense::Le => le_ok,
                Sense::Ge => ge_ok,
                Sense::Eq => le_ok && ge_ok,
            }
        })
    }

    fn leaf(&mut self, fixed: &[Option<Q>], partial: Q) {
        // Residual system over continuous columns; column index `t` (one past
        // the last) carries the continuous objective.
        let t = self.model.num_vars();
        let mut ineqs = Vec::new();
        let mut eqs = Vec::new();
        for r in &self.rows {
            let mut coeffs = Vec::new();
            let mut rhs = r.rhs.clone();
            for (k, a) in &r.coeffs {
                match &fixed[*k] {
                    Some(x) => rhs -= a * x,
                    None => coeffs.push((*k, a.clone())),
                }
            }
            match r.sense {
                Sense::Le => ineqs.push(Ineq { coeffs, rhs }),
                Sense::Ge => ineqs.push(negate(Ineq { coeffs, rhs })),
                Sense::Eq => eqs.push(Ineq { coeffs, rhs }),
            }
        }
        for &j in &self.continuous {
            if let Some(l) = &self.lower[j] {
                ineqs.push(Ineq {
                    coeffs: vec![(j, -Q::one())],
                    rhs: -l.clone(),
                });
            }
            if let Some(u) = &self.upper[j] {
                ineqs.push(Ineq {
                    coeffs: vec![(j, Q::one())],
                    rhs: u.clone(),
                });
            }
        }
        let mut obj: Vec<(usize, Q)> = self
            .continuous
            .iter()
            .filter(|&&j| !self.obj[j].is_zero())
            .map(|&j| (j, self.obj[j].clone()))
            .collect();
        let has_obj = !obj.is_empty();
        if has_obj {
            obj.push((t, -Q::one()));
            ineqs.push(Ineq {
                coeffs: obj,
                rhs: Q::zero(),
            });
        }
        let Some(reduced) = eliminate(eqs, ineqs, &self.continuous) else {
            return;
        };
        let cont_min = if has_obj {
            // Remaining rows only involve t: a t <= b.
            let mut lower: Option<Q> = None;
            for r in &reduced {
                if let Some((_, a)) = r.coeffs.first() {
                    if a.is_negative() {
                        let bound = r.rhs.clone() / a;
                        if lower.as_ref().is_none_or(|l| bound > *l) {
                            lower = Some(bound);
                        }
                    }
                }
            }
            lower.expect("continuous objective is unbounded below")
        } else {
            Q::zero()
        };
        let total = partial + cont_min;
        if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
            let x = fixed
                .iter()
                .map(|v| v.clone().unwrap_or_else(Q::zero))
                .collect();
            self.best = Some((total, x));
        }
    }
}

fn negate(r: Ineq) -> Ineq {
    Ineq {
        coeffs: r.coeffs.into_iter().map(|(k, a)| (k, -a)).collect(),
        rhs: -r.rhs,
    }
}

fn coeff(r: &Ineq, k: usize) -> Q {
    r.coeffs
        .iter()
        .find(|(j, _)| *j == k)
        .map_or_else(Q::zero, |(_, a)| a.clone())
}

/// `a + m * b`, dropping zeros, sorted by column.
fn combine(a: &Ineq, m: &Q, b: &Ineq) -> Ineq {
    let mut acc: std::collections::BTreeMap<usize, Q> = a.coeffs.iter().cloned().collect();
    for (k, v) in &b.coeffs {
        *acc.entry(*k).or_insert_with(Q::zero) += m * v;
    }
    Ineq {
        coeffs: acc.into_iter().filter(|(_, v)| !v.is_zero()).collect(),
        rhs: a.rhs.clone() + m * &b.rhs,
    }
}

/// Scales a row so its first coefficient has magnitude 1 (for deduplication).
fn normalize(r: Ineq) -> Ineq {
    match r.coeffs.first() {
        None => r,
        Some((_, a)) => {
            let s = a.abs();
            Ineq {
                coeffs: r.coeffs.iter().map(|(k, v)| (*k, v / &s)).collect(),
                rhs: r.rhs / s,
            }
        }
    }
}

/// Eliminates every column in `cols`; returns the rows left over (which only
/// mention columns outside `cols`), or `None` if the system is infeasible.
fn eliminate(mut eqs: Vec<Ineq>, ineqs: Vec<Ineq>, cols: &[usize]) -> Option<Vec<Ineq>> {
    let mut ineqs: Vec<Ineq> = ineqs
        .into_iter()
        .map(|r| Ineq {
            coeffs: r.coeffs.into_iter().filter(|(_, a)| !a.is_zero()).collect(),
            rhs: r.rhs,
        })
        .collect();
    let targets: BTreeSet<usize> = cols.iter().copied().collect();

    // Gaussian substitution with the equalities.
    while let Some(e) = eqs.pop() {
        let e = Ineq {
            coeffs: e.coeffs.into_iter().filter(|(_, a)| !a.is_zero()).collect(),
            rhs: e.rhs,
        };
        let Some((k, a)) = e.coeffs.iter().find(|(k, _)| targets.contains(k)).cloned() else {
            if e.coeffs.is_empty() {
                if !e.rhs.is_zero() {
                    return None;
                }
            } else {
                ineqs.push(e.clone());
                ineqs.push(negate(e));
            }
            continue;
        };
        let sub = |r: &Ineq| -> Ineq {
            let c = coeff(r, k);
            if c.is_zero() {
                r.clone()
            } else {
                combine(r, &(-c / &a), &e)
            }
        };
        eqs = eqs.iter().map(sub).collect();
        ineqs = ineqs.iter().map(sub).collect();
    }

    // Fourier-Motzkin on what is left.
    loop {
        let mut set: BTreeSet<Ineq> = BTreeSet::new();
        for r in ineqs.drain(..) {
            if r.coeffs.is_empty() {
                if r.rhs.is_negative() {
                    return None;
                }
                continue;
            }
            set.insert(normalize(r));
        }
        ineqs = set.into_iter().collect();
        let candidates: BTreeSet<usize> = ineqs
            .iter()
            .flat_map(|r| r.coeffs.iter().map(|(k, _)| *k))
            .filter(|k| targets.contains(k))
            .collect();
        let Some(&k) = candidates.iter().min_by_key(|&&k| {
            let pos = ineqs.iter().filter(|r| coeff(r, k).is_positive()).count();
            let neg = ineqs.iter().filter(|r| coeff(r, k).is_negative()).count();
            pos * neg
        }) else {
            return Some(ineqs);
        };
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for r in ineqs.drain(..) {
            let c = coeff(&r, k);
            if c.is_positive() {
                pos.push((c, r));
            } else if c.is_negative() {
                neg.push((c, r));
            } else {
                rest.push(r);
            }
        }
        for (cp, p) in &pos {
            for (cn, nrow) in &neg {
                // p / cp + n / |cn| cancels column k.
                let scaled = Ineq {
                    coeffs: p.coeffs.iter().map(|(j, v)| (*j, v / cp)).collect(),
                    rhs: p.rhs.clone() / cp,
                };
                rest.push(combine(&scaled, &(Q::one() / cn.abs()), nrow));
            }
        }
        ineqs = rest;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use relaynet::milp::VarKind;

    #[test]
    fn knapsack() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut m = MilpModel::new("k");
        let a = m.add_var("a", VarKind::Integer, Some(0.0), Some(3.0), -5.0);
        let b = m.add_var("b", VarKind::Integer, Some(0.0), Some(3.0), -4.0);
        let c = m.add_var("c", VarKind::Integer, Some(0.0), Some(5.0), -3.0);
        m.add_constraint("r1", vec![(a, 2.0), (b, 3.0), (c, 1.0)], Sense::Le, 5.0);
        m.add_constraint("r2", vec![(a, 4.0), (b, 1.0), (c, 2.0)], Sense::Le, 11.0);
        m.add_constraint("r3", vec![(a, 3.0), (b, 4.0), (c, 2.0)], Sense::Le, 8.0);
        let e = enumerate_optimum(&m, 1_000_000).unwrap();
        assert_eq!(e.objective_f64(), Some(-13.0));
    }

    #[test]
    fn continuous_residual_is_optimized() {
        // min x + 1.5 y, x integer, y >= 2.5 - x, y >= 0: x = 2, y = 0.5.
        let mut m = MilpModel::new("c");
        let x = m.add_var("x", VarKind::Integer, Some(0.0), Some(5.0), 1.0);
        let y = m.add_var("y", VarKind::Continuous, Some(0.0), None, 1.5);
        m.add_constraint("r", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 2.5);
        let e = enumerate_optimum(&m, 1000).unwrap();
        assert_eq!(e.objective_f64(), Some(2.75));
    }

    #[test]
    fn infeasible_and_budget() {
        let mut m = MilpModel::new("i");
        let x = m.add_var("x", VarKind::Integer, Some(0.0), Some(1.0), 1.0);
        let y = m.add_var("y", VarKind::Continuous, Some(0.0), Some(1.0), 0.0);
        m.add_constraint("r", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 3.0);
        assert!(enumerate_optimum(&m, 1000).unwrap().objective.is_none());
        let z = m.add_var("z", VarKind::Integer, Some(0.0), Some(9.0), -1.0);
        m.cons.clear();
        m.add_constraint("s", vec![(x, 1.0), (z, 1.0)], Sense::Le, 20.0);
        assert!(enumerate_optimum(&m, 5).is_none());
    }

    #[test]
    fn equality_chains_substitute() {
        // y1 = x, y2 = y1, y2 <= 0.5 forces x = 0.
        let mut m = MilpModel::new("e");
        let x = m.add_var("x", VarKind::Integer, Some(0.0), Some(2.0), -1.0);
        let y1 = m.add_var("y1", VarKind::Continuous, Some(0.0), None, 0.0);
        let y2 = m.add_var("y2", VarKind::Continuous, Some(0.0), Some(0.5), 0.0);
        m.add_constraint("a", vec![(y1, 1.0), (x, -1.0)], Sense::Eq, 0.0);
        m.add_constraint("b", vec![(y2, 1.0), (y1, -1.0)], Sense::Eq, 0.0);
        assert_eq!(enumerate_optimum(&m, 1000).unwrap().objective_f64(), Some(0.0));
    }
}

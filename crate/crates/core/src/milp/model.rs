//! Solver-agnostic linear model.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type VarId = usize;
pub type RowId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable<T> {
    pub name: String,
    /// `None` is minus infinity.
    pub lower: Option<T>,
    /// `None` is plus infinity.
    pub upper: Option<T>,
    pub kind: VarKind,
    pub obj: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub name: String,
    pub coeffs: Vec<(VarId, T)>,
    pub sense: Sense,
    pub rhs: T,
}

impl<T: Scalar> Constraint<T> {
    pub fn activity(&self, x: &[T]) -> T {
        self.coeffs
            .iter()
            .fold(T::zero(), |acc, &(j, a)| acc + a * x[j])
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[T]) -> T {
        let act = self.activity(x);
        let zero = T::zero();
        match self.sense {
            Sense::Le => (act - self.rhs).max_of(zero),
            Sense::Ge => (self.rhs - act).max_of(zero),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// Minimization model: variables with bounds, integrality and objective
/// coefficients, plus named linear rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel<T> {
    pub name: String,
    pub vars: Vec<Variable<T>>,
    pub cons: Vec<Constraint<T>>,
}

impl<T: Scalar> MilpModel<T> {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            vars: Vec::new(),
            cons: Vec::new(),
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: Option<T>,
        upper: Option<T>,
        obj: T,
    ) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (
                Some(lower.unwrap_or(T::zero()).max_of(T::zero())),
                Some(upper.unwrap_or(T::one()).min_of(T::one())),
            ),
            _ => (lower, upper),
        };
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
            obj,
        });
        self.vars.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, T)>,
        sense: Sense,
        rhs: T,
    ) -> RowId {
        self.cons.push(Constraint {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        self.cons.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_cons(&self) -> usize {
        self.cons.len()
    }

    pub fn num_integer_vars(&self) -> usize {
        self.vars.iter().filter(|v| v.kind.is_integral()).count()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.vars
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (v, &xi)| acc + v.obj * xi)
    }

    /// Structural checks: references, bound order, names present and unique.
    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for (j, v) in self.vars.iter().enumerate() {
            if v.name.is_empty() {
                return Err(Error::Validation(format!("variable {j} has no name")));
            }
            if !names.insert(v.name.as_str()) {
                return Err(Error::Validation(format!("duplicate variable name {}", v.name)));
            }
            if let (Some(l), Some(u)) = (v.lower, v.upper) {
                if l > u {
                    return Err(Error::Validation(format!(
                        "variable {} has lower {l} > upper {u}",
                        v.name
                    )));
                }
            }
        }
        let mut rows = BTreeSet::new();
        for (i, c) in self.cons.iter().enumerate() {
            if c.name.is_empty() {
                return Err(Error::Validation(format!("constraint {i} has no name")));
            }
            if !rows.insert(c.name.as_str()) {
                return Err(Error::Validation(format!("duplicate constraint name {}", c.name)));
            }
            if let Some(&(j, _)) = c.coeffs.iter().find(|(j, _)| *j >= self.vars.len()) {
                return Err(Error::Validation(format!(
                    "constraint {} references undeclared variable {j}",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// Copy with every integrality requirement dropped.
    pub fn relaxed(&self) -> Self {
        let mut m = self.clone();
        for v in &mut m.vars {
            v.kind = VarKind::Continuous;
        }
        m
    }

    /// Rows violated by more than `tol`, worst first.
    pub fn violations(&self, x: &[T], tol: T) -> Vec<(RowId, T)> {
        let mut out: Vec<(RowId, T)> = self
            .cons
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let v = c.violation(x);
                (v > tol).then_some((i, v))
            })
            .collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        out
    }

    /// Variables outside their bounds by more than `tol`.
    pub fn bound_violations(&self, x: &[T], tol: T) -> Vec<VarId> {
        self.vars
            .iter()
            .zip(x)
            .enumerate()
            .filter(|(_, (v, &xi))| {
                v.lower.is_some_and(|l| xi < l - tol) || v.upper.is_some_and(|u| xi > u + tol)
            })
            .map(|(j, _)| j)
            .collect()
    }

    /// Converts every coefficient to another scalar type.
    pub fn convert<U: Scalar>(&self) -> MilpModel<U> {
        let c = |v: T| U::from_f64_lossy(v.to_f64_lossy());
        MilpModel {
            name: self.name.clone(),
            vars: self
                .vars
                .iter()
                .map(|v| Variable {
                    name: v.name.clone(),
                    lower: v.lower.map(c),
                    upper: v.upper.map(c),
                    kind: v.kind,
                    obj: c(v.obj),
                })
                .collect(),
            cons: self
                .cons
                .iter()
                .map(|r| Constraint {
                    name: r.name.clone(),
                    coeffs: r.coeffs.iter().map(|&(j, a)| (j, c(a))).collect(),
                    sense: r.sense,
                    rhs: c(r.rhs),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_bounds_are_clamped() {
        let mut m = MilpModel::<f64>::new("t");
        let b = m.add_var("b", VarKind::Binary, None, Some(5.0), 1.0);
        assert_eq!(m.vars[b].lower, Some(0.0));
        assert_eq!(m.vars[b].upper, Some(1.0));
    }

    #[test]
    fn validation_catches_bad_models() {
        let mut m = MilpModel::<f64>::new("t");
        let x = m.add_var("x", VarKind::Continuous, Some(0.0), None, 1.0);
        m.add_constraint("r", vec![(x, 1.0)], Sense::Ge, 1.0);
        m.validate().unwrap();

        let mut dup = m.clone();
        dup.add_var("x", VarKind::Continuous, None, None, 0.0);
        assert!(dup.validate().is_err());

        let mut unnamed = m.clone();
        unnamed.add_var("", VarKind::Continuous, None, None, 0.0);
        assert!(unnamed.validate().is_err());

        let mut dangling = m.clone();
        dangling.add_constraint("r2", vec![(9, 1.0)], Sense::Le, 0.0);
        assert!(dangling.validate().is_err());
    }

    #[test]
    fn violations_are_sorted_worst_first() {
        let mut m = MilpModel::<f64>::new("t");
        let x = m.add_var("x", VarKind::Continuous, Some(0.0), None, 1.0);
        m.add_constraint("a", vec![(x, 1.0)], Sense::Ge, 2.0);
        m.add_constraint("b", vec![(x, 1.0)], Sense::Le, 0.5);
        m.add_constraint("c", vec![(x, 1.0)], Sense::Eq, 5.0);
        let v = m.violations(&[1.0], 1e-9);
        assert_eq!(v.iter().map(|r| r.0).collect::<Vec<_>>(), vec![2, 0, 1]);
    }
}

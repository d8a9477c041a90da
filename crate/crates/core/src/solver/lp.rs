//! Bounded-variable primal and dual simplex.
//!
//! Every row `i` gets a logical variable `r_i = a_i x` whose bounds encode the
//! row sense, so the working system is `[A | -I] (x, r) = 0` and all
//! constraints become variable bounds. The basis inverse is kept explicitly
//! and updated by elementary row operations, with periodic refactorization.
//! Phase 1 minimizes the sum of bound violations of basic variables, which
//! lets the primal method restart from any basis. After bound changes in
//! branch-and-bound the dual method takes over, since an optimal basis stays
//! dual feasible.

use crate::error::{Error, Result};
use crate::milp::{MilpModel, Sense};
use crate::scalar::Scalar;

const REFACTOR_EVERY: usize = 100;
const DEGENERATE_BEFORE_BLAND: usize = 50;

/// Column-oriented LP data shared by all simplex runs on one model.
#[derive(Debug, Clone)]
pub struct LpProblem<T> {
    num_structural: usize,
    num_rows: usize,
    cols: Vec<Vec<(usize, T)>>,
    cost: Vec<T>,
    lower: Vec<Option<T>>,
    upper: Vec<Option<T>>,
}

impl<T: Scalar> LpProblem<T> {
    /// Continuous relaxation of `model`.
    pub fn from_model(model: &MilpModel<T>) -> Self {
        let n = model.num_vars();
        let m = model.num_cons();
        let mut cols: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for v in &model.vars {
            lower.push(v.lower);
            upper.push(v.upper);
            cost.push(v.obj);
        }
        for (i, c) in model.cons.iter().enumerate() {
            // Merge duplicate entries so each column holds a row at most once.
            let mut merged: Vec<(usize, T)> = c.coeffs.clone();
            merged.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < merged.len() {
                let j = merged[k].0;
                let mut a = T::zero();
                while k < merged.len() && merged[k].0 == j {
                    a = a + merged[k].1;
                    k += 1;
                }
                if a != T::zero() {
                    cols[j].push((i, a));
                }
            }
            let (lo, up) = match c.sense {
                Sense::Le => (None, Some(c.rhs)),
                Sense::Ge => (Some(c.rhs), None),
                Sense::Eq => (Some(c.rhs), Some(c.rhs)),
            };
            lower.push(lo);
            upper.push(up);
            cost.push(T::zero());
        }
        Self {
            num_structural: n,
            num_rows: m,
            cols,
            cost,
            lower,
            upper,
        }
    }

    pub fn num_structural(&self) -> usize {
        self.num_structural
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn lower(&self, j: usize) -> Option<T> {
        self.lower[j]
    }

    pub fn upper(&self, j: usize) -> Option<T> {
        self.upper[j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// Basis snapshot sufficient to restart the simplex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    head: Vec<usize>,
    state: Vec<VarState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub objective: Option<T>,
    pub values: Vec<T>,
    pub iterations: usize,
}

/// Largest row count the dense basis inverse is allowed to reach.
pub const MAX_ROWS: usize = 8192;

/// Refuses models whose basis inverse would not fit in memory.
pub fn check_size(rows: usize) -> Result<()> {
    if rows > MAX_ROWS {
        return Err(Error::Limit(format!(
            "{rows} rows exceed the {MAX_ROWS}-row limit of the dense simplex"
        )));
    }
    Ok(())
}

/// Solves the continuous relaxation of `model` from a slack basis.
pub fn solve_lp<T: Scalar>(model: &MilpModel<T>) -> Result<LpSolution<T>> {
    model.validate()?;
    check_size(model.num_cons())?;
    let problem = LpProblem::from_model(model);
    let mut simplex = Simplex::new(&problem);
    let status = simplex.solve()?;
    let (objective, values) = match status {
        LpStatus::Optimal => (Some(simplex.objective()), simplex.values().to_vec()),
        _ => (None, Vec::new()),
    };
    Ok(LpSolution {
        status,
        objective,
        values,
        iterations: simplex.iterations(),
    })
}

pub struct Simplex<'a, T> {
    p: &'a LpProblem<T>,
    lower: Vec<Option<T>>,
    upper: Vec<Option<T>>,
    head: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<T>,
    binv: Vec<T>,
    since_refactor: usize,
    iterations: usize,
}

impl<'a, T: Scalar> Simplex<'a, T> {
    pub fn new(p: &'a LpProblem<T>) -> Self {
        let n = p.num_structural;
        let m = p.num_rows;
        let mut state = Vec::with_capacity(n + m);
        for j in 0..n {
            state.push(default_state(p.lower[j], p.upper[j]));
        }
        state.extend(std::iter::repeat_n(VarState::Basic, m));
        let mut binv = vec![T::zero(); m * m];
        for i in 0..m {
            binv[i * m + i] = -T::one();
        }
        let mut s = Self {
            p,
            lower: p.lower.clone(),
            upper: p.upper.clone(),
            head: (n..n + m).collect(),
            state,
            x: vec![T::zero(); n + m],
            binv,
            since_refactor: 0,
            iterations: 0,
        };
        s.recompute_x();
        s
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Structural variable values.
    pub fn values(&self) -> &[T] {
        &self.x[..self.p.num_structural]
    }

    pub fn objective(&self) -> T {
        (0..self.p.num_structural).fold(T::zero(), |acc, j| acc + self.p.cost[j] * self.x[j])
    }

    pub fn basis(&self) -> Basis {
        Basis {
            head: self.head.clone(),
            state: self.state.clone(),
        }
    }

    pub fn bounds(&self, j: usize) -> (Option<T>, Option<T>) {
        (self.lower[j], self.upper[j])
    }

    /// Replaces the working bounds of a structural variable and shifts the
    /// basic values to match.
    pub fn set_bounds(&mut self, j: usize, lower: Option<T>, upper: Option<T>) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.state[j] != VarState::Basic {
            let before = self.x[j];
            self.state[j] = match self.state[j] {
                VarState::AtUpper if upper.is_some() => VarState::AtUpper,
                VarState::AtLower if lower.is_some() => VarState::AtLower,
                _ => default_state(lower, upper),
            };
            self.shift_basics(j, before);
        }
    }

    /// Moves nonbasic `j` from `before` to its current nonbasic value and
    /// updates the basic variables accordingly.
    fn shift_basics(&mut self, j: usize, before: T) {
        let after = self.nonbasic_value(j);
        let delta = after - before;
        if delta == T::zero() {
            return;
        }
        self.x[j] = after;
        let m = self.m();
        let mut col = Vec::new();
        self.for_column(j, |i, a| col.push((i, a)));
        for pos in 0..m {
            let mut s = T::zero();
            for &(i, a) in &col {
                let b = self.binv[pos * m + i];
                if b != T::zero() {
                    s = s + b * a;
                }
            }
            if s != T::zero() {
                let h = self.head[pos];
                self.x[h] = self.x[h] - s * delta;
            }
        }
    }

    /// Recomputes basic values from scratch, removing accumulated drift.
    pub fn sync(&mut self) {
        self.recompute_x();
    }

    /// Installs a stored basis and refactorizes.
    pub fn load_basis(&mut self, basis: &Basis) -> Result<()> {
        self.head.clone_from(&basis.head);
        self.state.clone_from(&basis.state);
        for j in 0..self.state.len() {
            if self.state[j] != VarState::Basic {
                let (lo, up) = (self.lower[j], self.upper[j]);
                self.state[j] = match self.state[j] {
                    VarState::AtUpper if up.is_some() => VarState::AtUpper,
                    VarState::AtLower if lo.is_some() => VarState::AtLower,
                    _ => default_state(lo, up),
                };
            }
        }
        self.refactor()
    }

    fn m(&self) -> usize {
        self.p.num_rows
    }

    fn nonbasic_value(&self, j: usize) -> T {
        match self.state[j] {
            VarState::AtLower => self.lower[j].unwrap_or(T::zero()),
            VarState::AtUpper => self.upper[j].unwrap_or(T::zero()),
            _ => T::zero(),
        }
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, T)) {
        let n = self.p.num_structural;
        if j < n {
            for &(i, a) in &self.p.cols[j] {
                f(i, a);
            }
        } else {
            f(j - n, -T::one());
        }
    }

    fn recompute_x(&mut self) {
        let m = self.m();
        let mut rhs = vec![T::zero(); m];
        for j in 0..self.state.len() {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != T::zero() {
                self.for_column(j, |i, a| rhs[i] = rhs[i] + a * v);
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let mut s = T::zero();
            for (b, v) in row.iter().zip(&rhs) {
                if *v != T::zero() {
                    s = s + *b * *v;
                }
            }
            self.x[self.head[r]] = -s;
        }
    }

    /// Gauss-Jordan inversion of the basis matrix. Dependent columns are
    /// swapped for logicals of the rows left without a pivot.
    fn refactor(&mut self) -> Result<()> {
        for _attempt in 0..2 {
            match self.try_invert() {
                Ok(()) => {
                    self.since_refactor = 0;
                    self.recompute_x();
                    return Ok(());
                }
                Err((dependent, free_rows)) => {
                    let n = self.p.num_structural;
                    for (&pos, &row) in dependent.iter().zip(&free_rows) {
                        let out = self.head[pos];
                        self.state[out] = default_state(self.lower[out], self.upper[out]);
                        let logical = n + row;
                        self.head[pos] = logical;
                        self.state[logical] = VarState::Basic;
                    }
                }
            }
        }
        Err(Error::Numerical("basis stays singular after repair".into()))
    }

    /// Inverts the basis. Basic logicals cover their own rows, so only the
    /// block of structural columns on the remaining rows is eliminated; the
    /// logical rows of the inverse follow by substitution.
    fn try_invert(&mut self) -> std::result::Result<(), (Vec<usize>, Vec<usize>)> {
        let m = self.m();
        let n = self.p.num_structural;
        let zero = T::zero();
        let mut logical_pos = vec![usize::MAX; m];
        let mut struct_pos = Vec::new();
        for (pos, &j) in self.head.iter().enumerate() {
            if j >= n {
                logical_pos[j - n] = pos;
            } else {
                struct_pos.push(pos);
            }
        }
        let rows: Vec<usize> = (0..m).filter(|&i| logical_pos[i] == usize::MAX).collect();
        let k = struct_pos.len();
        let mut local = vec![usize::MAX; m];
        for (a, &i) in rows.iter().enumerate() {
            local[i] = a;
        }

        let mut mat = vec![zero; k * k];
        let mut col_nnz = vec![0usize; k];
        for (c, &pos) in struct_pos.iter().enumerate() {
            for &(i, a) in &self.p.cols[self.head[pos]] {
                if local[i] != usize::MAX {
                    mat[local[i] * k + c] = a;
                    col_nnz[c] += 1;
                }
            }
        }
        let mut inv = vec![zero; k * k];
        for a in 0..k {
            inv[a * k + a] = T::one();
        }
        // Sparse columns first keeps fill low.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&c| (col_nnz[c], c));
        let mut row_used = vec![false; k];
        let mut pivot_row = vec![usize::MAX; k];
        let mut dependent = Vec::new();
        let mut nz_rows: Vec<usize> = Vec::with_capacity(k);
        for &col in &order {
            let mut best = usize::MAX;
            let mut best_abs = zero;
            for r in 0..k {
                if !row_used[r] {
                    let a = mat[r * k + col].abs();
                    if a > best_abs {
                        best_abs = a;
                        best = r;
                    }
                }
            }
            if best == usize::MAX || best_abs <= T::pivot_tol() {
                dependent.push(struct_pos[col]);
                continue;
            }
            row_used[best] = true;
            pivot_row[col] = best;
            let piv = mat[best * k + col];
            for c in 0..k {
                let v = mat[best * k + c];
                if v != zero {
                    mat[best * k + c] = v / piv;
                }
                let w = inv[best * k + c];
                if w != zero {
                    inv[best * k + c] = w / piv;
                }
            }
            nz_rows.clear();
            nz_rows.extend((0..k).filter(|&r| r != best && mat[r * k + col] != zero));
            for &r in &nz_rows {
                let f = mat[r * k + col];
                for c in 0..k {
                    let a = mat[best * k + c];
                    if a != zero {
                        mat[r * k + c] = mat[r * k + c] - f * a;
                    }
                    let b = inv[best * k + c];
                    if b != zero {
                        inv[r * k + c] = inv[r * k + c] - f * b;
                    }
                }
                mat[r * k + col] = zero;
            }
        }
        if !dependent.is_empty() {
            let free_rows = (0..k).filter(|&r| !row_used[r]).map(|r| rows[r]).collect();
            return Err((dependent, free_rows));
        }

        let mut binv = vec![zero; m * m];
        for (c, &pos) in struct_pos.iter().enumerate() {
            let src = &inv[pivot_row[c] * k..(pivot_row[c] + 1) * k];
            for (a, &v) in src.iter().enumerate() {
                if v != zero {
                    binv[pos * m + rows[a]] = v;
                }
            }
        }
        for (i, &pos) in logical_pos.iter().enumerate() {
            if pos != usize::MAX {
                binv[pos * m + i] = -T::one();
            }
        }
        for &spos in &struct_pos {
            for &(i, a) in &self.p.cols[self.head[spos]] {
                let lpos = logical_pos[i];
                if lpos == usize::MAX {
                    continue;
                }
                for &r in &rows {
                    let v = binv[spos * m + r];
                    if v != zero {
                        binv[lpos * m + r] = binv[lpos * m + r] + a * v;
                    }
                }
            }
        }
        self.binv = binv;
        Ok(())
    }

    fn infeasibility(&self, j: usize) -> i8 {
        let v = self.x[j];
        let tol = T::feas_tol();
        if self.lower[j].is_some_and(|l| v < l - tol) {
            -1
        } else if self.upper[j].is_some_and(|u| v > u + tol) {
            1
        } else {
            0
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        matches!((self.lower[j], self.upper[j]), (Some(l), Some(u)) if l == u)
    }

    /// Runs primal simplex from the current basis.
    pub fn solve(&mut self) -> Result<LpStatus> {
        let m = self.m();
        let total = self.state.len();
        let max_iter = 50_000 + 20 * total;
        let start = self.iterations;
        let mut degenerate = 0usize;
        let mut verified = false;
        let mut y = vec![T::zero(); m];
        let mut alpha = vec![T::zero(); m];
        let mut cb = vec![T::zero(); m];

        loop {
            if self.iterations - start > max_iter {
                return Err(Error::Numerical(format!(
                    "simplex iteration limit ({max_iter}) reached"
                )));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }

            let mut phase_one = false;
            for (pos, c) in cb.iter_mut().enumerate() {
                let j = self.head[pos];
                let inf = self.infeasibility(j);
                if inf != 0 {
                    phase_one = true;
                }
                *c = match inf {
                    -1 => -T::one(),
                    1 => T::one(),
                    _ => T::zero(),
                };
            }
            if !phase_one {
                for (pos, c) in cb.iter_mut().enumerate() {
                    *c = self.p.cost[self.head[pos]];
                }
            }

            // Duals.
            for v in y.iter_mut() {
                *v = T::zero();
            }
            for (pos, &c) in cb.iter().enumerate() {
                if c != T::zero() {
                    let row = &self.binv[pos * m..(pos + 1) * m];
                    for (yi, &b) in y.iter_mut().zip(row) {
                        if b != T::zero() {
                            *yi = *yi + c * b;
                        }
                    }
                }
            }

            // Pricing.
            let bland = degenerate >= DEGENERATE_BEFORE_BLAND;
            let mut entering: Option<(usize, T)> = None;
            let mut best_score = T::zero();
            for j in 0..total {
                let st = self.state[j];
                if st == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let cj = if phase_one { T::zero() } else { self.p.cost[j] };
                let mut ya = T::zero();
                self.for_column(j, |i, a| ya = ya + y[i] * a);
                let d = cj - ya;
                let tol = T::opt_tol();
                let eligible = match st {
                    VarState::AtLower => d < -tol,
                    VarState::AtUpper => d > tol,
                    VarState::Zero => d.abs() > tol,
                    VarState::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if d.abs() > best_score {
                    best_score = d.abs();
                    entering = Some((j, d));
                }
            }

            let Some((q, dq)) = entering else {
                if !verified {
                    // Refresh basic values against drift before concluding.
                    verified = true;
                    self.recompute_x();
                    continue;
                }
                if phase_one {
                    return Ok(LpStatus::Infeasible);
                }
                return Ok(LpStatus::Optimal);
            };
            verified = false;

            let dir = if dq < T::zero() { T::one() } else { -T::one() };
            for v in alpha.iter_mut() {
                *v = T::zero();
            }
            self.for_column(q, |i, a| {
                for (pos, al) in alpha.iter_mut().enumerate() {
                    let b = self.binv[pos * m + i];
                    if b != T::zero() {
                        *al = *al + b * a;
                    }
                }
            });

            let step = self.ratio_test(q, dir, &alpha, phase_one, bland);
            let (theta, leaving) = match step {
                Step::Unbounded => {
                    if phase_one {
                        self.refactor()?;
                        degenerate = DEGENERATE_BEFORE_BLAND;
                        self.iterations += 1;
                        continue;
                    }
                    return Ok(LpStatus::Unbounded);
                }
                Step::Flip(t) => (t, None),
                Step::Pivot(t, pos, to_upper) => (t, Some((pos, to_upper))),
            };

            if theta <= T::feas_tol() {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.iterations += 1;

            // Primal update.
            let xq = self.x[q] + dir * theta;
            for pos in 0..m {
                if alpha[pos] != T::zero() {
                    let j = self.head[pos];
                    self.x[j] = self.x[j] - dir * theta * alpha[pos];
                }
            }
            match leaving {
                None => {
                    self.state[q] = if dir > T::zero() {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.x[q] = self.nonbasic_value(q);
                }
                Some((r, to_upper)) => {
                    let out = self.head[r];
                    self.state[out] = if to_upper {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.x[out] = self.nonbasic_value(out);
                    self.head[r] = q;
                    self.state[q] = VarState::Basic;
                    self.x[q] = xq;
                    self.pivot_inverse(r, &alpha);
                    self.since_refactor += 1;
                }
            }
        }
    }

    /// Re-solves after bound changes: dual simplex while the basis stays dual
    /// feasible, then primal simplex to finish.
    pub fn reoptimize(&mut self) -> Result<LpStatus> {
        match self.solve_dual()? {
            Some(LpStatus::Infeasible) => Ok(LpStatus::Infeasible),
            _ => self.solve(),
        }
    }

    fn duals(&self, y: &mut [T]) {
        let m = self.m();
        for v in y.iter_mut() {
            *v = T::zero();
        }
        for pos in 0..m {
            let c = self.p.cost[self.head[pos]];
            if c != T::zero() {
                let row = &self.binv[pos * m..(pos + 1) * m];
                for (yi, &b) in y.iter_mut().zip(row) {
                    if b != T::zero() {
                        *yi = *yi + c * b;
                    }
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize, y: &[T]) -> T {
        let mut ya = T::zero();
        self.for_column(j, |i, a| ya = ya + y[i] * a);
        self.p.cost[j] - ya
    }

    /// Dual simplex. Returns `None` when the basis is not dual feasible or
    /// progress stalls, leaving the rest to the primal method.
    fn solve_dual(&mut self) -> Result<Option<LpStatus>> {
        let m = self.m();
        let total = self.state.len();
        let max_iter = 10_000 + 10 * total;
        let start = self.iterations;
        let tol = T::opt_tol();
        let zero = T::zero();
        let mut y = vec![zero; m];
        let mut d = vec![zero; total];
        let mut alpha = vec![zero; m];
        let mut cands: Vec<(usize, T, T)> = Vec::new();
        let mut row: Vec<(usize, T)> = Vec::new();

        let mut fresh = true;
        loop {
            if self.iterations - start > max_iter {
                return Ok(None);
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                fresh = true;
            }
            if fresh {
                fresh = false;
                self.duals(&mut y);
                for j in 0..total {
                    if self.state[j] == VarState::Basic || self.is_fixed(j) {
                        continue;
                    }
                    let dj = self.reduced_cost(j, &y);
                    let bad = match self.state[j] {
                        VarState::AtLower => dj < -tol,
                        VarState::AtUpper => dj > tol,
                        VarState::Zero => dj.abs() > tol,
                        VarState::Basic => false,
                    };
                    if bad {
                        // A boxed column is repaired by moving it to its other bound.
                        let flipped = match (self.state[j], self.lower[j], self.upper[j]) {
                            (VarState::AtLower, Some(_), Some(_)) => VarState::AtUpper,
                            (VarState::AtUpper, Some(_), Some(_)) => VarState::AtLower,
                            _ => return Ok(None),
                        };
                        let before = self.x[j];
                        self.state[j] = flipped;
                        self.shift_basics(j, before);
                    }
                    d[j] = dj;
                }
            }

            // Leaving row: largest bound violation.
            let mut leave: Option<(usize, T, bool)> = None;
            let mut worst = zero;
            for pos in 0..m {
                let j = self.head[pos];
                let v = self.x[j];
                let feas = T::feas_tol();
                if let Some(l) = self.lower[j].filter(|&l| v < l - feas) {
                    if l - v > worst {
                        worst = l - v;
                        leave = Some((pos, l, false));
                    }
                } else if let Some(u) = self.upper[j].filter(|&u| v > u + feas) {
                    if v - u > worst {
                        worst = v - u;
                        leave = Some((pos, u, true));
                    }
                }
            }
            let Some((r, target, to_upper)) = leave else {
                return Ok(Some(LpStatus::Optimal));
            };
            let increase = !to_upper;
            let rho = &self.binv[r * m..(r + 1) * m];

            // Entering column: Harris two-pass dual ratio test.
            cands.clear();
            row.clear();
            let mut max_ratio: Option<T> = None;
            for j in 0..total {
                if self.state[j] == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let mut a = zero;
                self.for_column(j, |i, c| {
                    if rho[i] != zero {
                        a = a + rho[i] * c;
                    }
                });
                if a == zero {
                    continue;
                }
                row.push((j, a));
                if a.abs() <= T::pivot_tol() {
                    continue;
                }
                // Moving x_j by s changes the leaving variable by -a * s.
                let up_ok = if increase { a < zero } else { a > zero };
                let ok = match self.state[j] {
                    VarState::AtLower => up_ok,
                    VarState::AtUpper => !up_ok,
                    VarState::Zero => true,
                    VarState::Basic => false,
                };
                if !ok {
                    continue;
                }
                let dj = d[j].abs();
                let relaxed = (dj + tol) / a.abs();
                if max_ratio.is_none_or(|b| relaxed < b) {
                    max_ratio = Some(relaxed);
                }
                cands.push((j, a, dj / a.abs()));
            }
            let Some(bound) = max_ratio else {
                return Ok(Some(LpStatus::Infeasible));
            };
            let mut chosen: Option<(usize, T)> = None;
            for &(j, a, ratio) in &cands {
                if ratio > bound {
                    continue;
                }
                if chosen.is_none_or(|(cj, ca)| a.abs() > ca.abs() || (a.abs() == ca.abs() && j < cj)) {
                    chosen = Some((j, a));
                }
            }
            let (q, _) = chosen.expect("the minimum ratio is attained");

            for v in alpha.iter_mut() {
                *v = zero;
            }
            self.for_column(q, |i, a| {
                for (pos, al) in alpha.iter_mut().enumerate() {
                    let b = self.binv[pos * m + i];
                    if b != zero {
                        *al = *al + b * a;
                    }
                }
            });
            let arq = alpha[r];
            if arq.abs() <= T::pivot_tol() {
                self.refactor()?;
                return Ok(None);
            }
            let delta = (self.x[self.head[r]] - target) / arq;
            self.iterations += 1;
            for pos in 0..m {
                if alpha[pos] != zero {
                    let j = self.head[pos];
                    self.x[j] = self.x[j] - alpha[pos] * delta;
                }
            }
            let out = self.head[r];
            self.state[out] = if to_upper {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
            self.x[out] = target;
            let xq = self.x[q] + delta;
            self.head[r] = q;
            self.state[q] = VarState::Basic;
            self.x[q] = xq;
            self.pivot_inverse(r, &alpha);
            self.since_refactor += 1;

            let theta = d[q] / arq;
            for &(j, a) in &row {
                d[j] = d[j] - theta * a;
            }
            d[q] = zero;
            d[out] = -theta;
        }
    }

    /// Gomory mixed-integer cuts read off the rows of the current optimal
    /// tableau whose basic variable is integer but takes a fractional value.
    /// Each cut is `sum a_j x_j >= b` over structural columns. Logical
    /// variables are treated as continuous. Rows from `first_cut_row` on are
    /// earlier cuts; tableau rows that involve them are skipped, so only
    /// rank-1 cuts are produced.
    pub fn gomory_cuts(&self, integer: &[bool], max_cuts: usize, first_cut_row: usize) -> Vec<(Vec<(usize, T)>, T)> {
        let m = self.m();
        let n = self.p.num_structural;
        let zero = T::zero();
        let one = T::one();
        let f_min = T::from_f64_lossy(1e-3);
        let mut cuts = Vec::new();

        let mut rows: Vec<(usize, T)> = (0..m)
            .filter_map(|pos| {
                let j = self.head[pos];
                if j >= n || !integer[j] {
                    return None;
                }
                let f = self.x[j] - self.x[j].floor();
                (f > f_min && f < one - f_min).then(|| (pos, (f - T::from_f64_lossy(0.5)).abs()))
            })
            .collect();
        // Most fractional rows first.
        rows.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));

        'rows: for &(pos, _) in rows.iter().take(max_cuts) {
            let rho = &self.binv[pos * m..(pos + 1) * m];
            let beta = self.x[self.head[pos]];
            let f0 = beta - beta.floor();
            // Cut in complemented nonbasic space: sum g_j t_j >= 1.
            let mut terms: Vec<(usize, T)> = Vec::new();
            for j in 0..self.state.len() {
                if self.state[j] == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let mut a = zero;
                self.for_column(j, |i, c| {
                    if rho[i] != zero {
                        a = a + rho[i] * c;
                    }
                });
                if a.abs() <= T::pivot_tol() {
                    continue;
                }
                if j >= n + first_cut_row {
                    continue 'rows;
                }
                let sigma = match self.state[j] {
                    VarState::AtLower => one,
                    VarState::AtUpper => -one,
                    _ => continue 'rows,
                };
                let aj = a * sigma;
                let g = if j < n && integer[j] {
                    let fj = aj - aj.floor();
                    (fj / f0).min_of((one - fj) / (one - f0))
                } else if aj > zero {
                    aj / f0
                } else {
                    -aj / (one - f0)
                };
                if g != zero {
                    terms.push((j, g * sigma));
                }
            }
            // Back to structural space: t_j = sigma (x_j - bound_j).
            let mut coef = vec![zero; n];
            let mut rhs = one;
            for &(j, gs) in &terms {
                rhs = rhs + gs * self.nonbasic_value(j);
                if j < n {
                    coef[j] = coef[j] + gs;
                } else {
                    for &(k, a) in &self.row_entries(j - n) {
                        coef[k] = coef[k] + gs * a;
                    }
                }
            }
            let big = coef.iter().fold(zero, |acc, c| acc.max_of(c.abs()));
            let tiny = big * T::from_f64_lossy(1e-9);
            let mut entries: Vec<(usize, T)> = Vec::new();
            for (j, c) in coef.into_iter().enumerate() {
                if c == zero {
                    continue;
                }
                if c.abs() > tiny {
                    entries.push((j, c));
                    continue;
                }
                // Drop the term at its largest possible contribution.
                let extreme = if c > zero { self.upper[j] } else { self.lower[j] };
                match extreme {
                    Some(b) => rhs = rhs - c * b,
                    None => continue 'rows,
                }
            }
            if entries.is_empty() {
                continue;
            }
            let (mut lo, mut hi) = (entries[0].1.abs(), entries[0].1.abs());
            for &(_, c) in &entries {
                lo = lo.min_of(c.abs());
                hi = hi.max_of(c.abs());
            }
            if hi > lo * T::from_f64_lossy(1e6) {
                continue;
            }
            let slack = T::feas_tol() * T::from_f64_lossy(100.0) * rhs.abs().max_of(one);
            cuts.push((entries, rhs - slack));
        }
        cuts
    }

    fn row_entries(&self, i: usize) -> Vec<(usize, T)> {
        let mut out = Vec::new();
        for (j, col) in self.p.cols.iter().enumerate() {
            if let Some(&(_, a)) = col.iter().find(|e| e.0 == i) {
                out.push((j, a));
            }
        }
        out
    }

    fn pivot_inverse(&mut self, r: usize, alpha: &[T]) {
        let m = self.m();
        let piv = alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v = *v / piv;
        }
        let apply = |row: &mut [T], f: T| {
            for (a, &b) in row.iter_mut().zip(prow.iter()) {
                if b != T::zero() {
                    *a = *a - f * b;
                }
            }
        };
        for (i, row) in before.chunks_mut(m).enumerate() {
            if alpha[i] != T::zero() {
                apply(row, alpha[i]);
            }
        }
        for (k, row) in after.chunks_mut(m).enumerate() {
            let i = r + 1 + k;
            if alpha[i] != T::zero() {
                apply(row, alpha[i]);
            }
        }
    }

    /// Two-pass (Harris) ratio test. Basic variable at position `pos` moves at
    /// rate `-dir * alpha[pos]` per unit step of the entering variable.
    fn ratio_test(&self, q: usize, dir: T, alpha: &[T], phase_one: bool, bland: bool) -> Step<T> {
        let m = self.m();
        let tol = T::feas_tol();
        let zero = T::zero();

        // Limit for a basic var, with bounds relaxed by `slack`.
        let limit = |pos: usize, slack: T| -> Option<(T, bool)> {
            let a = alpha[pos];
            if a.abs() <= T::pivot_tol() {
                return None;
            }
            let j = self.head[pos];
            let rate = -dir * a;
            let v = self.x[j];
            let (lo, up) = (self.lower[j], self.upper[j]);
            let below = lo.is_some_and(|l| v < l - tol);
            let above = up.is_some_and(|u| v > u + tol);
            if rate > zero {
                if below && phase_one {
                    lo.map(|l| (((l - v) / rate).max_of(zero), false))
                } else if above {
                    None
                } else {
                    up.map(|u| (((u + slack - v) / rate).max_of(zero), true))
                }
            } else if above && phase_one {
                up.map(|u| (((u - v) / rate).max_of(zero), true))
            } else if below {
                None
            } else {
                lo.map(|l| (((l - slack - v) / rate).max_of(zero), false))
            }
        };

        let flip = match (self.lower[q], self.upper[q]) {
            (Some(l), Some(u)) => Some(u - l),
            _ => None,
        };

        // Pass 1: smallest step with relaxed bounds.
        let mut bound: Option<T> = None;
        for pos in 0..m {
            if let Some((t, _)) = limit(pos, tol) {
                if bound.is_none_or(|b| t < b) {
                    bound = Some(t);
                }
            }
        }
        let Some(max_step) = bound else {
            return match flip {
                Some(f) => Step::Flip(f),
                None => Step::Unbounded,
            };
        };
        if let Some(f) = flip {
            if f <= max_step {
                return Step::Flip(f);
            }
        }

        // Pass 2: among rows blocking within the relaxed step, the largest pivot.
        let mut chosen: Option<(usize, T, bool)> = None;
        for pos in 0..m {
            let Some((t_exact, to_upper)) = limit(pos, zero) else {
                continue;
            };
            if t_exact > max_step {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((cp, _, _)) => {
                    if bland {
                        self.head[pos] < self.head[cp]
                    } else {
                        let (a, b) = (alpha[pos].abs(), alpha[cp].abs());
                        a > b || (a == b && self.head[pos] < self.head[cp])
                    }
                }
            };
            if better {
                chosen = Some((pos, t_exact, to_upper));
            }
        }
        match chosen {
            Some((pos, t, to_upper)) => Step::Pivot(t.min_of(max_step), pos, to_upper),
            None => Step::Unbounded,
        }
    }
}

enum Step<T> {
    Unbounded,
    Flip(T),
    Pivot(T, usize, bool),
}

fn default_state<T: Scalar>(lower: Option<T>, upper: Option<T>) -> VarState {
    match (lower, upper) {
        (Some(_), _) => VarState::AtLower,
        (None, Some(_)) => VarState::AtUpper,
        (None, None) => VarState::Zero,
    }
}

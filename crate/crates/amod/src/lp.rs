//! Self-contained linear-program solving core.
//!
//! Dense-basis two-phase primal simplex over sparsely stored columns.
//! Deterministic pivoting (lowest-index tie-breaks, Bland's rule fallback
//! for anti-cycling) and row/column equilibration keep solves reproducible
//! across runs even when capacities and travel times differ by orders of
//! magnitude. Intended for desk-scale instances, not industrial LPs.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    /// Minimization objective, dense.
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<Option<f64>>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![None; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        assert!(var < self.num_vars, "objective references undeclared variable");
        self.objective[var] = coeff;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        for &(j, a) in &coeffs {
            assert!(j < self.num_vars, "constraint references undeclared variable");
            assert!(a.is_finite(), "non-finite constraint coefficient");
        }
        assert!(rhs.is_finite(), "non-finite right-hand side");
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_lower_bound(&mut self, var: usize, bound: f64) {
        assert!(bound.is_finite());
        self.lower[var] = bound;
    }

    pub fn set_upper_bound(&mut self, var: usize, bound: f64) {
        assert!(bound.is_finite());
        self.upper[var] = Some(bound);
    }

    /// Plain-text dump for debugging: one line per constraint in
    /// `a_j*x_j ... <rel> rhs` form.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("minimize");
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(out, " {:+}*x{}", c, j);
            }
        }
        out.push('\n');
        for row in &self.constraints {
            let mut line = String::from("  ");
            for &(j, a) in &row.coeffs {
                let _ = write!(line, "{:+}*x{} ", a, j);
            }
            let rel = match row.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = write!(line, "{} {}", rel, row.rhs);
            out.push_str(&line);
            out.push('\n');
        }
        for j in 0..self.num_vars {
            if self.lower[j] != 0.0 || self.upper[j].is_some() {
                let _ = write!(out, "  {} <= x{}", self.lower[j], j);
                if let Some(u) = self.upper[j] {
                    let _ = write!(out, " <= {}", u);
                }
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot budget exhausted or the final basis failed the feasibility
    /// audit. Never a silent wrong answer.
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Dual value per original constraint row, in input order.
    pub duals: Option<Vec<f64>>,
    pub dual_objective: Option<f64>,
}

impl LpSolution {
    fn non_optimal(status: LpStatus, num_vars: usize) -> Self {
        Self {
            status,
            x: vec![0.0; num_vars],
            objective: 0.0,
            duals: None,
            dual_objective: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub feasibility: f64,
    pub optimality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-9,
            optimality: 1e-9,
        }
    }
}

/// Internal standardized row: equality system on shifted, scaled variables.
struct Standardized {
    m: usize,
    /// Sparse columns of the full augmented matrix (structural + slack +
    /// artificial).
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    /// Phase-2 costs per column.
    cost: Vec<f64>,
    n_structural: usize,
    first_artificial: usize,
    /// Per original constraint: (internal row index, combined sign*scale
    /// factor mapping internal duals back to original-row duals).
    row_map: Vec<(usize, f64)>,
    /// Per finite upper bound: (variable, internal row, dual factor).
    upper_rows: Vec<(usize, usize, f64)>,
    col_scale: Vec<f64>,
    obj_const: f64,
}

pub fn solve_lp(lp: &LinearProgram, tol: Tolerances) -> LpSolution {
    let n = lp.num_vars;
    for c in &lp.objective {
        if !c.is_finite() {
            return LpSolution::non_optimal(LpStatus::NumericalFailure, n);
        }
    }
    for j in 0..n {
        if let Some(u) = lp.upper[j] {
            if u < lp.lower[j] {
                return LpSolution::non_optimal(LpStatus::Infeasible, n);
            }
        }
    }

    let std = standardize(lp);
    let mut simplex = Simplex::new(&std, tol);

    match simplex.phase1(&std) {
        Phase1Outcome::Feasible => {}
        Phase1Outcome::Infeasible => {
            return LpSolution::non_optimal(LpStatus::Infeasible, n);
        }
        Phase1Outcome::Failure => {
            return LpSolution::non_optimal(LpStatus::NumericalFailure, n);
        }
    }

    match simplex.phase2(&std) {
        Phase2Outcome::Optimal => {}
        Phase2Outcome::Unbounded => {
            return LpSolution::non_optimal(LpStatus::Unbounded, n);
        }
        Phase2Outcome::Failure => {
            return LpSolution::non_optimal(LpStatus::NumericalFailure, n);
        }
    }

    // Recover original-space solution.
    let w = simplex.primal_values(&std);
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = lp.lower[j] + w[j] * std.col_scale[j];
        // Snap tiny negatives introduced by scaling noise.
        if x[j] < lp.lower[j] && x[j] > lp.lower[j] - tol.feasibility {
            x[j] = lp.lower[j];
        }
    }
    let objective: f64 = lp
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();

    // Feasibility audit on the original data.
    for row in &lp.constraints {
        let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
        let slack_tol = tol.feasibility.max(1e-9) * (1.0 + row.rhs.abs());
        let ok = match row.relation {
            Relation::Le => lhs <= row.rhs + slack_tol,
            Relation::Ge => lhs >= row.rhs - slack_tol,
            Relation::Eq => (lhs - row.rhs).abs() <= slack_tol,
        };
        if !ok {
            return LpSolution::non_optimal(LpStatus::NumericalFailure, n);
        }
    }

    // Duals for the original rows (upper-bound rows are internal).
    let y = simplex.dual_values(&std);
    let mut duals = Vec::with_capacity(lp.constraints.len());
    let mut dual_objective = std.obj_const;
    for (orig, &(row, factor)) in lp.constraints.iter().zip(&std.row_map) {
        let d = y[row] * factor;
        duals.push(d);
        let shifted_rhs = orig.rhs
            - orig
                .coeffs
                .iter()
                .map(|&(j, a)| a * lp.lower[j])
                .sum::<f64>();
        dual_objective += d * shifted_rhs;
    }
    // Internal upper-bound rows contribute too.
    for &(j, row, factor) in &std.upper_rows {
        let d = y[row] * factor;
        dual_objective += d * (lp.upper[j].unwrap() - lp.lower[j]);
    }

    LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        duals: Some(duals),
        dual_objective: Some(dual_objective),
    }
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

struct RawRow {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
    /// Index into the original constraint list, or None for bound rows.
    origin: Option<usize>,
}

fn standardize(lp: &LinearProgram) -> Standardized {
    let n = lp.num_vars;

    // Shift variables to zero lower bounds and collect all rows, including
    // one synthetic <= row per finite upper bound.
    let mut rows: Vec<RawRow> = Vec::with_capacity(lp.constraints.len());
    for (i, c) in lp.constraints.iter().enumerate() {
        let shift: f64 = c.coeffs.iter().map(|&(j, a)| a * lp.lower[j]).sum();
        rows.push(RawRow {
            coeffs: c.coeffs.clone(),
            relation: c.relation,
            rhs: c.rhs - shift,
            origin: Some(i),
        });
    }
    let mut upper_vars = Vec::new();
    for j in 0..n {
        if let Some(u) = lp.upper[j] {
            upper_vars.push(j);
            rows.push(RawRow {
                coeffs: vec![(j, 1.0)],
                relation: Relation::Le,
                rhs: u - lp.lower[j],
                origin: None,
            });
        }
    }

    // Normalize to nonnegative rhs; remember sign flips for duals.
    let mut row_sign = vec![1.0f64; rows.len()];
    for (i, r) in rows.iter_mut().enumerate() {
        if r.rhs < 0.0 {
            row_sign[i] = -1.0;
            r.rhs = -r.rhs;
            for c in r.coeffs.iter_mut() {
                c.1 = -c.1;
            }
            r.relation = match r.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    // Equilibrate: rows then columns to unit max-norm.
    let m = rows.len();
    let mut row_scale = vec![1.0f64; m];
    for (i, r) in rows.iter().enumerate() {
        let mx = r
            .coeffs
            .iter()
            .map(|&(_, a)| a.abs())
            .fold(0.0f64, f64::max);
        if mx > 0.0 {
            row_scale[i] = 1.0 / mx;
        }
    }
    let mut col_max = vec![0.0f64; n];
    for (i, r) in rows.iter().enumerate() {
        for &(j, a) in &r.coeffs {
            col_max[j] = col_max[j].max((a * row_scale[i]).abs());
        }
    }
    let col_scale: Vec<f64> = col_max
        .iter()
        .map(|&m| if m > 0.0 { 1.0 / m } else { 1.0 })
        .collect();

    // Build scaled sparse columns for structural variables.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut b = vec![0.0f64; m];
    for (i, r) in rows.iter().enumerate() {
        b[i] = r.rhs * row_scale[i];
        for &(j, a) in &r.coeffs {
            let v = a * row_scale[i] * col_scale[j];
            if v != 0.0 {
                cols[j].push((i, v));
            }
        }
    }

    // Slack / surplus / artificial columns and phase-2 costs.
    let mut cost: Vec<f64> = (0..n).map(|j| lp.objective[j] * col_scale[j]).collect();
    let mut next = n;
    for (i, r) in rows.iter().enumerate() {
        match r.relation {
            Relation::Le => {
                cols.push(vec![(i, 1.0)]);
                cost.push(0.0);
                next += 1;
            }
            Relation::Ge => {
                cols.push(vec![(i, -1.0)]);
                cost.push(0.0);
                next += 1;
            }
            Relation::Eq => {}
        }
    }
    let first_artificial = next;
    for (i, r) in rows.iter().enumerate() {
        if !matches!(r.relation, Relation::Le) {
            cols.push(vec![(i, 1.0)]);
            cost.push(0.0);
        }
    }

    // Dual bookkeeping: map original row -> (internal row, combined scale).
    let mut row_map = Vec::with_capacity(lp.constraints.len());
    let mut upper_rows = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let combined = row_sign[i] * row_scale[i];
        if r.origin.is_some() {
            row_map.push((i, combined));
        }
    }
    for (k, &j) in upper_vars.iter().enumerate() {
        let i = lp.constraints.len() + k;
        upper_rows.push((j, i, row_sign[i] * row_scale[i]));
    }

    let obj_const: f64 = lp
        .objective
        .iter()
        .enumerate()
        .map(|(j, c)| c * lp.lower[j])
        .sum();

    Standardized {
        m,
        cols,
        b,
        cost,
        n_structural: n,
        first_artificial,
        row_map,
        upper_rows,
        col_scale,
        obj_const,
    }
}

// ---------------------------------------------------------------------------
// Simplex engine
// ---------------------------------------------------------------------------

enum Phase1Outcome {
    Feasible,
    Infeasible,
    Failure,
}

enum Phase2Outcome {
    Optimal,
    Unbounded,
    Failure,
}

struct Simplex {
    m: usize,
    n_total: usize,
    /// Dense row-major basis inverse.
    binv: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    tol: Tolerances,
    pivots: usize,
    bland: bool,
    bland_switch: usize,
    max_pivots: usize,
}

impl Simplex {
    fn new(std: &Standardized, tol: Tolerances) -> Self {
        let m = std.m;
        let n_total = std.cols.len();
        // Initial basis: slack where available, otherwise the artificial.
        let mut basis = vec![usize::MAX; m];
        let mut in_basis = vec![false; n_total];
        // Find the unit column for each row among slacks and artificials.
        for (j, col) in std.cols.iter().enumerate().skip(std.n_structural) {
            if col.len() == 1 && col[0].1 == 1.0 {
                let row = col[0].0;
                if basis[row] == usize::MAX {
                    basis[row] = j;
                    in_basis[j] = true;
                }
            }
        }
        debug_assert!(basis.iter().all(|&j| j != usize::MAX));
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let work = m + n_total;
        Simplex {
            m,
            n_total,
            binv,
            basis,
            in_basis,
            tol,
            pivots: 0,
            bland: false,
            bland_switch: 10 * work + 2000,
            max_pivots: 40 * work + 20000,
        }
    }

    fn xb(&self, std: &Standardized) -> Vec<f64> {
        let m = self.m;
        let mut xb = vec![0.0; m];
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for k in 0..m {
                acc += row[k] * std.b[k];
            }
            xb[i] = acc;
        }
        xb
    }

    fn duals_for(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for k in 0..m {
                    y[k] += cb * row[k];
                }
            }
        }
        y
    }

    fn direction(&self, std: &Standardized, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(row, v) in &std.cols[j] {
            for i in 0..m {
                w[i] += self.binv[i * m + row] * v;
            }
        }
        w
    }

    fn pivot(&mut self, r: usize, j: usize, w: &[f64]) {
        let m = self.m;
        let wr = w[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        let inv = 1.0 / wr;
        for v in prow.iter_mut() {
            *v *= inv;
        }
        for (i, chunk) in before.chunks_mut(m).enumerate() {
            let f = w[i];
            if f != 0.0 {
                for (a, &p) in chunk.iter_mut().zip(prow.iter()) {
                    *a -= f * p;
                }
            }
        }
        for (off, chunk) in after.chunks_mut(m).enumerate() {
            let f = w[r + 1 + off];
            if f != 0.0 {
                for (a, &p) in chunk.iter_mut().zip(prow.iter()) {
                    *a -= f * p;
                }
            }
        }
        self.in_basis[self.basis[r]] = false;
        self.in_basis[j] = true;
        self.basis[r] = j;
        self.pivots += 1;
        if self.pivots > self.bland_switch {
            self.bland = true;
        }
    }

    /// Core iteration loop. `allowed` filters candidate entering columns.
    fn iterate(
        &mut self,
        std: &Standardized,
        cost: &[f64],
        allowed: impl Fn(usize) -> bool,
    ) -> Phase2Outcome {
        const PIVOT_TOL: f64 = 1e-9;
        loop {
            if self.pivots > self.max_pivots {
                return Phase2Outcome::Failure;
            }
            let y = self.duals_for(cost);
            // Pricing.
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.n_total {
                if self.in_basis[j] || !allowed(j) {
                    continue;
                }
                let mut d = cost[j];
                for &(row, v) in &std.cols[j] {
                    d -= y[row] * v;
                }
                if d < -self.tol.optimality {
                    if self.bland {
                        entering = Some((j, d));
                        break;
                    }
                    match entering {
                        Some((_, best)) if d >= best => {}
                        _ => entering = Some((j, d)),
                    }
                }
            }
            let Some((j, _)) = entering else {
                return Phase2Outcome::Optimal;
            };
            let w = self.direction(std, j);
            let xb = self.xb(std);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if w[i] > PIVOT_TOL {
                    let ratio = (xb[i].max(0.0)) / w[i];
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - PIVOT_TOL
                                || ((ratio - lr).abs() <= PIVOT_TOL
                                    && self.basis[i] < self.basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Phase2Outcome::Unbounded;
            };
            self.pivot(r, j, &w);
        }
    }

    fn phase1(&mut self, std: &Standardized) -> Phase1Outcome {
        if std.first_artificial == std.cols.len() {
            return Phase1Outcome::Feasible; // all-slack start is feasible
        }
        let mut cost = vec![0.0; std.cols.len()];
        for j in std.first_artificial..std.cols.len() {
            cost[j] = 1.0;
        }
        match self.iterate(std, &cost, |_| true) {
            Phase2Outcome::Optimal => {}
            Phase2Outcome::Unbounded => return Phase1Outcome::Failure,
            Phase2Outcome::Failure => return Phase1Outcome::Failure,
        }
        let xb = self.xb(std);
        let mut infeas = 0.0;
        for i in 0..self.m {
            if self.basis[i] >= std.first_artificial {
                infeas += xb[i].max(0.0);
            }
        }
        let scale = 1.0 + std.b.iter().map(|v| v.abs()).sum::<f64>();
        if infeas > self.tol.feasibility.max(1e-9) * scale {
            return Phase1Outcome::Infeasible;
        }
        // Try to drive remaining zero-valued artificials out of the basis.
        for i in 0..self.m {
            if self.basis[i] < std.first_artificial {
                continue;
            }
            let mut replacement = None;
            for j in 0..std.first_artificial {
                if self.in_basis[j] {
                    continue;
                }
                let mut wri = 0.0;
                for &(row, v) in &std.cols[j] {
                    let mi = self.m;
                    wri += self.binv[i * mi + row] * v;
                }
                if wri.abs() > 1e-7 {
                    replacement = Some(j);
                    break;
                }
            }
            if let Some(j) = replacement {
                let w = self.direction(std, j);
                self.pivot(i, j, &w);
            }
            // Otherwise the row is redundant; the artificial stays basic at
            // zero and is barred from moving in phase 2.
        }
        Phase1Outcome::Feasible
    }

    fn phase2(&mut self, std: &Standardized) -> Phase2Outcome {
        let first_artificial = std.first_artificial;
        let outcome = self.iterate(std, &std.cost, |j| j < first_artificial);
        if let Phase2Outcome::Optimal = outcome {
            // Any artificial left in the basis must still be at zero.
            let xb = self.xb(std);
            for i in 0..self.m {
                if self.basis[i] >= first_artificial && xb[i].abs() > 1e-6 {
                    return Phase2Outcome::Failure;
                }
            }
        }
        outcome
    }

    fn primal_values(&self, std: &Standardized) -> Vec<f64> {
        let xb = self.xb(std);
        let mut w = vec![0.0; std.n_structural];
        for i in 0..self.m {
            let j = self.basis[i];
            if j < std.n_structural {
                w[j] = xb[i].max(0.0);
            }
        }
        w
    }

    fn dual_values(&self, std: &Standardized) -> Vec<f64> {
        self.duals_for(&std.cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn solve(lp: &LinearProgram) -> LpSolution {
        solve_lp(lp, Tolerances::default())
    }

    #[test]
    fn single_bound() {
        // minimize x s.t. x >= 1
        let mut lp = LinearProgram::new(1);
        lp.set_objective(0, 1.0);
        lp.add_constraint(vec![(0, 1.0)], Relation::Ge, 1.0);
        let sol = solve(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 1.0, max_relative = 1e-9);
        assert_relative_eq!(sol.objective, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn face_optimum() {
        // minimize x+y s.t. x+y >= 2, x <= 0.5. Objective 2 on the face.
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 2.0);
        lp.set_upper_bound(0, 0.5);
        let sol = solve(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.objective, 2.0, max_relative = 1e-9);
        assert!(sol.x[0] <= 0.5 + 1e-9);
        assert_relative_eq!(sol.x[0] + sol.x[1], 2.0, max_relative = 1e-9);
    }

    #[test]
    fn contradictory_bounds() {
        // x <= -1 with x >= 0
        let mut lp = LinearProgram::new(1);
        lp.set_objective(0, 1.0);
        lp.add_constraint(vec![(0, 1.0)], Relation::Le, -1.0);
        let sol = solve(&lp);
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_below() {
        // minimize -x with only x >= 0
        let mut lp = LinearProgram::new(1);
        lp.set_objective(0, -1.0);
        let sol = solve(&lp);
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_duals() {
        // minimize 2x+3y s.t. x+y = 4, x <= 3
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 2.0);
        lp.set_objective(1, 3.0);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 4.0);
        lp.set_upper_bound(0, 3.0);
        let sol = solve(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 3.0, epsilon = 1e-8);
        assert_relative_eq!(sol.x[1], 1.0, epsilon = 1e-8);
        assert_relative_eq!(sol.objective, 9.0, max_relative = 1e-9);
        // Weak duality.
        let dual = sol.dual_objective.unwrap();
        assert!(dual <= sol.objective + 1e-6 * sol.objective.abs().max(1.0));
        assert_relative_eq!(dual, sol.objective, max_relative = 1e-6);
    }

    #[test]
    fn nonzero_lower_bounds() {
        // minimize x+y with x >= 2, y >= 3, x + y >= 6
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.set_lower_bound(0, 2.0);
        lp.set_lower_bound(1, 3.0);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 6.0);
        let sol = solve(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.objective, 6.0, max_relative = 1e-9);
    }

    #[test]
    fn badly_scaled_data() {
        // Same LP at wildly different row scales still solves cleanly.
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1e6);
        lp.add_constraint(vec![(0, 1e-6), (1, 1.0)], Relation::Ge, 2.0);
        lp.add_constraint(vec![(0, 1.0), (1, 1e6)], Relation::Le, 4e6);
        let sol = solve(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        // Optimum: y = 2 - 1e-6 x; cost x + 1e6(2 - 1e-6 x) = 2e6 constant,
        // so any feasible point on the first face is optimal.
        assert_relative_eq!(sol.objective, 2e6, max_relative = 1e-6);
    }

    #[test]
    fn permuted_problem_same_objective() {
        // Row/column permutations must not change the optimal objective.
        let mut lp = LinearProgram::new(3);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 2.0);
        lp.set_objective(2, 0.5);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 3.0);
        lp.add_constraint(vec![(1, 1.0), (2, 1.0)], Relation::Ge, 2.0);
        lp.add_constraint(vec![(0, 1.0), (2, 2.0)], Relation::Le, 10.0);
        let base = solve(&lp);
        assert_eq!(base.status, LpStatus::Optimal);

        // Permute variables (0,1,2) -> (2,0,1) and rows reversed.
        let perm = [2usize, 0, 1];
        let mut lp2 = LinearProgram::new(3);
        for (old, &new) in perm.iter().enumerate() {
            lp2.set_objective(new, lp.objective[old]);
        }
        for c in lp.constraints.iter().rev() {
            let coeffs: Vec<(usize, f64)> = c.coeffs.iter().map(|&(j, a)| (perm[j], a)).collect();
            lp2.add_constraint(coeffs, c.relation, c.rhs);
        }
        let permuted = solve(&lp2);
        assert_eq!(permuted.status, LpStatus::Optimal);
        assert_relative_eq!(base.objective, permuted.objective, max_relative = 1e-8);
    }

    #[test]
    fn degenerate_lp_terminates() {
        // Heavily degenerate: many redundant rows through the same vertex.
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, -1.0);
        lp.set_objective(1, -1.0);
        for _ in 0..6 {
            lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Le, 1.0);
        }
        lp.add_constraint(vec![(0, 1.0)], Relation::Le, 1.0);
        lp.add_constraint(vec![(1, 1.0)], Relation::Le, 1.0);
        let sol = solve(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.objective, -1.0, max_relative = 1e-9);
    }

    #[test]
    fn dump_is_readable() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.add_constraint(vec![(0, 1.0), (1, -2.0)], Relation::Le, 3.0);
        let text = lp.dump();
        assert!(text.contains("minimize"));
        assert!(text.contains("<= 3"));
    }
}

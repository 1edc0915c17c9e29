//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! This is the general-purpose solver: it handles support-function LPs for
//! H-polytopes and small bounded-Lipschitz instances, and serves as the
//! independent route against which the transport solver is checked.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const FEAS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Maximize `objective . x` subject to the constraints and per-variable
/// bounds (infinite bounds allowed).
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Dual value per original constraint.
    pub duals: Vec<f64>,
    /// Basic columns of the internal standard form.
    pub basis: Vec<usize>,
    pub pivots: usize,
    /// |primal - dual| objective of the standard-form problem.
    pub duality_gap: f64,
    /// Largest violation of a constraint or bound by `x`.
    pub max_violation: f64,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    /// CPLEX-style LP text, for cross-checking with external solvers.
    pub fn to_lp_format(&self) -> String {
        let term = |out: &mut String, coeffs: &[f64]| {
            let mut first = true;
            for (j, &a) in coeffs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let sign = if a < 0.0 {
                    if first {
                        "-"
                    } else {
                        " -"
                    }
                } else if first {
                    ""
                } else {
                    " +"
                };
                let _ = write!(out, "{sign} {:?} x{}", a.abs(), j + 1);
                first = false;
            }
            if first {
                out.push_str(" 0 x1");
            }
        };
        let mut out = String::from("\\ generated by supmeas\nMaximize\n obj:");
        term(&mut out, &self.objective);
        out.push_str("\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{}:", i + 1);
            term(&mut out, &c.coeffs);
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let _ = writeln!(out, " {rel} {:?}", c.rhs);
        }
        out.push_str("Bounds\n");
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            let v = j + 1;
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => {
                    let _ = writeln!(out, " {lo:?} <= x{v} <= {hi:?}");
                }
                (true, false) => {
                    let _ = writeln!(out, " x{v} >= {lo:?}");
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= x{v} <= {hi:?}");
                }
                (false, false) => {
                    let _ = writeln!(out, " x{v} free");
                }
            }
        }
        out.push_str("End\n");
        out
    }

    fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (&xj, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - xj).max(xj - hi);
        }
        worst
    }
}

/// How an original variable is expressed through nonnegative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + col
    Shift { col: usize, offset: f64 },
    /// x = offset - col
    Mirror { col: usize, offset: f64 },
    /// x = pos - neg
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    c_offset: f64,
    maps: Vec<VarMap>,
    /// Sign applied to each original row (rows flipped to make b >= 0).
    row_sign: Vec<f64>,
    /// Number of rows coming from original constraints (rest are bound rows).
    orig_rows: usize,
    /// Column usable as an initial basic variable for each row, if any.
    slack_basis: Vec<Option<usize>>,
}

fn standardize(p: &LpProblem) -> StandardForm {
    let mut ncols = 0usize;
    let mut maps = Vec::with_capacity(p.num_vars());
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &p.bounds {
        let m = if lo.is_finite() {
            let col = ncols;
            ncols += 1;
            if hi.is_finite() {
                bound_rows.push((col, hi - lo));
            }
            VarMap::Shift { col, offset: lo }
        } else if hi.is_finite() {
            let col = ncols;
            ncols += 1;
            VarMap::Mirror { col, offset: hi }
        } else {
            ncols += 2;
            VarMap::Split {
                pos: ncols - 2,
                neg: ncols - 1,
            }
        };
        maps.push(m);
    }

    // rows in terms of structural columns
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for con in &p.constraints {
        let mut row = vec![0.0; ncols];
        let mut rhs = con.rhs;
        for (j, &a) in con.coeffs.iter().enumerate() {
            match maps[j] {
                VarMap::Shift { col, offset } => {
                    row[col] += a;
                    rhs -= a * offset;
                }
                VarMap::Mirror { col, offset } => {
                    row[col] -= a;
                    rhs -= a * offset;
                }
                VarMap::Split { pos, neg } => {
                    row[pos] += a;
                    row[neg] -= a;
                }
            }
        }
        rows.push((row, con.relation, rhs));
    }
    let orig_rows = rows.len();
    for &(col, ub) in &bound_rows {
        let mut row = vec![0.0; ncols];
        row[col] = 1.0;
        rows.push((row, Relation::Le, ub));
    }

    let mut c = vec![0.0; ncols];
    let mut c_offset = 0.0;
    for (j, &cj) in p.objective.iter().enumerate() {
        match maps[j] {
            VarMap::Shift { col, offset } => {
                c[col] += cj;
                c_offset += cj * offset;
            }
            VarMap::Mirror { col, offset } => {
                c[col] -= cj;
                c_offset += cj * offset;
            }
            VarMap::Split { pos, neg } => {
                c[pos] += cj;
                c[neg] -= cj;
            }
        }
    }

    // slack / surplus columns
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let total = ncols + n_slack;
    let mut a = Vec::with_capacity(rows.len());
    let mut b = Vec::with_capacity(rows.len());
    let mut row_sign = Vec::with_capacity(rows.len());
    let mut slack_basis = Vec::with_capacity(rows.len());
    let mut next_slack = ncols;
    for (row, rel, rhs) in rows {
        let mut full = row;
        full.resize(total, 0.0);
        let mut slack = None;
        match rel {
            Relation::Le => {
                full[next_slack] = 1.0;
                slack = Some(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                full[next_slack] = -1.0;
                slack = Some(next_slack);
                next_slack += 1;
            }
            Relation::Eq => {}
        }
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        if sign < 0.0 {
            full.iter_mut().for_each(|v| *v = -*v);
        }
        let usable = slack.filter(|&s| full[s] > 0.0);
        a.push(full);
        b.push(rhs * sign);
        row_sign.push(sign);
        slack_basis.push(usable);
    }
    c.resize(total, 0.0);
    StandardForm {
        a,
        b,
        c,
        c_offset,
        maps,
        row_sign,
        orig_rows,
        slack_basis,
    }
}

struct Tableau {
    /// m rows of (columns..., rhs)
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let pv = self.t[r][col];
        for v in self.t[r].iter_mut() {
            *v /= pv;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
        self.pivots += 1;
    }

    /// Maximize `cost . x` over the columns allowed by `allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<()> {
        let rhs = self.ncols;
        loop {
            if self.pivots > self.max_pivots {
                return Err(Error::SolverStall {
                    pivots: self.pivots,
                });
            }
            // reduced costs d_j = c_j - c_B B^-1 A_j; Bland: first improving column
            let mut entering = None;
            for j in 0..self.ncols {
                if !allowed(j) || self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for (i, row) in self.t.iter().enumerate() {
                    d -= cost[self.basis[i]] * row[j];
                }
                if d > FEAS_EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(());
            };
            // ratio test, ties broken by smallest basic index (Bland)
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[col];
                if a > PIVOT_EPS {
                    let ratio = row[rhs] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12
                                || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(r, col);
        }
    }
}

/// Solve `problem` to optimality, returning a basic optimal solution.
pub fn lp_solve(problem: &LpProblem) -> Result<LpSolution> {
    for c in &problem.constraints {
        if c.coeffs.len() != problem.num_vars() {
            return Err(Error::DimensionMismatch {
                expected: problem.num_vars(),
                got: c.coeffs.len(),
            });
        }
    }
    let sf = standardize(problem);
    let m = sf.a.len();
    let nstruct = sf.c.len();

    // artificial columns for rows lacking a usable slack
    let art_rows: Vec<usize> = (0..m).filter(|&i| sf.slack_basis[i].is_none()).collect();
    let ncols = nstruct + art_rows.len();
    let mut t = Vec::with_capacity(m);
    let mut basis = vec![0usize; m];
    for i in 0..m {
        let mut row = sf.a[i].clone();
        row.resize(ncols + 1, 0.0);
        row[ncols] = sf.b[i];
        t.push(row);
        if let Some(s) = sf.slack_basis[i] {
            basis[i] = s;
        }
    }
    for (k, &i) in art_rows.iter().enumerate() {
        t[i][nstruct + k] = 1.0;
        basis[i] = nstruct + k;
    }
    let mut tab = Tableau {
        t,
        basis,
        ncols,
        pivots: 0,
        max_pivots: 50 * (m + ncols) + 10_000,
    };

    if !art_rows.is_empty() {
        let mut phase1 = vec![0.0; ncols];
        for k in 0..art_rows.len() {
            phase1[nstruct + k] = -1.0;
        }
        tab.optimize(&phase1, &|_| true)?;
        let infeas: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= nstruct)
            .map(|i| tab.t[i][ncols])
            .sum();
        let scale = 1.0 + sf.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if infeas > 1e-8 * scale {
            return Err(Error::Infeasible);
        }
        // drive remaining zero-level artificials out of the basis
        for i in 0..m {
            if tab.basis[i] >= nstruct {
                if let Some(j) = (0..nstruct).find(|&j| tab.t[i][j].abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }
    }
    let mut cost = sf.c.clone();
    cost.resize(ncols, 0.0);
    tab.optimize(&cost, &|j| j < nstruct)?;

    let mut y = vec![0.0; nstruct];
    for i in 0..m {
        if tab.basis[i] < nstruct {
            y[tab.basis[i]] = tab.t[i][ncols];
        }
    }
    let primal_std: f64 = sf.c.iter().zip(&y).map(|(c, v)| c * v).sum();

    // duals from B^T w = c_B on the standard form, skipping redundant rows
    let live: Vec<usize> = (0..m).filter(|&i| tab.basis[i] < nstruct).collect();
    let mut w_std = vec![0.0; m];
    if !live.is_empty() {
        let k = live.len();
        // rows of the standard form restricted to `live` rows may not span;
        // solve the least-squares system over all rows instead.
        let bt = DMatrix::from_fn(k, m, |r, i| sf.a[i][tab.basis[live[r]]]);
        let cb = DVector::from_fn(k, |r, _| sf.c[tab.basis[live[r]]]);
        let svd = bt.svd(true, true);
        if let Ok(sol) = svd.solve(&cb, 1e-12) {
            w_std = sol.iter().copied().collect();
        }
    }
    let dual_std: f64 = sf.b.iter().zip(&w_std).map(|(b, w)| b * w).sum();

    let mut x = vec![0.0; problem.num_vars()];
    for (j, m) in sf.maps.iter().enumerate() {
        x[j] = match *m {
            VarMap::Shift { col, offset } => offset + y[col],
            VarMap::Mirror { col, offset } => offset - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        };
    }
    let objective: f64 = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let duals = (0..sf.orig_rows)
        .map(|i| w_std[i] * sf.row_sign[i])
        .collect();
    let _ = sf.c_offset;
    Ok(LpSolution {
        status: LpStatus::Optimal,
        max_violation: problem.max_violation(&x),
        x,
        objective,
        duals,
        basis: tab.basis.clone(),
        pivots: tab.pivots,
        duality_gap: (primal_std - dual_std).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_bounded_variable() {
        let mut p = LpProblem::new(vec![1.0]);
        p.bounds[0] = (0.0, 1.0);
        let s = lp_solve(&p).unwrap();
        assert_abs_diff_eq!(s.objective, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_objective_gives_zero() {
        let mut p = LpProblem::new(vec![0.0, 0.0]);
        p.bounds = vec![(-1.0, 1.0); 2];
        p.add(vec![1.0, -1.0], Relation::Le, 0.5);
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn textbook_problem_with_duals() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut p = LpProblem::new(vec![3.0, 5.0]);
        p.add(vec![1.0, 0.0], Relation::Le, 4.0);
        p.add(vec![0.0, 2.0], Relation::Le, 12.0);
        p.add(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp_solve(&p).unwrap();
        assert_abs_diff_eq!(s.objective, 36.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[1], 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.duals[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.duals[1], 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(s.duals[2], 1.0, epsilon = 1e-9);
        assert!(s.duality_gap < 1e-9);
    }

    #[test]
    fn free_variables_and_equalities() {
        // max -|x| style: max -t, t >= x, t >= -x, x = -2.5, x free
        let mut p = LpProblem::new(vec![0.0, -1.0]);
        p.bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); 2];
        p.add(vec![1.0, -1.0], Relation::Le, 0.0);
        p.add(vec![-1.0, -1.0], Relation::Le, 0.0);
        p.add(vec![1.0, 0.0], Relation::Eq, -2.5);
        let s = lp_solve(&p).unwrap();
        assert_abs_diff_eq!(s.objective, -2.5, epsilon = 1e-9);
        assert!(s.max_violation < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut p = LpProblem::new(vec![1.0]);
        p.add(vec![1.0], Relation::Ge, 2.0);
        p.add(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(lp_solve(&p), Err(Error::Infeasible)));
        let q = LpProblem::new(vec![1.0]);
        assert!(matches!(lp_solve(&q), Err(Error::Unbounded)));
    }

    #[test]
    fn lp_text_lists_every_row() {
        let mut p = LpProblem::new(vec![1.0, -2.0]);
        p.bounds = vec![(-1.0, 1.0), (f64::NEG_INFINITY, f64::INFINITY)];
        p.add(vec![1.0, 1.0], Relation::Le, 0.5);
        let txt = p.to_lp_format();
        assert!(txt.contains("Maximize"));
        assert!(txt.contains(" c1: 1.0 x1 + 1.0 x2 <= 0.5"));
        assert!(txt.contains("x2 free"));
        assert!(txt.ends_with("End\n"));
    }
}

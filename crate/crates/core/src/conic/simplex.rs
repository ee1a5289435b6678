//! Dense two-phase primal simplex for SOC-free problems.
//!
//! Intended for small instances (a few hundred rows): test oracles and
//! cross-checks of the interior-point backend on pure LPs.

use super::problem::ConicProblem;
use super::solve::{ConicBackend, Diagnostics, SolveResult, SolveStatus, Tolerances};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct DenseSimplex {
    pub max_pivots: usize,
    pub pivot_tol: f64,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        Self {
            max_pivots: 100_000,
            pivot_tol: 1e-10,
        }
    }
}

/// `x_j = offset + Σ coeff * z_col` over nonnegative standard-form columns.
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct StandardForm {
    /// Row-major `m x n` coefficients.
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Column that can start basic in each row (a slack with +1), if any.
    slack_of_row: Vec<Option<usize>>,
    maps: Vec<VarMap>,
}

fn to_standard_form(problem: &ConicProblem) -> StandardForm {
    let mut ncols = 0;
    let mut maps = Vec::with_capacity(problem.num_variables());
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for v in problem.variables() {
        let map = if v.lower.is_finite() {
            let col = ncols;
            ncols += 1;
            if v.upper.is_finite() {
                bound_rows.push((col, v.upper - v.lower));
            }
            VarMap {
                offset: v.lower,
                cols: vec![(col, 1.0)],
            }
        } else if v.upper.is_finite() {
            let col = ncols;
            ncols += 1;
            VarMap {
                offset: v.upper,
                cols: vec![(col, -1.0)],
            }
        } else {
            let col = ncols;
            ncols += 2;
            VarMap {
                offset: 0.0,
                cols: vec![(col, 1.0), (col + 1, -1.0)],
            }
        };
        maps.push(map);
    }

    // Each entry: (coefficients over structural columns, rhs, has_slack)
    let mut rows: Vec<(Vec<(usize, f64)>, f64, bool)> = Vec::new();
    let push_expr = |expr: &super::LinExpr, slack: bool, rows: &mut Vec<_>| {
        let mut coeffs = Vec::new();
        let mut rhs = -expr.constant_term();
        for &(v, a) in expr.terms() {
            let m = &maps[v.index()];
            rhs -= a * m.offset;
            for &(col, k) in &m.cols {
                coeffs.push((col, a * k));
            }
        }
        rows.push((coeffs, rhs, slack));
    };
    for c in problem.equalities() {
        push_expr(&c.expr, false, &mut rows);
    }
    for c in problem.inequalities() {
        push_expr(&c.expr, true, &mut rows);
    }
    for (col, ub) in bound_rows {
        rows.push((vec![(col, 1.0)], ub, true));
    }

    let n_slack = rows.iter().filter(|r| r.2).count();
    let n = ncols + n_slack;
    let m = rows.len();
    let mut a = vec![vec![0.0; n]; m];
    let mut b = vec![0.0; m];
    let mut slack_of_row = vec![None; m];
    let mut next_slack = ncols;
    for (i, (coeffs, rhs, slack)) in rows.into_iter().enumerate() {
        for (col, k) in coeffs {
            a[i][col] += k;
        }
        let mut slack_col = None;
        if slack {
            a[i][next_slack] = 1.0;
            slack_col = Some(next_slack);
            next_slack += 1;
        }
        b[i] = rhs;
        if rhs < 0.0 {
            a[i].iter_mut().for_each(|v| *v = -*v);
            b[i] = -rhs;
            slack_col = None;
        }
        slack_of_row[i] = slack_col;
    }

    let mut c = vec![0.0; n];
    for &(v, k) in problem.objective().terms() {
        for &(col, s) in &maps[v.index()].cols {
            c[col] += k * s;
        }
    }
    StandardForm {
        a,
        b,
        c,
        slack_of_row,
        maps,
    }
}

enum Phase {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
    pivot_tol: f64,
}

impl Tableau {
    fn pivot(&mut self, r: usize, e: usize) {
        let p = self.rows[r][e];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][e];
            if f != 0.0 {
                for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.rows[i][e] = 0.0;
                self.rhs[i] -= f * pivot_rhs;
                if self.rhs[i] < 0.0 && self.rhs[i] > -1e-12 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        self.basis[r] = e;
        self.pivots += 1;
    }

    fn run(&mut self, cost: &[f64], allowed: &[bool], tol: f64, max_pivots: usize) -> Phase {
        let n = cost.len();
        let mut degenerate_streak = 0usize;
        loop {
            if self.pivots >= max_pivots {
                return Phase::IterationLimit;
            }
            let mut reduced = cost.to_vec();
            for (i, &bi) in self.basis.iter().enumerate() {
                let cb = cost[bi];
                if cb != 0.0 {
                    for (d, a) in reduced.iter_mut().zip(&self.rows[i]) {
                        *d -= cb * a;
                    }
                }
            }
            let bland = degenerate_streak > 50;
            let mut entering = None;
            let mut best = -tol;
            for j in 0..n {
                if !allowed[j] || reduced[j] >= -tol {
                    continue;
                }
                if bland {
                    entering = Some(j);
                    break;
                }
                if reduced[j] < best {
                    best = reduced[j];
                    entering = Some(j);
                }
            }
            let Some(e) = entering else {
                return Phase::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][e];
                if a > self.pivot_tol {
                    let ratio = self.rhs[i] / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12
                                || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Phase::Unbounded;
            };
            if ratio.abs() < 1e-12 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(r, e);
        }
    }
}

impl ConicBackend for DenseSimplex {
    fn name(&self) -> &'static str {
        "dense-simplex"
    }

    fn supports_cones(&self) -> bool {
        false
    }

    fn solve_sealed(&self, problem: &ConicProblem, tol: &Tolerances) -> Result<SolveResult> {
        let sf = to_standard_form(problem);
        let m = sf.b.len();
        let n = sf.c.len();

        // Artificial columns for rows without a usable slack.
        let art_rows: Vec<usize> = (0..m).filter(|&i| sf.slack_of_row[i].is_none()).collect();
        let total = n + art_rows.len();
        let mut rows: Vec<Vec<f64>> = sf
            .a
            .into_iter()
            .map(|mut r| {
                r.resize(total, 0.0);
                r
            })
            .collect();
        let mut basis = vec![0; m];
        for (i, s) in sf.slack_of_row.iter().enumerate() {
            if let Some(col) = s {
                basis[i] = *col;
            }
        }
        for (k, &i) in art_rows.iter().enumerate() {
            rows[i][n + k] = 1.0;
            basis[i] = n + k;
        }
        let mut tab = Tableau {
            rows,
            rhs: sf.b,
            basis,
            pivots: 0,
            pivot_tol: self.pivot_tol,
        };
        let diag = |status: &str, pivots: usize| Diagnostics {
            backend: self.name().to_string(),
            iterations: pivots as u32,
            message: Some(status.to_string()),
            ..Default::default()
        };

        let opt_tol = (tol.obj * 0.1).max(1e-10);
        if !art_rows.is_empty() {
            let mut cost1 = vec![0.0; total];
            cost1[n..].iter_mut().for_each(|c| *c = 1.0);
            let allowed = vec![true; total];
            match tab.run(&cost1, &allowed, opt_tol, self.max_pivots) {
                Phase::Optimal => {}
                Phase::Unbounded | Phase::IterationLimit => {
                    return Ok(SolveResult::failed(
                        SolveStatus::NumericalFailure,
                        diag("phase one did not converge", tab.pivots),
                    ))
                }
            }
            let infeas: f64 = tab
                .basis
                .iter()
                .zip(&tab.rhs)
                .filter(|(&b, _)| b >= n)
                .map(|(_, &v)| v)
                .sum();
            let scale = 1.0 + tab.rhs.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
            if infeas > tol.feas * scale {
                return Ok(SolveResult::failed(
                    SolveStatus::Infeasible,
                    diag("phase one optimum is positive", tab.pivots),
                ));
            }
            // Drive remaining artificials out of the basis; drop redundant rows.
            let mut i = 0;
            while i < tab.rows.len() {
                if tab.basis[i] >= n {
                    let col = (0..n)
                        .filter(|&j| tab.rows[i][j].abs() > 1e-9)
                        .max_by(|&a, &b| {
                            tab.rows[i][a].abs().total_cmp(&tab.rows[i][b].abs())
                        });
                    match col {
                        Some(j) => tab.pivot(i, j),
                        None => {
                            tab.rows.remove(i);
                            tab.rhs.remove(i);
                            tab.basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }

        let mut cost2 = sf.c.clone();
        cost2.resize(total, 0.0);
        let mut allowed = vec![true; total];
        allowed[n..].iter_mut().for_each(|a| *a = false);
        match tab.run(&cost2, &allowed, opt_tol, self.max_pivots) {
            Phase::Optimal => {}
            Phase::Unbounded => {
                return Ok(SolveResult::failed(
                    SolveStatus::Unbounded,
                    diag("unbounded ray found", tab.pivots),
                ))
            }
            Phase::IterationLimit => {
                return Ok(SolveResult::failed(
                    SolveStatus::NumericalFailure,
                    diag("pivot limit reached", tab.pivots),
                ))
            }
        }

        let mut z = vec![0.0; total];
        for (i, &b) in tab.basis.iter().enumerate() {
            z[b] = tab.rhs[i];
        }
        let x: Vec<f64> = sf
            .maps
            .iter()
            .map(|m| m.offset + m.cols.iter().map(|&(c, k)| k * z[c]).sum::<f64>())
            .collect();
        let objective = problem.objective().eval(&x);
        Ok(SolveResult {
            status: SolveStatus::Optimal,
            primal: Some(x),
            objective: Some(objective),
            diagnostics: diag("optimal", tab.pivots),
        })
    }
}

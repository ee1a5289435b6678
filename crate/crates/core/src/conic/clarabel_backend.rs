use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::expr::LinExpr;
use super::problem::ConicProblem;
use super::solve::{ConicBackend, Diagnostics, SolveResult, SolveStatus, Tolerances};
use crate::error::{AlmError, Result};

/// Interior-point backend built on the `clarabel` crate.
#[derive(Clone, Debug)]
pub struct ClarabelBackend {
    pub max_iter: u32,
    /// Factor applied to the requested tolerances before handing them to the solver.
    pub tighten: f64,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self {
            max_iter: 400,
            tighten: 0.1,
        }
    }
}

/// Column-oriented accumulator for `A` in `Ax + s = b, s ∈ K`.
struct RowBuilder {
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl RowBuilder {
    fn new(n: usize) -> Self {
        Self {
            cols: vec![Vec::new(); n],
            rhs: Vec::new(),
        }
    }

    /// Adds the row `s = rhs - a·x` where `a` and `rhs` come from `sign * expr`
    /// read as `a·x + c` with slack `s = -(a·x + c)`.
    fn push(&mut self, expr: &LinExpr, sign: f64) {
        let row = self.rhs.len();
        for &(v, c) in expr.terms() {
            self.cols[v.index()].push((row, sign * c));
        }
        self.rhs.push(-sign * expr.constant_term());
    }

    fn build(self) -> (CscMatrix<f64>, Vec<f64>) {
        let m = self.rhs.len();
        let n = self.cols.len();
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        colptr.push(0);
        for mut col in self.cols {
            col.sort_by_key(|&(r, _)| r);
            for (r, v) in col {
                rowval.push(r);
                nzval.push(v);
            }
            colptr.push(rowval.len());
        }
        (CscMatrix::new(m, n, colptr, rowval, nzval), self.rhs)
    }
}

impl ConicBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn supports_cones(&self) -> bool {
        true
    }

    fn solve_sealed(&self, problem: &ConicProblem, tol: &Tolerances) -> Result<SolveResult> {
        let n = problem.num_variables();
        let mut rows = RowBuilder::new(n);
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

        // a·x + c = 0  ->  s = -(a·x + c) ∈ {0}
        for c in problem.equalities() {
            rows.push(&c.expr, 1.0);
        }
        if !problem.equalities().is_empty() {
            cones.push(SupportedConeT::ZeroConeT(problem.equalities().len()));
        }

        let mut nonneg = 0;
        for c in problem.inequalities() {
            rows.push(&c.expr, 1.0);
            nonneg += 1;
        }
        for (i, v) in problem.variables().iter().enumerate() {
            let id = super::VarId(i);
            if v.lower.is_finite() {
                // lower - x <= 0
                rows.push(&(LinExpr::constant(v.lower) - id), 1.0);
                nonneg += 1;
            }
            if v.upper.is_finite() {
                rows.push(&(LinExpr::from(id) - v.upper), 1.0);
                nonneg += 1;
            }
        }
        if nonneg > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(nonneg));
        }

        for soc in problem.socs() {
            // s = (t, v) ∈ SOC with s = b - A x, i.e. rows for -t and -v_i.
            rows.push(&soc.bound, -1.0);
            for e in &soc.cone {
                rows.push(e, -1.0);
            }
            cones.push(SupportedConeT::SecondOrderConeT(soc.cone.len() + 1));
        }

        let (a, b) = rows.build();
        let mut q = vec![0.0; n];
        for &(v, c) in problem.objective().terms() {
            q[v.index()] += c;
        }
        let p = CscMatrix::zeros((n, n));

        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_feas(tol.feas * self.tighten)
            .tol_gap_abs(tol.obj * self.tighten)
            .tol_gap_rel(tol.obj * self.tighten)
            .tol_ktratio(1e-8)
            .max_threads(1)
            .build()
            .map_err(|e| AlmError::invalid(format!("clarabel settings: {e:?}")))?;

        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| AlmError::invalid(format!("clarabel setup: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;

        let diagnostics = Diagnostics {
            backend: self.name().to_string(),
            iterations: sol.iterations,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
            residuals: None,
            message: Some(format!("{:?}", sol.status)),
        };

        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::Unbounded
            }
            _ => SolveStatus::NumericalFailure,
        };
        if status != SolveStatus::Optimal {
            return Ok(SolveResult::failed(status, diagnostics));
        }
        let x = sol.x.clone();
        let objective = problem.objective().eval(&x);
        Ok(SolveResult {
            status,
            primal: Some(x),
            objective: Some(objective),
            diagnostics,
        })
    }
}

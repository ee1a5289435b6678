use serde::{Deserialize, Serialize};

use super::check::{check_solution, ResidualReport};
use super::clarabel_backend::ClarabelBackend;
use super::problem::ConicProblem;
use crate::error::{AlmError, Result};

/// Feasibility and objective tolerances requested from a backend.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub feas: f64,
    pub obj: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas: 1e-8,
            obj: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical-failure",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub backend: String,
    pub iterations: u32,
    /// Backend-reported residuals (scaled, backend-specific).
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Independently recomputed residuals of the returned point, when one exists.
    pub residuals: Option<ResidualReport>,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Present iff `status == Optimal`.
    pub primal: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl SolveResult {
    pub fn failed(status: SolveStatus, diagnostics: Diagnostics) -> Self {
        debug_assert_ne!(status, SolveStatus::Optimal);
        Self {
            status,
            primal: None,
            objective: None,
            diagnostics,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, var: super::VarId) -> Option<f64> {
        self.primal.as_ref().map(|p| p[var.index()])
    }

    pub fn eval(&self, expr: &super::LinExpr) -> Option<f64> {
        self.primal.as_ref().map(|p| expr.eval(p))
    }
}

/// A solver backend. Implementations must never report `Optimal` for a point
/// that fails [`check_solution`] at ten times the requested feasibility tolerance.
pub trait ConicBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn supports_cones(&self) -> bool;

    fn solve_sealed(&self, problem: &ConicProblem, tol: &Tolerances) -> Result<SolveResult>;

    fn solve(&self, problem: &ConicProblem, tol: &Tolerances) -> Result<SolveResult> {
        if !problem.is_sealed() {
            return Err(AlmError::NotSealed);
        }
        if problem.has_cones() && !self.supports_cones() {
            return Err(AlmError::Unsupported {
                backend: self.name(),
                feature: "second-order cones",
            });
        }
        let mut result = self.solve_sealed(problem, tol)?;
        if let Some(point) = &result.primal {
            let report = check_solution(problem, point);
            if report.max_violation() > 10.0 * tol.feas {
                log::warn!(
                    "{}: optimal point violates constraints by {:.3e}",
                    self.name(),
                    report.max_violation()
                );
                result = SolveResult::failed(
                    SolveStatus::NumericalFailure,
                    Diagnostics {
                        message: Some(format!(
                            "returned point violates `{}` by {:.3e}",
                            report.worst_label().unwrap_or("?"),
                            report.max_violation()
                        )),
                        residuals: Some(report),
                        ..result.diagnostics
                    },
                );
            } else {
                result.diagnostics.residuals = Some(report);
            }
        }
        Ok(result)
    }
}

/// Solves with the default conic backend.
pub fn solve(problem: &ConicProblem, tol: &Tolerances) -> Result<SolveResult> {
    ClarabelBackend::default().solve(problem, tol)
}

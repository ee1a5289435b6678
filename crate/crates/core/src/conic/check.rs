use serde::{Deserialize, Serialize};

use super::problem::ConicProblem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedResidual {
    pub label: String,
    pub amount: f64,
}

/// Residuals of a candidate point, recomputed from the problem data alone.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_equality: f64,
    pub max_inequality: f64,
    pub max_soc: f64,
    pub max_bound: f64,
    pub objective: f64,
    /// Every row whose violation exceeds the tolerance passed to [`check_solution_tol`].
    pub violations: Vec<NamedResidual>,
    worst: Option<String>,
}

impl ResidualReport {
    pub fn max_violation(&self) -> f64 {
        self.max_equality
            .max(self.max_inequality)
            .max(self.max_soc)
            .max(self.max_bound)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }

    pub fn worst_label(&self) -> Option<&str> {
        self.worst.as_deref()
    }
}

/// Residuals of `point`, listing nothing as a violation.
pub fn check_solution(problem: &ConicProblem, point: &[f64]) -> ResidualReport {
    check_solution_tol(problem, point, f64::INFINITY)
}

/// Residuals of `point`; rows violated by more than `tol` are listed by label.
///
/// Panics if `point` does not have one entry per variable.
pub fn check_solution_tol(problem: &ConicProblem, point: &[f64], tol: f64) -> ResidualReport {
    assert_eq!(
        point.len(),
        problem.num_variables(),
        "point dimension does not match problem"
    );
    let mut report = ResidualReport {
        objective: problem.objective().eval(point),
        ..Default::default()
    };
    let mut worst = 0.0_f64;
    let mut note = |report: &mut ResidualReport, kind: Kind, label: &str, amount: f64| {
        let slot = match kind {
            Kind::Bound => &mut report.max_bound,
            Kind::Equality => &mut report.max_equality,
            Kind::Inequality => &mut report.max_inequality,
            Kind::Soc => &mut report.max_soc,
        };
        *slot = slot.max(amount);
        if amount > worst {
            worst = amount;
            report.worst = Some(label.to_string());
        }
        if amount > tol {
            report.violations.push(NamedResidual {
                label: label.to_string(),
                amount,
            });
        }
    };

    for (v, &x) in problem.variables().iter().zip(point) {
        let amount = (v.lower - x).max(x - v.upper).max(0.0);
        note(&mut report, Kind::Bound, &format!("bound:{}", v.name), amount);
    }
    for c in problem.equalities() {
        note(&mut report, Kind::Equality, &c.label, c.expr.eval(point).abs());
    }
    for c in problem.inequalities() {
        note(&mut report, Kind::Inequality, &c.label, c.expr.eval(point).max(0.0));
    }
    for c in problem.socs() {
        let norm = c
            .cone
            .iter()
            .map(|e| e.eval(point).powi(2))
            .sum::<f64>()
            .sqrt();
        let amount = (norm - c.bound.eval(point)).max(0.0);
        note(&mut report, Kind::Soc, &c.label, amount);
    }
    report
}

#[derive(Clone, Copy)]
enum Kind {
    Bound,
    Equality,
    Inequality,
    Soc,
}

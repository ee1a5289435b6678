use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::expr::{LinExpr, VarId};
use crate::error::{AlmError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl Variable {
    pub fn is_free(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }
}

/// A labelled linear row. Equalities mean `expr = 0`, inequalities `expr <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub label: String,
    pub expr: LinExpr,
}

/// `‖cone‖₂ <= bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocConstraint {
    pub label: String,
    pub cone: Vec<LinExpr>,
    pub bound: LinExpr,
}

/// Linear objective (always minimized), linear equalities and inequalities and
/// second-order cones over a flat vector of bounded variables.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConicProblem {
    variables: Vec<Variable>,
    objective: LinExpr,
    equalities: Vec<Constraint>,
    inequalities: Vec<Constraint>,
    socs: Vec<SocConstraint>,
    sealed: bool,
    #[serde(skip)]
    by_name: HashMap<String, VarId>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure_open(&self) -> Result<()> {
        if self.sealed {
            Err(AlmError::Sealed)
        } else {
            Ok(())
        }
    }

    fn check_expr(&self, expr: &LinExpr) -> Result<()> {
        if !expr.is_finite() {
            return Err(AlmError::invalid("non-finite coefficient in expression"));
        }
        match expr.max_var() {
            Some(v) if v.0 >= self.variables.len() => Err(AlmError::UnknownVariable(v.0)),
            _ => Ok(()),
        }
    }

    /// Adds a variable with bounds `lower <= v <= upper` (infinite bounds allowed).
    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId> {
        self.ensure_open()?;
        let name = name.into();
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(AlmError::invalid(format!(
                "variable `{name}` has invalid bounds [{lower}, {upper}]"
            )));
        }
        let id = VarId(self.variables.len());
        self.by_name.entry(name.clone()).or_insert(id);
        self.variables.push(Variable { name, lower, upper });
        Ok(id)
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> Result<VarId> {
        self.add_variable(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_nonneg(&mut self, name: impl Into<String>) -> Result<VarId> {
        self.add_variable(name, 0.0, f64::INFINITY)
    }

    pub fn add_nonneg_vec(&mut self, prefix: &str, len: usize) -> Result<Vec<VarId>> {
        (0..len)
            .map(|i| self.add_nonneg(format!("{prefix}[{i}]")))
            .collect()
    }

    /// `expr = 0`.
    pub fn add_equality(&mut self, label: impl Into<String>, expr: LinExpr) -> Result<()> {
        self.ensure_open()?;
        self.check_expr(&expr)?;
        self.equalities.push(Constraint {
            label: label.into(),
            expr: expr.normalized(),
        });
        Ok(())
    }

    /// `expr <= 0`.
    pub fn add_inequality(&mut self, label: impl Into<String>, expr: LinExpr) -> Result<()> {
        self.ensure_open()?;
        self.check_expr(&expr)?;
        self.inequalities.push(Constraint {
            label: label.into(),
            expr: expr.normalized(),
        });
        Ok(())
    }

    /// `lhs <= rhs`.
    pub fn add_le(&mut self, label: impl Into<String>, lhs: LinExpr, rhs: LinExpr) -> Result<()> {
        self.add_inequality(label, lhs - rhs)
    }

    /// `lhs >= rhs`.
    pub fn add_ge(&mut self, label: impl Into<String>, lhs: LinExpr, rhs: LinExpr) -> Result<()> {
        self.add_inequality(label, rhs - lhs)
    }

    /// `lhs = rhs`.
    pub fn add_eq(&mut self, label: impl Into<String>, lhs: LinExpr, rhs: LinExpr) -> Result<()> {
        self.add_equality(label, lhs - rhs)
    }

    /// Registers `‖cone‖₂ <= bound`.
    pub fn add_soc(&mut self, label: impl Into<String>, cone: Vec<LinExpr>, bound: LinExpr) -> Result<()> {
        self.ensure_open()?;
        let label = label.into();
        if cone.is_empty() {
            return Err(AlmError::EmptyCone(label));
        }
        for e in cone.iter().chain(std::iter::once(&bound)) {
            self.check_expr(e)?;
        }
        self.socs.push(SocConstraint {
            label,
            cone: cone.into_iter().map(|e| e.normalized()).collect(),
            bound: bound.normalized(),
        });
        Ok(())
    }

    /// Sets the expression to minimize.
    pub fn minimize(&mut self, objective: LinExpr) -> Result<()> {
        self.ensure_open()?;
        self.check_expr(&objective)?;
        self.objective = objective.normalized();
        Ok(())
    }

    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn sealed(mut self) -> Self {
        self.seal();
        self
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    /// First variable registered under `name`.
    pub fn find_variable(&self, name: &str) -> Option<VarId> {
        if self.by_name.is_empty() && !self.variables.is_empty() {
            return self
                .variables
                .iter()
                .position(|v| v.name == name)
                .map(VarId);
        }
        self.by_name.get(name).copied()
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn equalities(&self) -> &[Constraint] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[Constraint] {
        &self.inequalities
    }

    pub fn socs(&self) -> &[SocConstraint] {
        &self.socs
    }

    pub fn has_cones(&self) -> bool {
        !self.socs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_variable_keeps_bounds() {
        let mut p = ConicProblem::new();
        let y = p.add_variable("y_1", 0.05, 0.10).unwrap();
        assert_eq!(p.variable(y).lower, 0.05);
        assert_eq!(p.variable(y).upper, 0.10);
    }

    #[test]
    fn free_variable_is_unbounded() {
        let mut p = ConicProblem::new();
        let v = p.add_free("v").unwrap();
        assert!(p.variable(v).is_free());
    }

    #[test]
    fn duplicate_names_get_distinct_ids() {
        let mut p = ConicProblem::new();
        let a = p.add_free("x").unwrap();
        let b = p.add_free("x").unwrap();
        assert_ne!(a, b);
        assert_eq!(p.find_variable("x"), Some(a));
    }

    #[test]
    fn sealed_problem_rejects_changes() {
        let mut p = ConicProblem::new();
        p.seal();
        assert!(matches!(p.add_free("x"), Err(AlmError::Sealed)));
        assert!(matches!(p.minimize(LinExpr::zero()), Err(AlmError::Sealed)));
    }

    #[test]
    fn empty_cone_is_rejected() {
        let mut p = ConicProblem::new();
        let t = p.add_free("t").unwrap();
        assert!(matches!(
            p.add_soc("c", vec![], t.into()),
            Err(AlmError::EmptyCone(_))
        ));
    }

    #[test]
    fn bad_bounds_and_unknown_variables() {
        let mut p = ConicProblem::new();
        assert!(p.add_variable("x", 1.0, 0.0).is_err());
        assert!(matches!(
            p.add_equality("e", LinExpr::term(VarId(3), 1.0)),
            Err(AlmError::UnknownVariable(3))
        ));
    }
}

//! Direct solutions of the inner worst-case problems, independent of the dual
//! reformulations used inside the models.

use serde::{Deserialize, Serialize};

use super::ambiguity::{BoxSupport, ProbabilityBox};
use super::blocks::{box_block, wasserstein_block, Sense};
use crate::conic::{solve, ConicBackend, ConicProblem, DenseSimplex, LinExpr, SolveStatus, Tolerances};
use crate::error::{AlmError, Result};

/// Largest scenario count handled by vertex enumeration.
pub const VERTEX_ENUMERATION_LIMIT: usize = 8;

/// Worst case of `Σ_s v_s (p⁰_s + η_s)` over `Σ η = 0, lower <= η <= upper`.
///
/// Returns the optimal value and the optimizing distribution `p⁰ + η`.
/// Exact vertex enumeration for up to [`VERTEX_ENUMERATION_LIMIT`] scenarios,
/// a simplex LP beyond.
pub fn worst_case_inner_box(values: &[f64], set: &ProbabilityBox, sense: Sense) -> Result<(f64, Vec<f64>)> {
    let s_len = values.len();
    if set.nominal.len() != s_len || set.lower.len() != s_len || set.upper.len() != s_len {
        return Err(AlmError::invalid("box bounds and values differ in length"));
    }
    if set.lower.iter().zip(&set.upper).any(|(l, u)| !(*l <= 0.0 && 0.0 <= *u)) {
        return Err(AlmError::invalid("box does not contain the zero perturbation"));
    }
    let sign = match sense {
        Sense::Max => 1.0,
        Sense::Min => -1.0,
    };
    let eta = if s_len <= VERTEX_ENUMERATION_LIMIT {
        enumerate_vertices(values, set, sign)
    } else {
        lp_perturbation(values, set, sign)?
    };
    let dist: Vec<f64> = set.nominal.iter().zip(&eta).map(|(p, e)| p + e).collect();
    let value = values.iter().zip(&dist).map(|(v, p)| v * p).sum();
    Ok((value, dist))
}

/// Every vertex has at most one coordinate strictly inside its bounds.
fn enumerate_vertices(values: &[f64], set: &ProbabilityBox, sign: f64) -> Vec<f64> {
    let s_len = values.len();
    let mut best = vec![0.0; s_len];
    let mut best_val = 0.0;
    let tol = 1e-12;
    for free in 0..s_len {
        let others: Vec<usize> = (0..s_len).filter(|&s| s != free).collect();
        for mask in 0u32..(1u32 << others.len()) {
            let mut eta = vec![0.0; s_len];
            for (b, &s) in others.iter().enumerate() {
                eta[s] = if mask >> b & 1 == 1 { set.upper[s] } else { set.lower[s] };
            }
            eta[free] = -eta.iter().sum::<f64>();
            if eta[free] < set.lower[free] - tol || eta[free] > set.upper[free] + tol {
                continue;
            }
            let val = sign * values.iter().zip(&eta).map(|(v, e)| v * e).sum::<f64>();
            if val > best_val {
                best_val = val;
                best = eta;
            }
        }
    }
    best
}

fn lp_perturbation(values: &[f64], set: &ProbabilityBox, sign: f64) -> Result<Vec<f64>> {
    let mut p = ConicProblem::new();
    let eta: Vec<_> = (0..values.len())
        .map(|s| p.add_variable(format!("eta[{s}]"), set.lower[s], set.upper[s]))
        .collect::<Result<_>>()?;
    p.add_equality("mass", LinExpr::weighted_sum(eta.iter().map(|v| (v, 1.0))))?;
    p.minimize(LinExpr::weighted_sum(eta.iter().zip(values.iter().map(|v| -sign * v))))?;
    let r = DenseSimplex::default().solve(&p.sealed(), &Tolerances::default())?;
    match r.primal {
        Some(x) if r.status == SolveStatus::Optimal => Ok(x),
        _ => Err(AlmError::invalid(format!("box perturbation LP ended {}", r.status))),
    }
}

/// Optimal value of the box dual block alone, for constant scenario values.
pub fn box_block_value(values: &[f64], set: &ProbabilityBox, sense: Sense) -> Result<f64> {
    let mut p = ConicProblem::new();
    let exprs: Vec<LinExpr> = values.iter().map(|v| LinExpr::constant(*v)).collect();
    let bound = box_block(&mut p, "block", &exprs, set, sense)?;
    let objective = match sense {
        Sense::Max => bound.clone(),
        Sense::Min => -bound.clone(),
    };
    p.minimize(objective)?;
    let r = solve(&p.sealed(), &Tolerances::default())?;
    r.eval(&bound)
        .filter(|_| r.is_optimal())
        .ok_or_else(|| AlmError::invalid(format!("box dual block ended {}", r.status)))
}

/// `ξ ↦ slope · ξ + intercept` on the real line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineLoss {
    pub slope: f64,
    pub intercept: f64,
}

impl AffineLoss {
    pub fn eval(&self, xi: f64) -> f64 {
        self.slope * xi + self.intercept
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportBound {
    pub value: f64,
    /// Number of uniform grid intervals on the support.
    pub resolution: usize,
}

/// Supremum of `E_Q[loss]` over distributions within type-1 Wasserstein distance
/// `radius` of the weighted atoms, computed as a transport LP onto the uniform
/// grid of `resolution` intervals on `support` plus the atoms themselves.
pub fn worst_case_inner_wasserstein(
    loss: AffineLoss,
    points: &[f64],
    weights: &[f64],
    radius: f64,
    support: (f64, f64),
    resolution: usize,
) -> Result<TransportBound> {
    let (lo, hi) = support;
    if !(lo <= hi) || resolution == 0 || !(radius >= 0.0) {
        return Err(AlmError::invalid("need lo <= hi, positive resolution, radius >= 0"));
    }
    if points.len() != weights.len() || points.is_empty() {
        return Err(AlmError::invalid("one weight per empirical point required"));
    }
    if let Some(x) = points.iter().find(|x| **x < lo || **x > hi) {
        return Err(AlmError::invalid(format!("point {x} outside support [{lo}, {hi}]")));
    }
    let mut nodes: Vec<f64> = (0..=resolution)
        .map(|j| lo + (hi - lo) * j as f64 / resolution as f64)
        .collect();
    nodes.extend_from_slice(points);

    let mut p = ConicProblem::new();
    let mut budget = LinExpr::zero();
    let mut objective = LinExpr::zero();
    for (i, (&xi, &w)) in points.iter().zip(weights).enumerate() {
        let mut mass = LinExpr::zero();
        for (j, &z) in nodes.iter().enumerate() {
            let plan = p.add_nonneg(format!("plan[{i},{j}]"))?;
            mass.add_term(plan, 1.0);
            budget.add_term(plan, (xi - z).abs());
            objective.add_term(plan, -loss.eval(z));
        }
        p.add_eq(format!("marginal[{i}]"), mass, LinExpr::constant(w))?;
    }
    p.add_le("radius", budget, LinExpr::constant(radius))?;
    p.minimize(objective)?;
    let r = DenseSimplex::default().solve(&p.sealed(), &Tolerances::default())?;
    match r.objective {
        Some(v) if r.is_optimal() => Ok(TransportBound {
            value: -v,
            resolution,
        }),
        _ => Err(AlmError::invalid(format!("transport LP ended {}", r.status))),
    }
}

/// Optimal value of the Wasserstein dual block alone, for a constant loss
/// direction `a` (the loss is `a'ξ`).
pub fn wasserstein_block_value(
    a: &[f64],
    points: &[Vec<f64>],
    weights: &[f64],
    support: &BoxSupport,
    radius: f64,
) -> Result<f64> {
    let mut p = ConicProblem::new();
    let exprs: Vec<LinExpr> = a.iter().map(|v| LinExpr::constant(*v)).collect();
    let bound = wasserstein_block(&mut p, "block", &exprs, points, weights, support, radius)?;
    p.minimize(bound.clone())?;
    let r = solve(&p.sealed(), &Tolerances::default())?;
    r.eval(&bound)
        .filter(|_| r.is_optimal())
        .ok_or_else(|| AlmError::invalid(format!("Wasserstein dual block ended {}", r.status)))
}

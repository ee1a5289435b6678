//! Dual reformulations of the inner worst-case expectations.
//!
//! Each function adds one independent block of auxiliary variables and
//! constraints to a problem and returns an affine expression that bounds the
//! inner optimum from the safe side: an upper bound on a supremum or a lower
//! bound on an infimum. Minimizing (resp. maximizing) that expression over the
//! block's variables recovers the inner optimum exactly.

use serde::{Deserialize, Serialize};

use super::ambiguity::{BoxSupport, ProbabilityBox};
use crate::conic::{ConicProblem, LinExpr};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Max,
    Min,
}

/// `sup` (or `inf`) of `Σ_s v_s (p⁰_s + η_s)` over `Σ η = 0, lower <= η <= upper`.
///
/// For `Max` this adds `z` free and `d⁺, d⁻ >= 0` with `z + d⁺_s - d⁻_s = v_s`
/// and returns `Σ p⁰ v + Σ (d⁺ η̄ - d⁻ η̲)`. For `Min` it adds `Γ` free and
/// `ω⁺, ω⁻ >= 0` with `Γ + ω⁻_s - ω⁺_s = v_s` and returns
/// `Σ p⁰ v + Σ (ω⁻ η̲ - ω⁺ η̄)`.
pub fn box_block(
    problem: &mut ConicProblem,
    label: &str,
    values: &[LinExpr],
    set: &ProbabilityBox,
    sense: Sense,
) -> Result<LinExpr> {
    let free = problem.add_free(format!("{label}.z"))?;
    let mut bound = LinExpr::zero();
    for (s, v) in values.iter().enumerate() {
        bound += v.scaled(set.nominal[s]);
        let up = problem.add_nonneg(format!("{label}.d+[{s}]"))?;
        let down = problem.add_nonneg(format!("{label}.d-[{s}]"))?;
        let row = match sense {
            Sense::Max => {
                bound.add_term(up, set.upper[s]).add_term(down, -set.lower[s]);
                LinExpr::from(free) + up - down
            }
            Sense::Min => {
                bound.add_term(down, set.lower[s]).add_term(up, -set.upper[s]);
                LinExpr::from(free) + down - up
            }
        };
        problem.add_eq(format!("{label}.dual[{s}]"), row, v.clone())?;
    }
    Ok(bound)
}

/// Upper bound on `sup E_Q[a'ξ]` over the type-1 Wasserstein ball (Euclidean
/// ground metric) of radius `radius` around the weighted atoms `points`, with
/// `ξ` restricted to `support`.
///
/// Adds `λ >= 0`, one epigraph variable `s_i` per atom and multipliers
/// `g_i = [g⁺; g⁻] >= 0` for the stacked support rows, with
///
/// * `a'ξ̂_i + g⁺'(hi - ξ̂_i) + g⁻'(ξ̂_i - lo) <= s_i`,
/// * `‖g⁺ - g⁻ - a‖₂ <= λ`,
///
/// and returns `λ·radius + Σ_i weight_i s_i`.
pub fn wasserstein_block(
    problem: &mut ConicProblem,
    label: &str,
    a: &[LinExpr],
    points: &[Vec<f64>],
    weights: &[f64],
    support: &BoxSupport,
    radius: f64,
) -> Result<LinExpr> {
    let lambda = problem.add_nonneg(format!("{label}.lambda"))?;
    let mut bound = LinExpr::term(lambda, radius);
    for (i, (p, w)) in points.iter().zip(weights).enumerate() {
        let s = problem.add_free(format!("{label}.s[{i}]"))?;
        bound.add_term(s, *w);
        let mut lhs = LinExpr::zero();
        let mut cone = Vec::with_capacity(a.len());
        for (j, aj) in a.iter().enumerate() {
            lhs += aj.scaled(p[j]);
            let gp = problem.add_nonneg(format!("{label}.g+[{i},{j}]"))?;
            let gm = problem.add_nonneg(format!("{label}.g-[{i},{j}]"))?;
            lhs.add_term(gp, support.upper[j] - p[j])
                .add_term(gm, p[j] - support.lower[j]);
            cone.push(LinExpr::from(gp) - gm - aj.clone());
        }
        problem.add_le(format!("{label}.atom[{i}]"), lhs, s.into())?;
        problem.add_soc(format!("{label}.norm[{i}]"), cone, lambda.into())?;
    }
    Ok(bound)
}

//! The asset-liability models as conic problems, strategy extraction and
//! brute-force oracles for their inner worst-case problems.

mod ambiguity;
mod blocks;
mod models;
mod oracles;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use ambiguity::{
    AmbiguitySpec, BoxAmbiguity, BoxSupport, MixtureAmbiguity, ProbabilityBox, WassersteinAmbiguity,
};
pub use blocks::{box_block, wasserstein_block, Sense};
pub use models::{
    build_box, build_box_with, build_deterministic, build_deterministic_with, build_mixture,
    build_mixture_with, build_sp, build_sp_with, build_wasserstein, build_wasserstein_with,
    BlockRole, BoxBlockRecord, BuildOptions, Formulation, Layout, MixtureRecord, ModelKind,
    PointEstimate,
};
pub use oracles::{
    box_block_value, wasserstein_block_value, worst_case_inner_box, worst_case_inner_wasserstein,
    AffineLoss, TransportBound, VERTEX_ENUMERATION_LIMIT,
};

use crate::conic::{solve, Diagnostics, SolveResult, SolveStatus, Tolerances};
use crate::error::{AlmError, Result};
use crate::fund::{DiscountScenarios, FundSpec, InvestmentStrategy, ReturnScenarios};

impl PointEstimate {
    /// Nominal expectations of the scenario sets.
    pub fn nominal(ds: &DiscountScenarios, rs: &ReturnScenarios) -> Self {
        let t_len = ds.n_periods();
        let mean = |m: &Array2<f64>, i: usize| -> f64 {
            ds.probs.iter().enumerate().map(|(s, p)| p * m[[i, s]]).sum()
        };
        Self {
            wages_pv: (0..t_len).map(|i| mean(&ds.wages_pv, i)).collect(),
            liabilities_pv: (0..t_len).map(|i| mean(&ds.liabilities_pv, i)).collect(),
            gross: Array2::from_shape_fn((t_len, rs.n_assets()), |(i, n)| rs.expected(i)[n]),
        }
    }
}

/// Builds `kind`; the ambiguity set must match the model and is ignored for SP
/// and the deterministic model (which uses the nominal point estimate).
pub fn build_model(
    kind: ModelKind,
    spec: &FundSpec,
    ds: &DiscountScenarios,
    rs: &ReturnScenarios,
    amb: Option<&AmbiguitySpec>,
    opts: BuildOptions,
) -> Result<Formulation> {
    match (kind, amb) {
        (ModelKind::Deterministic, _) => {
            build_deterministic_with(spec, &PointEstimate::nominal(ds, rs), opts)
        }
        (ModelKind::Sp, _) => build_sp_with(spec, ds, rs, opts),
        (ModelKind::Mixture, Some(AmbiguitySpec::Mixture(a))) => build_mixture_with(spec, ds, rs, a, opts),
        (ModelKind::Box, Some(AmbiguitySpec::Box(a))) => build_box_with(spec, ds, rs, a, opts),
        (ModelKind::Wasserstein, Some(AmbiguitySpec::Wasserstein(a))) => {
            build_wasserstein_with(spec, ds, rs, a, opts)
        }
        (k, _) => Err(AlmError::invalid(format!("model `{k}` needs a matching ambiguity set"))),
    }
}

/// Reads the `x` and `y` blocks of an optimal solution by variable name.
pub fn extract_strategy(f: &Formulation, result: &SolveResult) -> Result<InvestmentStrategy> {
    let (Some(point), Some(objective)) = (&result.primal, result.objective) else {
        return Err(AlmError::Extraction(format!("solver status is {}", result.status)));
    };
    if !result.is_optimal() {
        return Err(AlmError::Extraction(format!("solver status is {}", result.status)));
    }
    let t_len = f.layout.y.len();
    let n = f.layout.x.first().map_or(0, Vec::len);
    let lookup = |name: String| -> Result<f64> {
        f.problem
            .find_variable(&name)
            .map(|v| point[v.index()])
            .ok_or_else(|| AlmError::Extraction(format!("no variable named `{name}`")))
    };
    let mut allocations = Array2::zeros((t_len, n));
    for i in 0..t_len {
        for a in 0..n {
            allocations[[i, a]] = lookup(format!("x[{i},{a}]"))?;
        }
    }
    let contribution_rates = (1..=t_len)
        .map(|t| lookup(format!("y[{t}]")))
        .collect::<Result<Vec<_>>>()?;
    Ok(InvestmentStrategy {
        allocations,
        contribution_rates,
        objective_value: objective,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub kind: ModelKind,
    pub status: SolveStatus,
    pub strategy: Option<InvestmentStrategy>,
    /// For infeasible instances: the first period whose funding constraint,
    /// added to those of earlier periods, makes the model infeasible.
    pub binding_period: Option<usize>,
    pub diagnostics: Diagnostics,
}

/// Builds, solves and extracts; infeasibility is reported with its binding period.
pub fn solve_model(
    kind: ModelKind,
    spec: &FundSpec,
    ds: &DiscountScenarios,
    rs: &ReturnScenarios,
    amb: Option<&AmbiguitySpec>,
    tol: &Tolerances,
) -> Result<ModelOutcome> {
    let f = build_model(kind, spec, ds, rs, amb, BuildOptions::full(spec))?;
    let result = solve(&f.problem, tol)?;
    let mut outcome = ModelOutcome {
        kind,
        status: result.status,
        strategy: None,
        binding_period: None,
        diagnostics: result.diagnostics.clone(),
    };
    match result.status {
        SolveStatus::Optimal => outcome.strategy = Some(extract_strategy(&f, &result)?),
        SolveStatus::Infeasible => {
            outcome.binding_period = binding_funding_period(kind, spec, ds, rs, amb, tol)?
        }
        _ => {}
    }
    Ok(outcome)
}

/// Smallest `t` such that imposing the funding constraints of periods `1..=t`
/// is infeasible, or `None` if the model is infeasible without them.
pub fn binding_funding_period(
    kind: ModelKind,
    spec: &FundSpec,
    ds: &DiscountScenarios,
    rs: &ReturnScenarios,
    amb: Option<&AmbiguitySpec>,
    tol: &Tolerances,
) -> Result<Option<usize>> {
    for t in 0..=spec.horizon {
        let f = build_model(kind, spec, ds, rs, amb, BuildOptions { funding_periods: t })?;
        if solve(&f.problem, tol)?.status == SolveStatus::Infeasible {
            return Ok((t > 0).then_some(t));
        }
    }
    Ok(None)
}

/// One box inner problem evaluated three ways at a fixed decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxBlockCheck {
    pub label: String,
    pub role: BlockRole,
    pub sense: Sense,
    /// The block's bound expression as valued inside the solved model.
    pub model_bound: f64,
    /// The block's dual solved on its own with the decision fixed.
    pub dual_value: f64,
    /// Direct optimum of the primal inner problem.
    pub primal_value: f64,
}

/// Evaluates every box block of `f` at `point`.
pub fn audit_box_blocks(f: &Formulation, point: &[f64]) -> Result<Vec<BoxBlockCheck>> {
    f.box_blocks
        .iter()
        .map(|b| {
            let values: Vec<f64> = b.values.iter().map(|v| v.eval(point)).collect();
            Ok(BoxBlockCheck {
                label: b.label.clone(),
                role: b.role,
                sense: b.sense,
                model_bound: b.bound.eval(point),
                dual_value: box_block_value(&values, &b.set, b.sense)?,
                primal_value: worst_case_inner_box(&values, &b.set, b.sense)?.0,
            })
        })
        .collect()
}

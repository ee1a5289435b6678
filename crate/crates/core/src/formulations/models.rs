use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ambiguity::{
    liability_points, return_points, wage_points, BoxAmbiguity, MixtureAmbiguity, ProbabilityBox,
    WassersteinAmbiguity,
};
use super::blocks::{box_block, wasserstein_block, Sense};
use crate::conic::{ConicProblem, LinExpr, VarId};
use crate::error::{AlmError, Result};
use crate::fund::{validate, Direction, DiscountScenarios, FundSpec, ReturnScenarios};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Deterministic,
    Sp,
    Mixture,
    Box,
    Wasserstein,
}

impl ModelKind {
    /// The four scenario-based models in reporting order.
    pub const COMPARED: [ModelKind; 4] = [
        ModelKind::Mixture,
        ModelKind::Box,
        ModelKind::Wasserstein,
        ModelKind::Sp,
    ];

    /// Short table label.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Deterministic => "DET",
            ModelKind::Sp => "SP",
            ModelKind::Mixture => "MD",
            ModelKind::Box => "BD",
            ModelKind::Wasserstein => "WM",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Deterministic => "deterministic",
            ModelKind::Sp => "sp",
            ModelKind::Mixture => "mixture",
            ModelKind::Box => "box",
            ModelKind::Wasserstein => "wasserstein",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase();
        [
            ModelKind::Deterministic,
            ModelKind::Sp,
            ModelKind::Mixture,
            ModelKind::Box,
            ModelKind::Wasserstein,
        ]
        .into_iter()
        .find(|k| k.name() == s || k.label().eq_ignore_ascii_case(&s))
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Point estimates for the deterministic model, one entry per period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub wages_pv: Vec<f64>,
    pub liabilities_pv: Vec<f64>,
    /// `T × (N+1)` gross returns.
    pub gross: Array2<f64>,
}

impl PointEstimate {
    /// Scenario `s` of `ds` and scenario `k` of `rs`.
    pub fn from_scenarios(ds: &DiscountScenarios, rs: &ReturnScenarios, s: usize, k: usize) -> Self {
        let t_len = ds.n_periods();
        Self {
            wages_pv: ds.wages_pv.column(s).to_vec(),
            liabilities_pv: ds.liabilities_pv.column(s).to_vec(),
            gross: Array2::from_shape_fn((t_len, rs.n_assets()), |(i, n)| rs.gross[[i, k, n]]),
        }
    }
}

/// Decision-variable handles shared by every model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    /// `x[i][n]`: money in asset `n` at decision moment `i = 0..T-1`.
    pub x: Vec<Vec<VarId>>,
    /// `y[i]`: contribution rate of period `t = i + 1`.
    pub y: Vec<VarId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRole {
    Objective,
    Balance(usize),
    FundingReturn(usize),
    FundingLiability(usize),
}

/// One inner worst-case problem of the box model and its dual reformulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxBlockRecord {
    pub label: String,
    pub role: BlockRole,
    pub sense: Sense,
    pub set: ProbabilityBox,
    /// Scenario values `v_s` as functions of the decisions.
    pub values: Vec<LinExpr>,
    /// Safe-side bound returned by the dual block.
    pub bound: LinExpr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub theta: VarId,
    pub mu: Vec<VarId>,
    pub omega: Vec<VarId>,
}

/// A built model: the sealed problem plus handles needed to read it back.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Formulation {
    pub kind: ModelKind,
    pub problem: ConicProblem,
    pub layout: Layout,
    pub box_blocks: Vec<BoxBlockRecord>,
    pub mixture: Option<MixtureRecord>,
}

/// Builder switches beyond the model data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildOptions {
    /// Funding constraints are imposed for periods `t <= funding_periods` only.
    pub funding_periods: usize,
}

impl BuildOptions {
    pub fn full(spec: &FundSpec) -> Self {
        Self {
            funding_periods: spec.horizon,
        }
    }
}

pub(crate) struct Skeleton<'a> {
    spec: &'a FundSpec,
    problem: ConicProblem,
    x: Vec<Vec<VarId>>,
    y: Vec<VarId>,
    funding_periods: usize,
}

impl<'a> Skeleton<'a> {
    fn new(spec: &'a FundSpec, opts: BuildOptions) -> Result<Self> {
        let t_len = spec.horizon;
        let n = spec.n_assets;
        let reg = &spec.regulatory;
        let mut problem = ConicProblem::new();
        let mut x = Vec::with_capacity(t_len);
        for i in 0..t_len {
            let row = (0..n)
                .map(|a| {
                    let lower = if reg.nonnegative.get(a).copied().unwrap_or(true) {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    };
                    problem.add_variable(format!("x[{i},{a}]"), lower, f64::INFINITY)
                })
                .collect::<Result<Vec<_>>>()?;
            x.push(row);
        }
        let y = (0..t_len)
            .map(|i| problem.add_variable(format!("y[{}]", i + 1), reg.y_min, reg.y_max))
            .collect::<Result<Vec<_>>>()?;

        let mut sk = Self {
            spec,
            problem,
            x,
            y,
            funding_periods: opts.funding_periods.min(t_len),
        };
        let total0 = sk.total(0);
        sk.problem
            .add_eq("balance[0]", total0, LinExpr::constant(spec.initial_budget()))?;
        for i in 0..t_len {
            for g in &reg.groups {
                let part = LinExpr::weighted_sum(g.assets.iter().map(|&a| (&sk.x[i][a], 1.0)));
                let cap = sk.total(i).scaled(g.fraction);
                let label = format!("group:{}[{i}]", g.name);
                match g.direction {
                    Direction::AtMost => sk.problem.add_le(label, part, cap)?,
                    Direction::AtLeast => sk.problem.add_ge(label, part, cap)?,
                }
            }
        }
        Ok(sk)
    }

    fn periods(&self) -> usize {
        self.spec.horizon
    }

    fn total(&self, i: usize) -> LinExpr {
        LinExpr::weighted_sum(self.x[i].iter().map(|v| (v, 1.0)))
    }

    /// `r'x_{t-1}` for period `t = i + 1`.
    fn portfolio_value(&self, i: usize, gross: &[f64]) -> LinExpr {
        LinExpr::weighted_sum(self.x[i].iter().zip(gross.iter().copied()))
    }

    fn has_balance(&self, i: usize) -> bool {
        i + 1 < self.periods()
    }

    fn has_funding(&self, i: usize) -> bool {
        i < self.funding_periods
    }

    /// `e'x_t = value + w_t y_t - l_t` for `t = i + 1 <= T - 1`.
    fn add_balance(&mut self, i: usize, value: LinExpr) -> Result<()> {
        let t = i + 1;
        let rhs = value + LinExpr::term(self.y[i], self.spec.wages[i]) - self.spec.benefits[i];
        let lhs = self.total(t);
        self.problem.add_eq(format!("balance[{t}]"), lhs, rhs)
    }

    fn add_funding(&mut self, i: usize, assets: LinExpr, liabilities: LinExpr) -> Result<()> {
        let psi = self.spec.funding_threshold;
        self.problem
            .add_ge(format!("funding[{}]", i + 1), assets, liabilities.scaled(psi))
    }

    fn wage_cost(&self, wages_pv: &[f64]) -> LinExpr {
        LinExpr::weighted_sum(self.y.iter().zip(wages_pv.iter().copied()))
    }

    fn finish(
        mut self,
        kind: ModelKind,
        objective: LinExpr,
        box_blocks: Vec<BoxBlockRecord>,
        mixture: Option<MixtureRecord>,
    ) -> Result<Formulation> {
        self.problem.minimize(objective)?;
        Ok(Formulation {
            kind,
            problem: self.problem.sealed(),
            layout: Layout {
                x: self.x,
                y: self.y,
            },
            box_blocks,
            mixture,
        })
    }
}

fn check_instance(spec: &FundSpec, ds: &DiscountScenarios, rs: &ReturnScenarios) -> Result<()> {
    validate(spec, ds, rs).into_result()
}

fn weighted_column_mean(m: &Array2<f64>, i: usize, probs: &[f64]) -> f64 {
    probs.iter().enumerate().map(|(s, p)| p * m[[i, s]]).sum()
}

/// Deterministic model on a single point estimate.
pub fn build_deterministic(spec: &FundSpec, point: &PointEstimate) -> Result<Formulation> {
    build_deterministic_with(spec, point, BuildOptions::full(spec))
}

pub fn build_deterministic_with(
    spec: &FundSpec,
    point: &PointEstimate,
    opts: BuildOptions,
) -> Result<Formulation> {
    let t_len = spec.horizon;
    if point.wages_pv.len() != t_len
        || point.liabilities_pv.len() != t_len
        || point.gross.dim() != (t_len, spec.n_assets)
    {
        return Err(AlmError::invalid("point estimate does not match the fund horizon and assets"));
    }
    let mut sk = Skeleton::new(spec, opts)?;
    for i in 0..t_len {
        let r = point.gross.row(i).to_vec();
        let value = sk.portfolio_value(i, &r);
        if sk.has_balance(i) {
            sk.add_balance(i, value.clone())?;
        }
        if sk.has_funding(i) {
            sk.add_funding(i, value, LinExpr::constant(point.liabilities_pv[i]))?;
        }
    }
    let objective = sk.wage_cost(&point.wages_pv);
    sk.finish(ModelKind::Deterministic, objective, Vec::new(), None)
}

/// Stochastic program under the nominal probabilities.
pub fn build_sp(spec: &FundSpec, ds: &DiscountScenarios, rs: &ReturnScenarios) -> Result<Formulation> {
    build_sp_with(spec, ds, rs, BuildOptions::full(spec))
}

pub fn build_sp_with(
    spec: &FundSpec,
    ds: &DiscountScenarios,
    rs: &ReturnScenarios,
    opts: BuildOptions,
) -> Result<Formulation> {
    check_instance(spec, ds, rs)?;
    let mut sk = Skeleton::new(spec, opts)?;
    for i in 0..sk.periods() {
        let value = sk.portfolio_value(i, &rs.expected(i));
        if sk.has_balance(i) {
            sk.add_balance(i, value.clone())?;
        }
        if sk.has_funding(i) {
            let l = weighted_column_mean(&ds.liabilities_pv, i, &ds.probs);
            sk.add_funding(i, value, LinExpr::constant(l))?;
        }
    }
    let w: Vec<f64> = (0..sk.periods())
        .map(|i| weighted_column_mean(&ds.wages_pv, i, &ds.probs))
        .collect();
    let objective = sk.wage_cost(&w);
    sk.finish(ModelKind::Sp, objective, Vec::new(), None)
}

/// Mixture ambiguity in epigraph form.
pub fn build_mixture(
    spec: &FundSpec,
    ds: &DiscountScenarios,
    rs: &ReturnScenarios,
    amb: &MixtureAmbiguity,
) -> Result<Formulation> {
    build_mixture_with(spec, ds, rs, amb, BuildOptions::full(spec))
}

pub fn build_mixture_with(
    spec: &FundSpec,
    ds: &DiscountScenarios,
    rs: &ReturnScenarios,
    amb: &MixtureAmbiguity,
    opts: BuildOptions,
) -> Result<Formulation> {
    check_instance(spec, ds, rs)?;
    amb.validate(ds.n_scenarios(), rs.n_scenarios())?;
    let mut sk = Skeleton::new(spec, opts)?;
    let t_len = sk.periods();
    let theta = sk.problem.add_free("theta")?;
    for (j, p) in amb.discount.iter().enumerate() {
        let w: Vec<f64> = (0..t_len).map(|i| weighted_column_mean(&ds.wages_pv, i, p)).collect();
        let cost = sk.wage_cost(&w);
        sk.problem.add_ge(format!("theta.epi[{j}]"), theta.into(), cost)?;
    }
    let mut mu = Vec::with_capacity(t_len);
    let mut omega = Vec::with_capacity(t_len);
    for i in 0..t_len {
        let t = i + 1;
        let m = sk.problem.add_free(format!("mu[{t}]"))?;
        let o = sk.problem.add_free(format!("omega[{t}]"))?;
        mu.push(m);
        omega.push(o);
        for (j, q) in amb.returns.iter().enumerate() {
            let mut value = LinExpr::zero();
            for (k, qk) in q.iter().enumerate() {
                value += sk.portfolio_value(i, &rs.at(i, k).to_vec()).scaled(*qk);
            }
            sk.problem.add_le(format!("mu.hypo[{t},{j}]"), m.into(), value)?;
        }
        for (j, p) in amb.discount.iter().enumerate() {
            let l = weighted_column_mean(&ds.liabilities_pv, i, p);
            sk.problem
                .add_ge(format!("omega.epi[{t},{j}]"), o.into(), LinExpr::constant(l))?;
        }
        if sk.has_balance(i) {
            sk.add_balance(i, m.into())?;
        }
        if sk.has_funding(i) {
            sk.add_funding(i, m.into(), o.into())?;
        }
    }
    sk.finish(
        ModelKind::Mixture,
        theta.into(),
        Vec::new(),
        Some(MixtureRecord { theta, mu, omega }),
    )
}

/// Box ambiguity with one independent dual block per inner problem.
pub fn build_box(
    spec: &FundSpec,
    ds: &DiscountScenarios,
    rs: &ReturnScenarios,
    amb: &BoxAmbiguity,
) -> Result<Formulation> {
    build_box_with(spec, ds, rs, amb, BuildOptions::full(spec))
}

pub fn build_box_with(
    spec: &FundSpec,
    ds: &DiscountScenarios,
    rs: &ReturnScenarios,
    amb: &BoxAmbiguity,
    opts: BuildOptions,
) -> Result<Formulation> {
    check_instance(spec, ds, rs)?;
    amb.validate(ds.n_scenarios(), rs.n_scenarios())?;
    let mut sk = Skeleton::new(spec, opts)?;
    let t_len = sk.periods();
    let mut blocks = Vec::new();
    let mut add_block = |sk: &mut Skeleton, label: String, role, sense, set: &ProbabilityBox, values: Vec<LinExpr>| -> Result<LinExpr> {
        let bound = box_block(&mut sk.problem, &label, &values, set, sense)?;
        blocks.push(BoxBlockRecord {
            label,
            role,
            sense,
            set: set.clone(),
            values,
            bound: bound.clone(),
        });
        Ok(bound)
    };

    let wage_values: Vec<LinExpr> = (0..ds.n_scenarios())
        .map(|s| sk.wage_cost(&ds.wage_vector(s).to_vec()))
        .collect();
    let objective = add_block(
        &mut sk,
        "objective".into(),
        BlockRole::Objective,
        Sense::Max,
        &amb.discount,
        wage_values,
    )?;

    for i in 0..t_len {
        let t = i + 1;
        let returns: Vec<LinExpr> = (0..rs.n_scenarios())
            .map(|k| sk.portfolio_value(i, &rs.at(i, k).to_vec()))
            .collect();
        if sk.has_balance(i) {
            let lb = add_block(
                &mut sk,
                format!("balance[{t}].ret"),
                BlockRole::Balance(t),
                Sense::Min,
                &amb.returns,
                returns.clone(),
            )?;
            sk.add_balance(i, lb)?;
        }
        if sk.has_funding(i) {
            let lb = add_block(
                &mut sk,
                format!("funding[{t}].ret"),
                BlockRole::FundingReturn(t),
                Sense::Min,
                &amb.returns,
                returns,
            )?;
            let liabilities: Vec<LinExpr> = (0..ds.n_scenarios())
                .map(|s| LinExpr::constant(ds.liabilities_pv[[i, s]]))
                .collect();
            let ub = add_block(
                &mut sk,
                format!("funding[{t}].liab"),
                BlockRole::FundingLiability(t),
                Sense::Max,
                &amb.discount,
                liabilities,
            )?;
            sk.add_funding(i, lb, ub)?;
        }
    }
    sk.finish(ModelKind::Box, objective, blocks, None)
}

/// Wasserstein ambiguity with Euclidean ground metric and box supports.
///
/// Atoms are weighted by the nominal probabilities.
pub fn build_wasserstein(
    spec: &FundSpec,
    ds: &DiscountScenarios,
    rs: &ReturnScenarios,
    amb: &WassersteinAmbiguity,
) -> Result<Formulation> {
    build_wasserstein_with(spec, ds, rs, amb, BuildOptions::full(spec))
}

pub fn build_wasserstein_with(
    spec: &FundSpec,
    ds: &DiscountScenarios,
    rs: &ReturnScenarios,
    amb: &WassersteinAmbiguity,
    opts: BuildOptions,
) -> Result<Formulation> {
    check_instance(spec, ds, rs)?;
    amb.validate(ds, rs)?;
    let mut sk = Skeleton::new(spec, opts)?;
    let t_len = sk.periods();

    let y: Vec<LinExpr> = sk.y.iter().map(|&v| v.into()).collect();
    let objective = wasserstein_block(
        &mut sk.problem,
        "wage",
        &y,
        &wage_points(ds),
        &ds.probs,
        &amb.wage_support,
        amb.wage_radius,
    )?;

    for i in 0..t_len {
        let t = i + 1;
        if !(sk.has_balance(i) || sk.has_funding(i)) {
            continue;
        }
        let loss: Vec<LinExpr> = sk.x[i].iter().map(|&v| LinExpr::term(v, -1.0)).collect();
        let worst_loss = wasserstein_block(
            &mut sk.problem,
            &format!("return[{t}]"),
            &loss,
            &return_points(rs, i),
            &rs.probs,
            &amb.return_supports[i],
            amb.return_radii[i],
        )?;
        let assets = -worst_loss;
        if sk.has_balance(i) {
            sk.add_balance(i, assets.clone())?;
        }
        if sk.has_funding(i) {
            let ub = wasserstein_block(
                &mut sk.problem,
                &format!("liability[{t}]"),
                &[LinExpr::constant(1.0)],
                &liability_points(ds, i),
                &ds.probs,
                &amb.liability_supports[i],
                amb.liability_radii[i],
            )?;
            sk.add_funding(i, assets, ub)?;
        }
    }
    sk.finish(ModelKind::Wasserstein, objective, Vec::new(), None)
}

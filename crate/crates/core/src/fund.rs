//! Pension-fund domain types, discounting and instance validation.
//!
//! Periods are numbered `t = 1..=T`. Per-period vectors and matrix rows are
//! stored 0-based, so row `i` holds period `t = i + 1`. Allocations are the
//! exception: row `i` of an allocation matrix is the portfolio `x_i` chosen at
//! decision moment `i = 0..T-1`.

use ndarray::{Array2, Array3, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{AlmError, Result};

/// Tolerance on probability vectors summing to one.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtMost,
    AtLeast,
}

/// `Σ_{n ∈ assets} x_n  (<= | >=)  fraction · Σ_n x_n` at every decision moment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupConstraint {
    pub name: String,
    pub assets: Vec<usize>,
    pub direction: Direction,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegulatorySets {
    pub y_min: f64,
    pub y_max: f64,
    pub groups: Vec<GroupConstraint>,
    /// One flag per asset; `true` forbids short positions.
    pub nonnegative: Vec<bool>,
}

impl RegulatorySets {
    /// Contribution bounds only, every asset long-only.
    pub fn long_only(n_assets: usize, y_min: f64, y_max: f64) -> Self {
        Self {
            y_min,
            y_max,
            groups: Vec::new(),
            nonnegative: vec![true; n_assets],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundSpec {
    pub horizon: usize,
    /// Number of assets including cash at index 0.
    pub n_assets: usize,
    pub initial_assets: f64,
    pub initial_wage: f64,
    pub initial_contribution_rate: f64,
    pub initial_liability: f64,
    /// Holdings before the time-0 rebalance; informational, must sum to `initial_assets`.
    pub initial_holdings: Vec<f64>,
    /// `w_1..w_T`.
    pub wages: Vec<f64>,
    /// `l_1..l_T`.
    pub benefits: Vec<f64>,
    pub funding_threshold: f64,
    pub regulatory: RegulatorySets,
}

impl FundSpec {
    /// Investable wealth at time 0: `A_0 + w_0 y_0 - l_0`.
    pub fn initial_budget(&self) -> f64 {
        self.initial_assets + self.initial_wage * self.initial_contribution_rate
            - self.initial_liability
    }

    /// Copy with every currency input multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.initial_assets *= c;
        s.initial_wage *= c;
        s.initial_liability *= c;
        s.initial_holdings.iter_mut().for_each(|v| *v *= c);
        s.wages.iter_mut().for_each(|v| *v *= c);
        s.benefits.iter_mut().for_each(|v| *v *= c);
        s
    }

    pub fn with_threshold(&self, psi: f64) -> Self {
        Self {
            funding_threshold: psi,
            ..self.clone()
        }
    }
}

/// Discount-rate scenarios with the derived discounted wage and liability matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscountScenarios {
    pub rates: Vec<f64>,
    pub probs: Vec<f64>,
    /// `W[i, s] = w_t / (1 + γ_s)^t` with `t = i + 1`.
    pub wages_pv: Array2<f64>,
    /// `L[i, s] = Σ_{τ >= t} l_τ / (1 + γ_s)^(τ - t)` with `t = i + 1`.
    pub liabilities_pv: Array2<f64>,
}

impl DiscountScenarios {
    pub fn n_scenarios(&self) -> usize {
        self.rates.len()
    }

    pub fn n_periods(&self) -> usize {
        self.wages_pv.nrows()
    }

    /// Discounted wage vector `W_s` over the horizon.
    pub fn wage_vector(&self, s: usize) -> ArrayView1<'_, f64> {
        self.wages_pv.column(s)
    }

    /// Nominal-probability-weighted mean discount rate.
    pub fn mean_rate(&self) -> f64 {
        self.rates.iter().zip(&self.probs).map(|(r, p)| r * p).sum()
    }

    /// Same scenarios with every currency entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rates: self.rates.clone(),
            probs: self.probs.clone(),
            wages_pv: &self.wages_pv * c,
            liabilities_pv: &self.liabilities_pv * c,
        }
    }
}

/// Gross asset-return scenarios `r[i, k, n]` for period `t = i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnScenarios {
    pub gross: Array3<f64>,
    pub probs: Vec<f64>,
}

impl ReturnScenarios {
    pub fn n_periods(&self) -> usize {
        self.gross.shape()[0]
    }

    pub fn n_scenarios(&self) -> usize {
        self.gross.shape()[1]
    }

    pub fn n_assets(&self) -> usize {
        self.gross.shape()[2]
    }

    pub fn at(&self, i: usize, k: usize) -> ArrayView1<'_, f64> {
        self.gross.slice(ndarray::s![i, k, ..])
    }

    /// Nominal expectation `Σ_k q⁰_k r[i, k, ·]`.
    pub fn expected(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_assets()];
        for (k, q) in self.probs.iter().enumerate() {
            for (o, r) in out.iter_mut().zip(self.at(i, k)) {
                *o += q * r;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvestmentStrategy {
    /// Row `i` is the portfolio `x_i` chosen at decision moment `i = 0..T-1`.
    pub allocations: Array2<f64>,
    /// `y_1..y_T`.
    pub contribution_rates: Vec<f64>,
    pub objective_value: f64,
}

impl InvestmentStrategy {
    /// Portfolio weights at decision moment `i`, or `None` when the total is not positive.
    pub fn weights(&self, i: usize) -> Option<Vec<f64>> {
        let row = self.allocations.row(i);
        let total: f64 = row.sum();
        (total > 0.0).then(|| row.iter().map(|v| v / total).collect())
    }

    pub fn average_contribution_rate(&self) -> f64 {
        let y = &self.contribution_rates;
        y.iter().sum::<f64>() / y.len().max(1) as f64
    }
}

/// `Σ_{τ >= from} c_τ / (1 + rate)^(τ - from)` over 0-based `τ`.
pub fn present_value(cashflows: &[f64], rate: f64, from: usize) -> Result<f64> {
    if !rate.is_finite() || cashflows.iter().any(|c| !c.is_finite()) {
        return Err(AlmError::invalid("present value of non-finite input"));
    }
    if rate <= -1.0 {
        return Err(AlmError::invalid(format!("discount rate {rate} must exceed -1")));
    }
    if from >= cashflows.len() {
        return Err(AlmError::invalid(format!(
            "start index {from} outside {} cashflows",
            cashflows.len()
        )));
    }
    let d = 1.0 / (1.0 + rate);
    Ok(cashflows[from..]
        .iter()
        .enumerate()
        .map(|(k, c)| c * d.powi(k as i32))
        .sum())
}

/// Present value at time 0 of benefits `l_1..l_T`: `Σ_t l_t / (1 + rate)^t`.
pub fn liability_pv_at_origin(benefits: &[f64], rate: f64) -> Result<f64> {
    let mut padded = Vec::with_capacity(benefits.len() + 1);
    padded.push(0.0);
    padded.extend_from_slice(benefits);
    present_value(&padded, rate, 0)
}

pub(crate) fn simplex_error(probs: &[f64]) -> Option<String> {
    if probs.is_empty() {
        return Some("probability vector is empty".into());
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < -1e-12) {
        return Some(format!("probability {p} is negative or non-finite"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Some(format!("probabilities sum to {sum}, not 1"));
    }
    None
}

pub fn build_discount_scenarios(
    wages: &[f64],
    benefits: &[f64],
    rates: &[f64],
    probs: &[f64],
) -> Result<DiscountScenarios> {
    if let Some(msg) = simplex_error(probs) {
        return Err(AlmError::Validation(format!("discount scenarios: {msg}")));
    }
    if rates.len() != probs.len() {
        return Err(AlmError::Validation(format!(
            "{} discount rates but {} probabilities",
            rates.len(),
            probs.len()
        )));
    }
    if wages.len() != benefits.len() || wages.is_empty() {
        return Err(AlmError::Validation(format!(
            "wages ({}) and benefits ({}) must share a nonzero horizon",
            wages.len(),
            benefits.len()
        )));
    }
    if let Some(g) = rates.iter().find(|g| !g.is_finite() || **g <= -1.0) {
        return Err(AlmError::Validation(format!("discount rate {g} must exceed -1")));
    }
    let t_len = wages.len();
    let s_len = rates.len();
    let mut w = Array2::zeros((t_len, s_len));
    let mut l = Array2::zeros((t_len, s_len));
    for (s, &g) in rates.iter().enumerate() {
        let d = 1.0 / (1.0 + g);
        for i in 0..t_len {
            w[[i, s]] = wages[i] * d.powi(i as i32 + 1);
            l[[i, s]] = present_value(benefits, g, i)?;
        }
    }
    Ok(DiscountScenarios {
        rates: rates.to_vec(),
        probs: probs.to_vec(),
        wages_pv: w,
        liabilities_pv: l,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Dotted path of the violated invariant, e.g. `returns.probabilities.simplex`.
    pub constraint: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, constraint: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            constraint: constraint.into(),
            message: message.into(),
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let joined: Vec<String> = self
                .violations
                .iter()
                .map(|v| format!("{}: {}", v.constraint, v.message))
                .collect();
            Err(AlmError::Validation(joined.join("; ")))
        }
    }
}

fn check_currency(report: &mut ValidationReport, name: &str, values: &[f64]) {
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        report.push(
            &format!("fund.{name}.nonnegative"),
            format!("value {v} is negative or non-finite"),
        );
    }
}

/// Every invariant violation of the instance; an empty report means valid.
pub fn validate(spec: &FundSpec, ds: &DiscountScenarios, rs: &ReturnScenarios) -> ValidationReport {
    let mut r = ValidationReport::default();
    let t_len = spec.horizon;
    let n = spec.n_assets;
    if t_len == 0 {
        r.push("fund.horizon.positive", "horizon must be at least 1");
    }
    if n == 0 {
        r.push("fund.assets.positive", "at least the cash asset is required");
    }
    check_currency(
        &mut r,
        "initial_state",
        &[spec.initial_assets, spec.initial_wage, spec.initial_liability],
    );
    check_currency(&mut r, "initial_holdings", &spec.initial_holdings);
    check_currency(&mut r, "wages", &spec.wages);
    check_currency(&mut r, "benefits", &spec.benefits);
    if !(0.0..=1.0).contains(&spec.initial_contribution_rate) {
        r.push(
            "fund.initial_contribution_rate.range",
            format!("{} outside [0, 1]", spec.initial_contribution_rate),
        );
    }
    if !(spec.funding_threshold > 0.0 && spec.funding_threshold.is_finite()) {
        r.push(
            "fund.funding_threshold.positive",
            format!("ψ = {} must be positive", spec.funding_threshold),
        );
    }
    if spec.initial_holdings.len() != n {
        r.push(
            "fund.initial_holdings.shape",
            format!("{} holdings for {n} assets", spec.initial_holdings.len()),
        );
    } else {
        let held: f64 = spec.initial_holdings.iter().sum();
        if (held - spec.initial_assets).abs() > 1e-9 * (1.0 + spec.initial_assets.abs()) {
            r.push(
                "fund.initial_holdings.total",
                format!("holdings sum to {held}, initial assets are {}", spec.initial_assets),
            );
        }
    }
    if spec.wages.len() != t_len {
        r.push(
            "fund.wages.shape",
            format!("{} wages for horizon {t_len}", spec.wages.len()),
        );
    }
    if spec.benefits.len() != t_len {
        r.push(
            "fund.benefits.shape",
            format!("{} benefits for horizon {t_len}", spec.benefits.len()),
        );
    }

    let reg = &spec.regulatory;
    if !(0.0 <= reg.y_min && reg.y_min <= reg.y_max && reg.y_max <= 1.0) {
        r.push(
            "regulatory.contribution_bounds.range",
            format!("need 0 <= y_min <= y_max <= 1, got [{}, {}]", reg.y_min, reg.y_max),
        );
    }
    if reg.nonnegative.len() != n {
        r.push(
            "regulatory.nonnegative.shape",
            format!("{} flags for {n} assets", reg.nonnegative.len()),
        );
    }
    for g in &reg.groups {
        if !(0.0..=1.0).contains(&g.fraction) {
            r.push(
                "regulatory.group.fraction",
                format!("group `{}` bound {} outside [0, 1]", g.name, g.fraction),
            );
        }
        if g.assets.is_empty() || g.assets.iter().any(|&a| a >= n) {
            r.push(
                "regulatory.group.assets",
                format!("group `{}` must name assets within 0..{}", g.name, n),
            );
        }
    }

    if let Some(msg) = simplex_error(&ds.probs) {
        r.push("discount.probabilities.simplex", msg);
    }
    if ds.rates.len() != ds.probs.len() {
        r.push(
            "discount.rates.shape",
            format!("{} rates for {} probabilities", ds.rates.len(), ds.probs.len()),
        );
    }
    if let Some(g) = ds.rates.iter().find(|g| !(g.is_finite() && **g > -1.0)) {
        r.push("discount.rates.range", format!("rate {g} must exceed -1"));
    }
    let s_len = ds.rates.len();
    if ds.wages_pv.dim() != (t_len, s_len) || ds.liabilities_pv.dim() != (t_len, s_len) {
        r.push(
            "discount.matrices.shape",
            format!("expected {t_len}x{s_len} discounted wage and liability matrices"),
        );
    }

    if let Some(msg) = simplex_error(&rs.probs) {
        r.push("returns.probabilities.simplex", msg);
    }
    let (rt, rk, rn) = rs.gross.dim();
    if rt != t_len || rn != n || rk != rs.probs.len() {
        r.push(
            "returns.shape",
            format!(
                "returns are {rt}x{rk}x{rn}, expected {t_len}x{}x{n}",
                rs.probs.len()
            ),
        );
    }
    if rs.gross.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        r.push("returns.gross.positive", "every gross return must be positive");
    }
    if rn > 0 {
        for i in 0..rt {
            let first = rs.gross[[i, 0, 0]];
            if (0..rk).any(|k| (rs.gross[[i, k, 0]] - first).abs() > 1e-12) {
                r.push(
                    "returns.risk_free.identical",
                    format!("cash return differs across scenarios in period {}", i + 1),
                );
                break;
            }
        }
    }
    r
}

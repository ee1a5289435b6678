//! Data → regimes → scenarios → models → out-of-sample evaluation.

use std::path::Path;

use alm_core::evaluation::{
    aggregate_outcomes, average_hhi, generate_backtest_paths, simulate_out_of_sample, summarize,
    EvaluationReport, ModelSeries, TestKind,
};
use alm_core::formulations::{
    solve_model, AmbiguitySpec, BoxAmbiguity, MixtureAmbiguity, ModelKind, ModelOutcome,
    WassersteinAmbiguity,
};
use alm_core::fund::{build_discount_scenarios, validate, DiscountScenarios, FundSpec, ReturnScenarios};
use alm_core::scenario::{
    classify_regimes, equal_weight_index, estimate_regime_params, read_returns_csv,
    reduce_scenarios, regime_probabilities, simulate_paths, synthetic_history, GbmParams,
    RegimeModel, SimulationConfig,
};
use anyhow::{bail, ensure, Context, Result};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DataConfig, ExperimentConfig, RateMode, SyntheticConfig};

/// Everything the solves share.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub asset_names: Vec<String>,
    pub history: Array2<f64>,
    pub labels: Vec<usize>,
    pub regimes: RegimeModel,
    pub discount: DiscountScenarios,
    pub returns: ReturnScenarios,
    pub ambiguity: DerivedAmbiguity,
}

impl Prepared {
    pub fn n_assets(&self) -> usize {
        self.asset_names.len()
    }

    pub fn ambiguity_for(&self, kind: ModelKind) -> Option<&AmbiguitySpec> {
        match kind {
            ModelKind::Mixture => self.ambiguity.mixture.as_ref(),
            ModelKind::Box => self.ambiguity.box_set.as_ref(),
            ModelKind::Wasserstein => self.ambiguity.wasserstein.as_ref(),
            ModelKind::Sp | ModelKind::Deterministic => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivedAmbiguity {
    pub mixture: Option<AmbiguitySpec>,
    pub box_set: Option<AmbiguitySpec>,
    pub wasserstein: Option<AmbiguitySpec>,
    /// Half the range of the epoch probabilities, when epochs are given.
    pub epoch_half_range: Option<f64>,
}

pub fn synthetic_regime_model(s: &SyntheticConfig) -> RegimeModel {
    RegimeModel {
        names: s.regimes.iter().map(|r| r.name.clone()).collect(),
        params: s
            .regimes
            .iter()
            .map(|r| GbmParams {
                drift: s.betas.iter().map(|b| b * r.mean).collect(),
                volatility: s.vol_scales.iter().map(|v| v * r.volatility).collect(),
                dt: 1.0,
            })
            .collect(),
        probs: s.regimes.iter().map(|r| r.probability).collect(),
    }
}

fn load_history(cfg: &ExperimentConfig, base_dir: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    match &cfg.data {
        DataConfig::Synthetic(s) => {
            let model = synthetic_regime_model(s);
            let (hist, _) = synthetic_history(
                &model,
                s.windows,
                cfg.scenarios.window,
                cfg.scenarios.risk_free_rate,
                s.seed,
            )?;
            Ok((s.asset_names.clone(), hist))
        }
        DataConfig::Csv { path } => {
            let full = base_dir.join(path);
            let file = std::fs::File::open(&full).with_context(|| format!("opening {}", full.display()))?;
            Ok(read_returns_csv(file)?)
        }
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v.sqrt())
}

/// Regimes, scenarios and ambiguity sets for `cfg`.
pub fn prepare(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Prepared> {
    let sc = &cfg.scenarios;
    let (asset_names, history) = load_history(cfg, base_dir)?;
    ensure!(history.ncols() >= 2, "history needs cash plus at least one risky asset");
    let index = equal_weight_index(history.view());
    let long_term = mean_std(&index);
    let labels = classify_regimes(history.view(), sc.window, sc.regimes, long_term, sc.seed)?;
    let mut probs = regime_probabilities(&labels)?;
    probs.resize(sc.regimes, 0.0);
    let params = estimate_regime_params(history.view(), sc.window, &labels, sc.regimes)?;
    let names = match &cfg.data {
        DataConfig::Synthetic(s) if s.regimes.len() == sc.regimes => {
            s.regimes.iter().map(|r| r.name.clone()).collect()
        }
        _ => (0..sc.regimes).map(|r| format!("regime{r}")).collect(),
    };
    let regimes = RegimeModel {
        names,
        params,
        probs: probs.clone(),
    };

    let sim = SimulationConfig {
        paths: sc.paths,
        seed: sc.seed,
        periods: cfg.fund.horizon,
        risk_free_rate: sc.risk_free_rate,
    };
    let raw = regimes
        .params
        .iter()
        .enumerate()
        .map(|(k, p)| simulate_paths(p, &sim, k))
        .collect::<alm_core::Result<Vec<_>>>()?;
    let returns = reduce_scenarios(&raw, &probs)?;

    let rates = &cfg.discount.rates;
    let p0 = match &cfg.discount.probabilities {
        Some(p) => p.clone(),
        None if rates.len() == probs.len() => probs.clone(),
        None => vec![1.0 / rates.len() as f64; rates.len()],
    };
    let discount = build_discount_scenarios(&cfg.fund.wages, &cfg.fund.benefits, rates, &p0)?;
    let ambiguity = derive_ambiguity(cfg, &discount, &returns)?;
    Ok(Prepared {
        asset_names,
        history,
        labels,
        regimes,
        discount,
        returns,
        ambiguity,
    })
}

/// Ambiguity sets per model from the configured rules.
///
/// Mixture components are the epoch vectors, preceded by the nominal
/// probabilities unless disabled; discount components reuse the epochs when
/// their length matches the discount scenarios and are otherwise the nominal
/// vector alone. Box half-widths and the Wasserstein half-range default to half
/// the range of all epoch probabilities.
pub fn derive_ambiguity(
    cfg: &ExperimentConfig,
    ds: &DiscountScenarios,
    rs: &ReturnScenarios,
) -> Result<DerivedAmbiguity> {
    let mix = &cfg.ambiguity.mixture;
    let epoch_half_range = (!mix.epochs.is_empty()).then(|| {
        let all = mix.epochs.iter().flatten();
        let hi = all.clone().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = all.cloned().fold(f64::INFINITY, f64::min);
        (hi - lo) / 2.0
    });
    let wants = |k: ModelKind| cfg.models.contains(&k);
    let mut out = DerivedAmbiguity {
        epoch_half_range,
        ..Default::default()
    };
    if wants(ModelKind::Mixture) {
        if mix.epochs.is_empty() && !mix.include_nominal {
            bail!("the mixture model needs epoch probability vectors or the nominal component");
        }
        if let Some(e) = mix.epochs.iter().find(|e| e.len() != rs.n_scenarios()) {
            bail!("mixture epoch {e:?} does not match {} return scenarios", rs.n_scenarios());
        }
        let epochs: Vec<Vec<f64>> = mix.epochs.iter().map(|e| normalized_epoch(e)).collect::<Result<_>>()?;
        let mut returns = Vec::new();
        let mut discount = Vec::new();
        if mix.include_nominal {
            returns.push(rs.probs.clone());
            discount.push(ds.probs.clone());
        }
        returns.extend(epochs.iter().cloned());
        if epochs.first().is_some_and(|e| e.len() == ds.n_scenarios()) {
            discount.extend(epochs.iter().cloned());
        } else if discount.is_empty() {
            discount.push(ds.probs.clone());
        }
        let amb = MixtureAmbiguity { discount, returns };
        amb.validate(ds.n_scenarios(), rs.n_scenarios())?;
        out.mixture = Some(AmbiguitySpec::Mixture(amb));
    }
    if wants(ModelKind::Box) {
        let hw = cfg
            .ambiguity
            .box_set
            .half_width
            .or(epoch_half_range)
            .context("box half-width needs epochs or an explicit value")?;
        let amb = BoxAmbiguity::symmetric(&ds.probs, &rs.probs, hw);
        amb.validate(ds.n_scenarios(), rs.n_scenarios())?;
        out.box_set = Some(AmbiguitySpec::Box(amb));
    }
    if wants(ModelKind::Wasserstein) {
        let w = &cfg.ambiguity.wasserstein;
        let hr = w
            .half_range
            .or(epoch_half_range)
            .context("Wasserstein half-range needs epochs or an explicit value")?;
        let amb = WassersteinAmbiguity::from_rule(ds, rs, hr, w.support_widen).with_radius_factor(w.radius_scale);
        amb.validate(ds, rs)?;
        out.wasserstein = Some(AmbiguitySpec::Wasserstein(amb));
    }
    Ok(out)
}

/// Rescales an epoch vector to sum to one, warning when it did not.
fn normalized_epoch(e: &[f64]) -> Result<Vec<f64>> {
    ensure!(e.iter().all(|p| p.is_finite() && *p >= 0.0), "mixture epoch {e:?} has a negative entry");
    let total: f64 = e.iter().sum();
    ensure!(total > 0.0, "mixture epoch {e:?} is all zero");
    if (total - 1.0).abs() > 1e-9 {
        log::warn!("mixture epoch {e:?} sums to {total}; rescaled to one");
    }
    Ok(e.iter().map(|p| p / total).collect())
}

/// Result of one (model, ψ) solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: ModelKind,
    pub psi: f64,
    pub outcome: ModelOutcome,
}

impl Cell {
    /// Optimal or infeasible-as-result.
    pub fn is_conclusive(&self) -> bool {
        use alm_core::conic::SolveStatus;
        matches!(self.outcome.status, SolveStatus::Optimal | SolveStatus::Infeasible)
    }
}

/// Models in table order: the compared four first, then the deterministic one.
pub fn ordered_models(models: &[ModelKind]) -> Vec<ModelKind> {
    ModelKind::COMPARED
        .iter()
        .chain(std::iter::once(&ModelKind::Deterministic))
        .filter(|k| models.contains(k))
        .copied()
        .collect()
}

/// Solves every (model, ψ) pair; output order is models then ψ as given.
pub fn solve_grid(cfg: &ExperimentConfig, prep: &Prepared, models: &[ModelKind], psis: &[f64]) -> Result<Vec<Cell>> {
    let tol = cfg.solver.tolerances();
    let pairs: Vec<(ModelKind, f64)> = models
        .iter()
        .flat_map(|m| psis.iter().map(move |p| (*m, *p)))
        .collect();
    pairs
        .par_iter()
        .map(|&(model, psi)| {
            let spec = cfg.fund_spec(prep.n_assets(), psi);
            validate(&spec, &prep.discount, &prep.returns).into_result()?;
            let outcome = solve_model(
                model,
                &spec,
                &prep.discount,
                &prep.returns,
                prep.ambiguity_for(model),
                &tol,
            )
            .with_context(|| format!("solving {model} at ψ = {psi}"))?;
            log::info!("{model} ψ={psi}: {}", outcome.status);
            Ok(Cell { model, psi, outcome })
        })
        .collect()
}

/// Simulates each model's strategy at the evaluation ψ on shared paths.
pub fn evaluate(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    cells: &[Cell],
    test: TestKind,
) -> Result<(Vec<ModelSeries>, Option<EvaluationReport>)> {
    let ev = &cfg.evaluation;
    let spec = cfg.fund_spec(prep.n_assets(), ev.psi);
    let rates = match ev.rate {
        RateMode::Mean => None,
        RateMode::PerPath => Some((prep.discount.rates.as_slice(), prep.discount.probs.as_slice())),
    };
    let paths = generate_backtest_paths(
        &prep.regimes,
        spec.horizon,
        ev.paths,
        cfg.scenarios.risk_free_rate,
        rates,
        ev.seed,
    )?;
    let mut series = Vec::new();
    for model in ordered_models(&cfg.models) {
        let Some(cell) = cells.iter().find(|c| c.model == model && c.psi == ev.psi) else {
            continue;
        };
        let Some(strategy) = &cell.outcome.strategy else {
            log::warn!("{model} has no strategy at ψ = {}; left out of the evaluation", ev.psi);
            continue;
        };
        let outcomes = simulate_out_of_sample(strategy, &spec, &paths, prep.discount.mean_rate())?;
        let summary = aggregate_outcomes(&outcomes)?;
        series.push(ModelSeries {
            model: model.label().to_string(),
            funding_ratio: summary.mean_funding_ratio,
            fund_return: summary.mean_fund_return,
            average_hhi: average_hhi(strategy).ok(),
            insolvency_rate: summary.insolvency_rate,
        });
    }
    let report = if series.is_empty() {
        None
    } else {
        Some(summarize(&series, test)?)
    };
    Ok((series, report))
}

/// The fund at ψ for a prepared run.
pub fn spec_at(cfg: &ExperimentConfig, prep: &Prepared, psi: f64) -> FundSpec {
    cfg.fund_spec(prep.n_assets(), psi)
}

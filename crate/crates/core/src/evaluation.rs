//! Out-of-sample simulation of fixed strategies, concentration metrics and
//! pairwise comparison of models.

use ndarray::Array2;
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{AlmError, Result};
use crate::fund::{present_value, simplex_error, FundSpec, InvestmentStrategy};
use crate::scenario::RegimeModel;

/// One realized future: gross returns per period and asset, and optionally the
/// discount rate used to value liabilities along it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestPath {
    /// `T × (N+1)`, row `i` is period `t = i + 1`.
    pub gross: Array2<f64>,
    pub rate: Option<f64>,
    pub seed: u64,
}

/// Realized series of one path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    /// Assets before flows over liabilities at each period; 0 once insolvent.
    pub funding_ratio: Vec<f64>,
    /// Portfolio return of each period; `None` once insolvent.
    pub fund_return: Vec<Option<f64>>,
    /// First period whose wealth after flows was not positive.
    pub insolvent_at: Option<usize>,
}

/// Runs `strategy` along every path.
///
/// At each decision moment the strategy's weights are applied to the realized
/// investable wealth, starting from the initial budget. At period `t` the
/// assets are `A_t = r_t'x̂_{t-1}`, the funding ratio is `A_t / L_t(γ)` and the
/// investable wealth is `A_t + w_t y_t - l_t`. A period whose planned holdings
/// are all zero is invested in cash. `fallback_rate` values liabilities on
/// paths without a rate.
pub fn simulate_out_of_sample(
    strategy: &InvestmentStrategy,
    spec: &FundSpec,
    paths: &[BacktestPath],
    fallback_rate: f64,
) -> Result<Vec<PathOutcome>> {
    let t_len = spec.horizon;
    let n = spec.n_assets;
    if strategy.allocations.dim() != (t_len, n) || strategy.contribution_rates.len() != t_len {
        return Err(AlmError::invalid("strategy does not match the fund horizon and assets"));
    }
    for (j, p) in paths.iter().enumerate() {
        if p.gross.dim() != (t_len, n) {
            return Err(AlmError::invalid(format!(
                "path {j} is {:?}, expected ({t_len}, {n})",
                p.gross.dim()
            )));
        }
        if p.gross.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(AlmError::invalid(format!("path {j} has a non-positive gross return")));
        }
    }
    let weights: Vec<Vec<f64>> = (0..t_len)
        .map(|i| {
            strategy.weights(i).unwrap_or_else(|| {
                let mut w = vec![0.0; n];
                w[0] = 1.0;
                w
            })
        })
        .collect();
    paths
        .par_iter()
        .map(|p| {
            let rate = p.rate.unwrap_or(fallback_rate);
            let liabilities = (0..t_len)
                .map(|i| present_value(&spec.benefits, rate, i))
                .collect::<Result<Vec<_>>>()?;
            let mut out = PathOutcome {
                funding_ratio: vec![0.0; t_len],
                fund_return: vec![None; t_len],
                insolvent_at: None,
            };
            let mut wealth = spec.initial_budget();
            if wealth <= 0.0 {
                out.insolvent_at = Some(0);
                return Ok(out);
            }
            for i in 0..t_len {
                let assets: f64 = (0..n).map(|a| p.gross[[i, a]] * weights[i][a] * wealth).sum();
                out.funding_ratio[i] = assets / liabilities[i];
                out.fund_return[i] = Some(assets / wealth - 1.0);
                if i + 1 < t_len {
                    wealth = assets + spec.wages[i] * strategy.contribution_rates[i] - spec.benefits[i];
                    if wealth <= 0.0 {
                        out.insolvent_at = Some(i + 1);
                        break;
                    }
                }
            }
            Ok(out)
        })
        .collect()
}

/// Per-period cross-path statistics of a set of outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutOfSampleSummary {
    pub mean_funding_ratio: Vec<f64>,
    pub std_funding_ratio: Vec<f64>,
    /// Mean over paths still solvent in that period; NaN if none are.
    pub mean_fund_return: Vec<f64>,
    pub std_fund_return: Vec<f64>,
    pub insolvency_rate: f64,
}

pub fn aggregate_outcomes(outcomes: &[PathOutcome]) -> Result<OutOfSampleSummary> {
    let first = outcomes
        .first()
        .ok_or_else(|| AlmError::InsufficientData("no simulated paths".into()))?;
    let t_len = first.funding_ratio.len();
    let mut s = OutOfSampleSummary {
        mean_funding_ratio: Vec::with_capacity(t_len),
        std_funding_ratio: Vec::with_capacity(t_len),
        mean_fund_return: Vec::with_capacity(t_len),
        std_fund_return: Vec::with_capacity(t_len),
        insolvency_rate: outcomes.iter().filter(|o| o.insolvent_at.is_some()).count() as f64
            / outcomes.len() as f64,
    };
    for i in 0..t_len {
        let fr: Vec<f64> = outcomes.iter().map(|o| o.funding_ratio[i]).collect();
        let ret: Vec<f64> = outcomes.iter().filter_map(|o| o.fund_return[i]).collect();
        let (m, sd) = mean_and_sample_std(&fr);
        s.mean_funding_ratio.push(m);
        s.std_funding_ratio.push(sd);
        let (m, sd) = if ret.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            mean_and_sample_std(&ret)
        };
        s.mean_fund_return.push(m);
        s.std_fund_return.push(sd);
    }
    Ok(s)
}

/// Paths whose regime in each period is drawn from `model.probs`, with GBM
/// returns of that regime's parameters. When `rates` is given each path also
/// draws a discount rate from `(rates, probs)`. Each path has its own stream.
pub fn generate_backtest_paths(
    model: &RegimeModel,
    periods: usize,
    n_paths: usize,
    risk_free_rate: f64,
    rates: Option<(&[f64], &[f64])>,
    seed: u64,
) -> Result<Vec<BacktestPath>> {
    if model.params.is_empty() || model.params.len() != model.probs.len() {
        return Err(AlmError::invalid("regime model needs one probability per regime"));
    }
    let regime = WeightedIndex::new(&model.probs)
        .map_err(|e| AlmError::invalid(format!("regime probabilities: {e}")))?;
    let rate_pick = match rates {
        Some((r, p)) if r.len() == p.len() && !r.is_empty() => Some((
            r.to_vec(),
            WeightedIndex::new(p).map_err(|e| AlmError::invalid(format!("rate probabilities: {e}")))?,
        )),
        Some(_) => return Err(AlmError::invalid("one probability per discount rate required")),
        None => None,
    };
    let n = model.params[0].n_risky() + 1;
    if model.params.iter().any(|p| p.n_risky() + 1 != n) {
        return Err(AlmError::invalid("regimes differ in asset count"));
    }
    Ok((0..n_paths)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((1u64 << 62) | j as u64);
            let mut gross = Array2::zeros((periods, n));
            for i in 0..periods {
                let p = &model.params[regime.sample(&mut rng)];
                gross[[i, 0]] = 1.0 + risk_free_rate;
                for a in 1..n {
                    let eps: f64 = rng.sample(StandardNormal);
                    gross[[i, a]] =
                        1.0 + p.drift[a - 1] * p.dt + p.volatility[a - 1] * eps * p.dt.sqrt();
                }
            }
            let rate = rate_pick.as_ref().map(|(r, w)| r[w.sample(&mut rng)]);
            BacktestPath {
                gross,
                rate,
                seed,
            }
        })
        .collect())
}

/// Herfindahl-Hirschman index `Σ w²` of a weight vector on the simplex.
pub fn hhi(weights: &[f64]) -> Result<f64> {
    if let Some(msg) = simplex_error(weights) {
        return Err(AlmError::Validation(format!("weights: {msg}")));
    }
    Ok(sum_of_squares(weights))
}

/// Compensated `Σ w²`: each product and partial sum carries its rounding error
/// forward, so the result is as accurate as a twice-as-precise evaluation.
fn sum_of_squares(xs: &[f64]) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for &x in xs {
        let p = x * x;
        let p_err = x.mul_add(x, -p);
        let next = sum + p;
        let z = next - sum;
        let s_err = (sum - (next - z)) + (p - z);
        sum = next;
        carry += p_err + s_err;
    }
    sum + carry
}

/// Mean HHI of the per-period weights, skipping periods with zero holdings.
pub fn average_hhi(strategy: &InvestmentStrategy) -> Result<f64> {
    let mut values = Vec::new();
    for i in 0..strategy.allocations.nrows() {
        match strategy.weights(i) {
            Some(w) => {
                if w.iter().any(|x| *x < -1e-9) {
                    return Err(AlmError::invalid(format!("negative holding in period {i}")));
                }
                let clipped: Vec<f64> = w.iter().map(|x| x.max(0.0)).collect();
                let total: f64 = clipped.iter().sum();
                values.push(hhi(&clipped.iter().map(|x| x / total).collect::<Vec<_>>())?);
            }
            None => log::warn!("decision moment {i} holds nothing; skipped in average HHI"),
        }
    }
    if values.is_empty() {
        return Err(AlmError::InsufficientData("no period with positive holdings".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Unequal variances, Welch-Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Pooled variance, `n_a + n_b - 2` degrees of freedom.
    Pooled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

/// Mean and sum of squared deviations, centred on the first sample.
fn centred(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let origin = xs[0];
    let shift = xs.iter().map(|x| x - origin).sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - origin - shift).powi(2)).sum::<f64>();
    (origin + shift, ss)
}

fn sample_moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let (mean, ss) = centred(xs);
    (n, mean, ss / (n - 1.0))
}

fn mean_and_sample_std(xs: &[f64]) -> (f64, f64) {
    if xs.len() < 2 {
        return (xs.iter().sum::<f64>() / xs.len() as f64, 0.0);
    }
    let (_, m, v) = sample_moments(xs);
    (m, v.sqrt())
}

fn finish(diff: f64, se2: f64, df: f64) -> Result<TTest> {
    if se2 == 0.0 {
        return Ok(if diff == 0.0 {
            TTest { t: 0.0, p: 1.0, df }
        } else {
            TTest {
                t: diff.signum() * f64::INFINITY,
                p: 0.0,
                df,
            }
        });
    }
    let t = diff / se2.sqrt();
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| AlmError::invalid(format!("Student t with {df} degrees of freedom: {e}")))?;
    let p = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok(TTest { t, p, df })
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(AlmError::InsufficientData("each sample needs at least two points".into()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(AlmError::invalid("samples must be finite"));
    }
    Ok(())
}

/// Two-sided two-sample t-test of `mean(a) = mean(b)` with unequal variances.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    check_samples(a, b)?;
    let (na, ma, va) = sample_moments(a);
    let (nb, mb, vb) = sample_moments(b);
    let (qa, qb) = (va / na, vb / nb);
    let df = if qa + qb > 0.0 {
        (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0))
    } else {
        na + nb - 2.0
    };
    finish(ma - mb, qa + qb, df)
}

/// Two-sided two-sample t-test of `mean(a) = mean(b)` with a pooled variance.
pub fn pooled_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    check_samples(a, b)?;
    let (na, ma, va) = sample_moments(a);
    let (nb, mb, vb) = sample_moments(b);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    finish(ma - mb, pooled * (1.0 / na + 1.0 / nb), df)
}

pub fn t_test(kind: TestKind, a: &[f64], b: &[f64]) -> Result<TTest> {
    match kind {
        TestKind::Welch => welch_t_test(a, b),
        TestKind::Pooled => pooled_t_test(a, b),
    }
}

/// Per-period series of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSeries {
    pub model: String,
    pub funding_ratio: Vec<f64>,
    pub fund_return: Vec<f64>,
    pub average_hhi: Option<f64>,
    pub insolvency_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricColumn {
    pub model: String,
    pub values: Vec<f64>,
    pub average: f64,
    /// Population standard deviation over periods.
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub first: String,
    pub second: String,
    pub t: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    pub average_hhi: Option<f64>,
    pub insolvency_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub periods: usize,
    pub test_kind: TestKind,
    pub funding_ratio: Vec<MetricColumn>,
    pub fund_return: Vec<MetricColumn>,
    pub funding_ratio_tests: Vec<PairwiseTest>,
    pub fund_return_tests: Vec<PairwiseTest>,
    pub models: Vec<ModelMetrics>,
}

fn column(model: &str, values: &[f64]) -> MetricColumn {
    let (average, ss) = centred(values);
    let std = (ss / values.len() as f64).sqrt();
    MetricColumn {
        model: model.to_string(),
        values: values.to_vec(),
        average,
        std,
    }
}

fn pairwise(columns: &[MetricColumn], kind: TestKind) -> Result<Vec<PairwiseTest>> {
    let mut out = Vec::new();
    for (i, a) in columns.iter().enumerate() {
        for b in &columns[i + 1..] {
            let r = t_test(kind, &a.values, &b.values)?;
            out.push(PairwiseTest {
                first: a.model.clone(),
                second: b.model.clone(),
                t: r.t,
                p: r.p,
            });
        }
    }
    Ok(out)
}

/// Averages, spreads and pairwise tests over the per-period series, with pairs
/// in the order the models are given (first with each later one, and so on).
pub fn summarize(series: &[ModelSeries], kind: TestKind) -> Result<EvaluationReport> {
    let first = series
        .first()
        .ok_or_else(|| AlmError::InsufficientData("no model series".into()))?;
    let periods = first.funding_ratio.len();
    if periods == 0
        || series
            .iter()
            .any(|s| s.funding_ratio.len() != periods || s.fund_return.len() != periods)
    {
        return Err(AlmError::invalid("model series must share a nonzero horizon"));
    }
    let funding_ratio: Vec<MetricColumn> =
        series.iter().map(|s| column(&s.model, &s.funding_ratio)).collect();
    let fund_return: Vec<MetricColumn> =
        series.iter().map(|s| column(&s.model, &s.fund_return)).collect();
    let (funding_ratio_tests, fund_return_tests) = if series.len() > 1 && periods > 1 {
        (pairwise(&funding_ratio, kind)?, pairwise(&fund_return, kind)?)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(EvaluationReport {
        periods,
        test_kind: kind,
        funding_ratio,
        fund_return,
        funding_ratio_tests,
        fund_return_tests,
        models: series
            .iter()
            .map(|s| ModelMetrics {
                model: s.model.clone(),
                average_hhi: s.average_hhi,
                insolvency_rate: s.insolvency_rate,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hhi_examples() {
        assert_eq!(hhi(&[0.1; 10]).unwrap(), 0.1);
        assert_eq!(hhi(&[0.2; 5]).unwrap(), 0.2);
        assert!((hhi(&[0.5, 0.3, 0.2]).unwrap() - 0.38).abs() < 1e-15);
        assert_eq!(hhi(&[1.0]).unwrap(), 1.0);
        assert!(hhi(&[0.5, 0.4]).is_err());
    }

    #[test]
    fn degenerate_t_tests() {
        let a = [2.0, 2.0, 2.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
        let r = pooled_t_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!((r.t, r.p), (f64::NEG_INFINITY, 0.0));
    }
}

//! Regime-conditioned return simulation, k-means regime classification and
//! reduction of simulated paths to representative scenarios.

use std::io::{Read, Write};

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlmError, Result};
use crate::fund::{simplex_error, ReturnScenarios};

/// Per-period drift and volatility of the risky assets (indices `1..=N`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub drift: Vec<f64>,
    pub volatility: Vec<f64>,
    pub dt: f64,
}

impl GbmParams {
    pub fn n_risky(&self) -> usize {
        self.drift.len()
    }

    fn check(&self) -> Result<()> {
        if self.drift.len() != self.volatility.len() {
            return Err(AlmError::invalid("drift and volatility lengths differ"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(AlmError::invalid(format!("time step {} must be positive", self.dt)));
        }
        if self.drift.iter().any(|m| !m.is_finite())
            || self.volatility.iter().any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(AlmError::invalid("non-finite drift or negative volatility"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeModel {
    pub names: Vec<String>,
    pub params: Vec<GbmParams>,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub paths: usize,
    pub seed: u64,
    pub periods: usize,
    /// Per-period return of the cash asset at index 0.
    pub risk_free_rate: f64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simple returns `μΔt + σε√Δt` for `paths × periods × (1 + N)`; column 0 is cash.
///
/// Every path draws from its own ChaCha stream keyed by `(regime, path)`, so the
/// output does not depend on thread count or scheduling.
pub fn simulate_paths(
    params: &GbmParams,
    config: &SimulationConfig,
    regime: usize,
) -> Result<Array3<f64>> {
    params.check()?;
    if config.paths == 0 || config.periods == 0 {
        return Err(AlmError::invalid("need at least one path and one period"));
    }
    if !config.risk_free_rate.is_finite() {
        return Err(AlmError::invalid("non-finite risk-free rate"));
    }
    let n = params.n_risky() + 1;
    let t_len = config.periods;
    let sqrt_dt = params.dt.sqrt();
    let rows: Vec<Vec<f64>> = (0..config.paths)
        .into_par_iter()
        .map(|m| {
            let mut rng = stream_rng(config.seed, ((regime as u64) << 40) | m as u64);
            let mut out = Vec::with_capacity(t_len * n);
            for _ in 0..t_len {
                out.push(config.risk_free_rate);
                for (mu, sigma) in params.drift.iter().zip(&params.volatility) {
                    let eps: f64 = rng.sample(StandardNormal);
                    out.push(mu * params.dt + sigma * eps * sqrt_dt);
                }
            }
            out
        })
        .collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array3::from_shape_vec((config.paths, t_len, n), flat).expect("shape matches"))
}

/// `r[i, k, n] = 1 + mean over paths of regime k`, with `q⁰ = probs`.
pub fn reduce_scenarios(raw: &[Array3<f64>], probs: &[f64]) -> Result<ReturnScenarios> {
    let first = raw
        .first()
        .ok_or_else(|| AlmError::InsufficientData("no regimes to reduce".into()))?;
    let (_, t_len, n) = first.dim();
    if raw.iter().any(|a| a.is_empty()) {
        return Err(AlmError::InsufficientData("a regime has no simulated paths".into()));
    }
    if raw.iter().any(|a| a.dim().1 != t_len || a.dim().2 != n) {
        return Err(AlmError::invalid("regimes simulated over different shapes"));
    }
    if probs.len() != raw.len() {
        return Err(AlmError::invalid(format!(
            "{} regime probabilities for {} regimes",
            probs.len(),
            raw.len()
        )));
    }
    if let Some(msg) = simplex_error(probs) {
        return Err(AlmError::Validation(format!("regime probabilities: {msg}")));
    }
    let mut gross = Array3::zeros((t_len, raw.len(), n));
    for (k, a) in raw.iter().enumerate() {
        let mean = a.mean_axis(Axis(0)).expect("nonempty");
        for i in 0..t_len {
            for j in 0..n {
                gross[[i, k, j]] = 1.0 + mean[[i, j]];
            }
        }
    }
    Ok(ReturnScenarios {
        gross,
        probs: probs.to_vec(),
    })
}

/// Empirical label frequencies, one entry per label in `0..=max(labels)`.
pub fn regime_probabilities(labels: &[usize]) -> Result<Vec<f64>> {
    let max = labels
        .iter()
        .max()
        .ok_or_else(|| AlmError::InsufficientData("no labels".into()))?;
    let mut counts = vec![0usize; max + 1];
    for &l in labels {
        counts[l] += 1;
    }
    let total = labels.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Equal-weighted index return of each row of a `time × assets` matrix.
pub fn equal_weight_index(returns: ArrayView2<'_, f64>) -> Vec<f64> {
    returns
        .rows()
        .into_iter()
        .map(|r| r.mean().unwrap_or(0.0))
        .collect()
}

/// Normalized `(mean, std)` features of consecutive non-overlapping windows.
pub fn window_features(series: &[f64], window: usize, long_term: (f64, f64)) -> Vec<[f64; 2]> {
    let (lt_mean, lt_std) = long_term;
    let scale = if lt_std > 0.0 { lt_std } else { 1.0 };
    series
        .chunks_exact(window)
        .map(|w| {
            let (m, s) = mean_std(w);
            [(m - lt_mean) / scale, s / scale]
        })
        .collect()
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

struct Clustering {
    labels: Vec<usize>,
    centroids: Vec<[f64; 2]>,
    wcss: f64,
}

fn kmeans_once(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Clustering {
    // k-means++ seeding
    let mut centroids = vec![points[rng.gen_range(0..points.len())]];
    while centroids.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centroids.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, di) in d.iter().enumerate() {
                if u < *di {
                    pick = i;
                    break;
                }
                u -= di;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        centroids.push(points[next]);
    }

    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..300 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            for c in 1..k {
                if dist2(p, &centroids[c]) < dist2(p, &centroids[best]) {
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&[f64; 2]> = points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p)
                .collect();
            if !members.is_empty() {
                let m = members.len() as f64;
                *centroid = [
                    members.iter().map(|p| p[0]).sum::<f64>() / m,
                    members.iter().map(|p| p[1]).sum::<f64>() / m,
                ];
            }
        }
    }
    let wcss = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| dist2(p, &centroids[l]))
        .sum();
    Clustering {
        labels,
        centroids,
        wcss,
    }
}

pub const KMEANS_RESTARTS: usize = 100;

/// Labels each non-overlapping window of the equal-weighted index with a regime.
///
/// Features are the window mean and standard deviation normalized by the
/// long-term `(mean, std)`. The best of [`KMEANS_RESTARTS`] k-means++ runs (lowest
/// within-cluster sum of squares, earliest restart on ties) is kept and labels
/// are ordered by descending centroid mean/volatility ratio.
pub fn classify_regimes(
    returns: ArrayView2<'_, f64>,
    window: usize,
    regimes: usize,
    long_term: (f64, f64),
    seed: u64,
) -> Result<Vec<usize>> {
    if window < 2 {
        return Err(AlmError::invalid(format!("window {window} must be at least 2")));
    }
    if regimes == 0 {
        return Err(AlmError::invalid("at least one regime is required"));
    }
    let index = equal_weight_index(returns);
    let points = window_features(&index, window, long_term);
    if points.len() < regimes {
        return Err(AlmError::InsufficientData(format!(
            "{} windows of length {window} for {regimes} regimes",
            points.len()
        )));
    }
    let mut best: Option<Clustering> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = stream_rng(seed, restart as u64);
        let c = kmeans_once(&points, regimes, &mut rng);
        if best.as_ref().is_none_or(|b| c.wcss < b.wcss) {
            best = Some(c);
        }
    }
    let best = best.expect("at least one restart");

    let (lt_mean, lt_std) = long_term;
    let scale = if lt_std > 0.0 { lt_std } else { 1.0 };
    let ratio = |c: &[f64; 2]| {
        let mean = c[0] * scale + lt_mean;
        let vol = c[1] * scale;
        if vol > 0.0 {
            mean / vol
        } else {
            mean.signum() * f64::INFINITY
        }
    };
    let mut order: Vec<usize> = (0..regimes).collect();
    order.sort_by(|&a, &b| {
        ratio(&best.centroids[b])
            .partial_cmp(&ratio(&best.centroids[a]))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut relabel = vec![0; regimes];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    Ok(best.labels.iter().map(|&l| relabel[l]).collect())
}

/// Per-regime drift and volatility of every risky asset (columns `1..`), estimated
/// from the windows carrying each label. Regimes without windows get zeros.
pub fn estimate_regime_params(
    returns: ArrayView2<'_, f64>,
    window: usize,
    labels: &[usize],
    regimes: usize,
) -> Result<Vec<GbmParams>> {
    let n = returns.ncols();
    if n < 2 {
        return Err(AlmError::invalid("need cash plus at least one risky asset"));
    }
    if labels.len() * window > returns.nrows() {
        return Err(AlmError::InsufficientData("more labels than windows".into()));
    }
    let mut out = Vec::with_capacity(regimes);
    for r in 0..regimes {
        let rows: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == r)
            .flat_map(|(w, _)| w * window..(w + 1) * window)
            .collect();
        let mut drift = Vec::with_capacity(n - 1);
        let mut vol = Vec::with_capacity(n - 1);
        for j in 1..n {
            let xs: Vec<f64> = rows.iter().map(|&i| returns[[i, j]]).collect();
            let (m, s) = if xs.is_empty() { (0.0, 0.0) } else { mean_std(&xs) };
            drift.push(m);
            vol.push(s);
        }
        out.push(GbmParams {
            drift,
            volatility: vol,
            dt: 1.0,
        });
    }
    Ok(out)
}

/// Synthetic history of `windows × window` rows. Window regimes are drawn so that
/// regime `r` occupies exactly `round(probs[r] · windows)` windows (remainder to
/// the last regime), in shuffled order. Returns the history and true labels.
pub fn synthetic_history(
    model: &RegimeModel,
    windows: usize,
    window: usize,
    risk_free_rate: f64,
    seed: u64,
) -> Result<(Array2<f64>, Vec<usize>)> {
    let r_len = model.params.len();
    if r_len == 0 || model.probs.len() != r_len {
        return Err(AlmError::invalid("regime model needs one probability per regime"));
    }
    for p in &model.params {
        p.check()?;
    }
    let n = model.params[0].n_risky() + 1;
    let mut labels = Vec::with_capacity(windows);
    for (r, p) in model.probs.iter().enumerate() {
        let count = if r + 1 == r_len {
            windows.saturating_sub(labels.len())
        } else {
            ((p * windows as f64).round() as usize).min(windows - labels.len())
        };
        labels.extend(std::iter::repeat_n(r, count));
    }
    let mut rng = stream_rng(seed, u64::MAX);
    labels.shuffle(&mut rng);

    let mut hist = Array2::zeros((windows * window, n));
    for (w, &r) in labels.iter().enumerate() {
        let p = &model.params[r];
        for i in w * window..(w + 1) * window {
            hist[[i, 0]] = risk_free_rate;
            for j in 1..n {
                let eps: f64 = rng.sample(StandardNormal);
                hist[[i, j]] = p.drift[j - 1] * p.dt + p.volatility[j - 1] * eps * p.dt.sqrt();
            }
        }
    }
    Ok((hist, labels))
}

/// Reads a `time × assets` return matrix: header of asset names, one row per step.
pub fn read_returns_csv<R: Read>(reader: R) -> Result<(Vec<String>, Array2<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut flat = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != names.len() {
            return Err(AlmError::invalid(format!(
                "row {} has {} fields, header has {}",
                rows + 1,
                rec.len(),
                names.len()
            )));
        }
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                AlmError::invalid(format!("row {}: `{field}` is not a number", rows + 1))
            })?;
            if !v.is_finite() {
                return Err(AlmError::invalid(format!("row {}: non-finite value", rows + 1)));
            }
            flat.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(AlmError::InsufficientData("return file has no rows".into()));
    }
    let m = Array2::from_shape_vec((rows, names.len()), flat).expect("rectangular");
    Ok((names, m))
}

pub fn write_returns_csv<W: Write>(writer: W, names: &[String], returns: ArrayView2<'_, f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(names)?;
    for row in returns.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes scenario returns as net returns, one row per `(period, scenario)` using
/// the historical schema plus leading `period,scenario` columns.
pub fn write_scenarios_csv<W: Write>(writer: W, names: &[String], rs: &ReturnScenarios) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["period".to_string(), "scenario".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for i in 0..rs.n_periods() {
        for k in 0..rs.n_scenarios() {
            let mut rec = vec![(i + 1).to_string(), (k + 1).to_string()];
            rec.extend(rs.at(i, k).iter().map(|g| (g - 1.0).to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Probability sidecar: `scenario,probability`.
pub fn write_probabilities_csv<W: Write>(writer: W, probs: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scenario", "probability"])?;
    for (k, p) in probs.iter().enumerate() {
        w.write_record([(k + 1).to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back the pair written by [`write_scenarios_csv`] and [`write_probabilities_csv`].
pub fn read_scenarios_csv<R: Read, P: Read>(returns: R, probs: P) -> Result<ReturnScenarios> {
    let (names, m) = read_returns_csv(returns)?;
    if names.len() < 3 || names[0] != "period" || names[1] != "scenario" {
        return Err(AlmError::invalid("scenario file must start with period,scenario columns"));
    }
    let (_, p) = read_returns_csv(probs)?;
    let probs: Vec<f64> = p.column(1).to_vec();
    let k_len = probs.len();
    let n = names.len() - 2;
    if m.nrows() % k_len != 0 {
        return Err(AlmError::invalid("scenario rows do not fill whole periods"));
    }
    let t_len = m.nrows() / k_len;
    let mut gross = Array3::zeros((t_len, k_len, n));
    for row in m.rows() {
        let i = row[0] as usize - 1;
        let k = row[1] as usize - 1;
        if i >= t_len || k >= k_len {
            return Err(AlmError::invalid("scenario index out of range"));
        }
        for j in 0..n {
            gross[[i, k, j]] = 1.0 + row[j + 2];
        }
    }
    Ok(ReturnScenarios { gross, probs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mu: f64, sigma: f64, n: usize) -> GbmParams {
        GbmParams {
            drift: vec![mu; n],
            volatility: vec![sigma; n],
            dt: 1.0,
        }
    }

    #[test]
    fn zero_volatility_is_pure_drift() {
        let cfg = SimulationConfig {
            paths: 7,
            seed: 3,
            periods: 4,
            risk_free_rate: 0.002,
        };
        let a = simulate_paths(&params(0.01, 0.0, 3), &cfg, 0).unwrap();
        assert_eq!(a.dim(), (7, 4, 4));
        for m in 0..7 {
            for t in 0..4 {
                assert_eq!(a[[m, t, 0]], 0.002);
                for n in 1..4 {
                    assert_eq!(a[[m, t, n]], 0.01);
                }
            }
        }
    }

    #[test]
    fn regimes_use_distinct_streams() {
        let cfg = SimulationConfig {
            paths: 3,
            seed: 9,
            periods: 2,
            risk_free_rate: 0.0,
        };
        let a = simulate_paths(&params(0.0, 0.1, 2), &cfg, 0).unwrap();
        let b = simulate_paths(&params(0.0, 0.1, 2), &cfg, 1).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn non_finite_parameters_are_rejected() {
        let cfg = SimulationConfig {
            paths: 1,
            seed: 0,
            periods: 1,
            risk_free_rate: 0.0,
        };
        assert!(simulate_paths(&params(f64::NAN, 0.1, 1), &cfg, 0).is_err());
        assert!(simulate_paths(&params(0.0, -0.1, 1), &cfg, 0).is_err());
    }

    #[test]
    fn probabilities_from_labels() {
        assert_eq!(regime_probabilities(&[0, 0, 1, 1]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(regime_probabilities(&[0, 0, 0]).unwrap(), vec![1.0]);
        assert!(regime_probabilities(&[]).is_err());
    }

    #[test]
    fn reduce_rejects_empty_input() {
        assert!(reduce_scenarios(&[], &[]).is_err());
        let empty = Array3::<f64>::zeros((0, 2, 2));
        assert!(reduce_scenarios(&[empty], &[1.0]).is_err());
    }

    #[test]
    fn scenario_csv_round_trip() {
        let rs = ReturnScenarios {
            gross: Array3::from_shape_fn((2, 3, 2), |(i, k, n)| 1.0 + 0.01 * (i + k + n) as f64),
            probs: vec![0.2, 0.3, 0.5],
        };
        let names = vec!["CASH".to_string(), "EQ".to_string()];
        let mut a = Vec::new();
        let mut p = Vec::new();
        write_scenarios_csv(&mut a, &names, &rs).unwrap();
        write_probabilities_csv(&mut p, &rs.probs).unwrap();
        let back = read_scenarios_csv(a.as_slice(), p.as_slice()).unwrap();
        assert_eq!(back.probs, rs.probs);
        for (x, y) in back.gross.iter().zip(rs.gross.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}

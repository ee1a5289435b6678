//! Files written by a run, each recorded in the manifest with its SHA-256.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use alm_core::conic::SolveStatus;
use alm_core::evaluation::{EvaluationReport, MetricColumn, PairwiseTest};
use alm_core::formulations::ModelKind;
use alm_core::fund::{DiscountScenarios, InvestmentStrategy};
use alm_core::scenario::{write_probabilities_csv, write_scenarios_csv};
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::pipeline::{ordered_models, Cell, Prepared};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const SOLVER: &str = "clarabel 0.11.1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStatus {
    pub model: ModelKind,
    pub psi: f64,
    pub status: SolveStatus,
    pub binding_period: Option<usize>,
    pub iterations: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub scenarios: u64,
    pub synthetic_history: Option<u64>,
    pub evaluation: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    pub seeds: Seeds,
    pub solver: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    /// `running`, `complete` or `failed`.
    pub state: String,
    pub cells: Vec<CellStatus>,
    pub artifacts: Vec<ArtifactEntry>,
}

/// Writes files under one output directory and remembers their hashes.
pub struct ArtifactWriter {
    root: PathBuf,
    manifest: RunManifest,
}

impl ArtifactWriter {
    /// Creates the directory and writes the initial manifest.
    pub fn start(root: &Path, command: &str, config_bytes: &[u8], seeds: Seeds) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let w = Self {
            root: root.to_path_buf(),
            manifest: RunManifest {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                config_sha256: sha256_hex(config_bytes),
                seeds,
                solver: SOLVER.to_string(),
                started_unix: now(),
                finished_unix: None,
                state: "running".into(),
                cells: Vec::new(),
                artifacts: Vec::new(),
            },
        };
        w.write_manifest()?;
        Ok(w)
    }

    /// Continues an existing run directory, recording `report` as the command.
    pub fn resume(root: &Path, mut manifest: RunManifest) -> Result<Self> {
        manifest.command = "report".into();
        manifest.state = "running".into();
        manifest.finished_unix = None;
        let w = Self {
            root: root.to_path_buf(),
            manifest,
        };
        w.write_manifest()?;
        Ok(w)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn write_manifest(&self) -> Result<()> {
        let path = self.root.join("manifest.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&self.manifest)?)
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.artifacts.retain(|a| a.path != rel);
        self.manifest.artifacts.push(ArtifactEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn record_cells(&mut self, cells: &[Cell]) {
        self.manifest.cells = cells
            .iter()
            .map(|c| CellStatus {
                model: c.model,
                psi: c.psi,
                status: c.outcome.status,
                binding_period: c.outcome.binding_period,
                iterations: c.outcome.diagnostics.iterations,
            })
            .collect();
    }

    pub fn finish(mut self, ok: bool) -> Result<RunManifest> {
        self.manifest.finished_unix = Some(now());
        self.manifest.state = if ok { "complete" } else { "failed" }.into();
        self.write_manifest()?;
        Ok(self.manifest)
    }
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn psi_tag(psi: f64) -> String {
    format!("psi{psi}")
}

/// Scenario inputs: reduced returns, regime probabilities and parameters, discounting.
pub fn scenario_files(prep: &Prepared) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    let mut buf = Vec::new();
    write_scenarios_csv(&mut buf, &prep.asset_names, &prep.returns)?;
    out.push(("scenarios/returns.csv".to_string(), buf));
    let mut buf = Vec::new();
    write_probabilities_csv(&mut buf, &prep.returns.probs)?;
    out.push(("scenarios/regime_probabilities.csv".to_string(), buf));

    let header: Vec<String> = ["regime", "name", "asset", "drift", "volatility"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for (k, p) in prep.regimes.params.iter().enumerate() {
        for (j, (m, s)) in p.drift.iter().zip(&p.volatility).enumerate() {
            rows.push(vec![
                k.to_string(),
                prep.regimes.names[k].clone(),
                prep.asset_names[j + 1].clone(),
                num(*m),
                num(*s),
            ]);
        }
    }
    out.push(("scenarios/regime_params.csv".to_string(), csv_bytes(&header, &rows)?));
    out.push(("scenarios/discount.csv".to_string(), discount_csv(&prep.discount)?));
    Ok(out)
}

fn discount_csv(ds: &DiscountScenarios) -> Result<Vec<u8>> {
    let header: Vec<String> = ["period", "scenario", "rate", "probability", "discounted_wage", "liability_pv"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for i in 0..ds.n_periods() {
        for s in 0..ds.n_scenarios() {
            rows.push(vec![
                (i + 1).to_string(),
                s.to_string(),
                num(ds.rates[s]),
                num(ds.probs[s]),
                num(ds.wages_pv[[i, s]]),
                num(ds.liabilities_pv[[i, s]]),
            ]);
        }
    }
    csv_bytes(&header, &rows)
}

/// Allocation rows by decision moment, with the contribution rate of the period ahead.
pub fn strategy_csv(names: &[String], s: &InvestmentStrategy) -> Result<Vec<u8>> {
    let mut header = vec!["decision_moment".to_string(), "contribution_rate".to_string()];
    header.extend(names.iter().cloned());
    let rows: Vec<Vec<String>> = (0..s.allocations.nrows())
        .map(|i| {
            let mut r = vec![i.to_string(), num(s.contribution_rates[i])];
            r.extend(s.allocations.row(i).iter().map(|v| num(*v)));
            r
        })
        .collect();
    csv_bytes(&header, &rows)
}

fn cell_text(c: &Cell) -> String {
    match (&c.outcome.strategy, c.outcome.status) {
        (Some(s), _) => num(s.average_contribution_rate()),
        (None, SolveStatus::Infeasible) => match c.outcome.binding_period {
            Some(t) => format!("infeasible (t={t})"),
            None => "infeasible".into(),
        },
        (None, status) => status.to_string(),
    }
}

/// One row per ψ, one column per model: the horizon-average contribution rate.
pub fn contribution_table(models: &[ModelKind], psis: &[f64], cells: &[Cell]) -> Result<Vec<u8>> {
    let models = ordered_models(models);
    let mut header = vec!["psi".to_string()];
    header.extend(models.iter().map(|m| m.label().to_string()));
    let rows: Vec<Vec<String>> = psis
        .iter()
        .map(|psi| {
            let mut r = vec![num(*psi)];
            for m in &models {
                r.push(
                    cells
                        .iter()
                        .find(|c| c.model == *m && c.psi == *psi)
                        .map(cell_text)
                        .unwrap_or_default(),
                );
            }
            r
        })
        .collect();
    csv_bytes(&header, &rows)
}

/// Every y_t of every solved cell.
pub fn contribution_raw(psis: &[f64], cells: &[Cell]) -> Result<Vec<u8>> {
    let header: Vec<String> = ["model", "psi", "period", "contribution_rate"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for c in cells.iter().filter(|c| psis.contains(&c.psi)) {
        if let Some(s) = &c.outcome.strategy {
            for (i, y) in s.contribution_rates.iter().enumerate() {
                rows.push(vec![c.model.label().into(), num(c.psi), (i + 1).to_string(), num(*y)]);
            }
        }
    }
    csv_bytes(&header, &rows)
}

/// Periods plus Average and Std rows; two columns (funding ratio, fund return) per model.
pub fn out_of_sample_table(r: &EvaluationReport) -> Result<Vec<u8>> {
    let mut header = vec!["decision_moment".to_string()];
    for (fr, ret) in r.funding_ratio.iter().zip(&r.fund_return) {
        header.push(format!("{}_funding_ratio", fr.model));
        header.push(format!("{}_fund_return", ret.model));
    }
    let pick = |f: &dyn Fn(&MetricColumn) -> f64| -> Vec<String> {
        r.funding_ratio
            .iter()
            .zip(&r.fund_return)
            .flat_map(|(a, b)| [num(f(a)), num(f(b))])
            .collect()
    };
    let mut rows = Vec::new();
    for i in 0..r.periods {
        let mut row = vec![(i + 1).to_string()];
        row.extend(pick(&|c| c.values[i]));
        rows.push(row);
    }
    let mut avg = vec!["Average".to_string()];
    avg.extend(pick(&|c| c.average));
    rows.push(avg);
    let mut std = vec!["Std".to_string()];
    std.extend(pick(&|c| c.std));
    rows.push(std);
    csv_bytes(&header, &rows)
}

pub fn pairwise_table(tests: &[PairwiseTest]) -> Result<Vec<u8>> {
    let header: Vec<String> = ["comparison", "t_statistic", "p_value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = tests
        .iter()
        .map(|t| vec![format!("{} vs {}", t.first, t.second), num(t.t), num(t.p)])
        .collect();
    csv_bytes(&header, &rows)
}

pub fn hhi_table(r: &EvaluationReport) -> Result<Vec<u8>> {
    let header: Vec<String> = ["model", "average_hhi", "insolvency_rate"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = r
        .models
        .iter()
        .map(|m| {
            vec![
                m.model.clone(),
                m.average_hhi.map(num).unwrap_or_default(),
                num(m.insolvency_rate),
            ]
        })
        .collect();
    csv_bytes(&header, &rows)
}

/// `model, period, metric, value` rows for plotting.
pub fn plot_long(r: &EvaluationReport) -> Result<Vec<u8>> {
    let header: Vec<String> = ["model", "period", "metric", "value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for (metric, cols) in [("funding_ratio", &r.funding_ratio), ("fund_return", &r.fund_return)] {
        for c in cols {
            for (i, v) in c.values.iter().enumerate() {
                rows.push(vec![c.model.clone(), (i + 1).to_string(), metric.into(), num(*v)]);
            }
        }
    }
    csv_bytes(&header, &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContributionEntry {
    pub model: ModelKind,
    pub psi: f64,
    pub status: SolveStatus,
    pub average_contribution_rate: Option<f64>,
    pub contribution_rates: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub binding_period: Option<usize>,
}

/// Versioned JSON summary of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub evaluation_psi: f64,
    pub contributions: Vec<ContributionEntry>,
    pub evaluation: Option<EvaluationReport>,
}

impl RunReport {
    pub fn new(evaluation_psi: f64, cells: &[Cell], evaluation: Option<EvaluationReport>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            evaluation_psi,
            contributions: cells
                .iter()
                .map(|c| ContributionEntry {
                    model: c.model,
                    psi: c.psi,
                    status: c.outcome.status,
                    average_contribution_rate: c.outcome.strategy.as_ref().map(|s| s.average_contribution_rate()),
                    contribution_rates: c.outcome.strategy.as_ref().map(|s| s.contribution_rates.clone()),
                    objective: c.outcome.strategy.as_ref().map(|s| s.objective_value),
                    binding_period: c.outcome.binding_period,
                })
                .collect(),
            evaluation,
        }
    }
}

/// All evaluation tables of a report, by relative path.
pub fn evaluation_files(r: &EvaluationReport) -> Result<Vec<(String, Vec<u8>)>> {
    Ok(vec![
        ("out_of_sample.csv".into(), out_of_sample_table(r)?),
        ("pairwise_funding_ratio.csv".into(), pairwise_table(&r.funding_ratio_tests)?),
        ("pairwise_fund_return.csv".into(), pairwise_table(&r.fund_return_tests)?),
        ("hhi.csv".into(), hhi_table(r)?),
        ("plot_long.csv".into(), plot_long(r)?),
    ])
}

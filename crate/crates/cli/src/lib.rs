//! Configuration-driven experiments: scenario generation, model solves over a
//! ψ sweep, out-of-sample evaluation and result tables.

pub mod artifacts;
pub mod config;
pub mod pipeline;

use std::path::{Path, PathBuf};

use alm_core::evaluation::{summarize, ModelSeries, TestKind};
use alm_core::formulations::ModelKind;
use anyhow::{bail, Context, Result};

use artifacts::{
    contribution_raw, contribution_table, evaluation_files, psi_tag, scenario_files, strategy_csv,
    ArtifactWriter, RunManifest, RunReport, Seeds,
};
use config::{load_config, DataConfig, ExperimentConfig};
use pipeline::{evaluate, prepare, solve_grid, Cell};

/// Command-line overrides of the configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub models: Option<Vec<ModelKind>>,
    pub psi: Option<Vec<f64>>,
    pub jobs: Option<usize>,
    pub test: Option<TestKind>,
}

/// A loaded configuration with overrides applied.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
}

pub fn load(path: &Path, o: &Overrides) -> Result<Loaded> {
    let mut config = load_config(path)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if let Some(seed) = o.seed {
        config.scenarios.seed = seed;
        config.evaluation.seed = seed;
    }
    if let Some(m) = &o.models {
        config.models = m.clone();
    }
    if let Some(p) = &o.psi {
        config.psi = p.clone();
    }
    if let Some(t) = o.test {
        config.evaluation.test = t;
    }
    let errs = config.problems(&base_dir);
    if !errs.is_empty() {
        bail!("configuration after overrides:\n  - {}", errs.join("\n  - "));
    }
    let out_dir = match &o.out {
        Some(p) => p.clone(),
        None => base_dir.join(&config.output_dir),
    };
    Ok(Loaded {
        config,
        base_dir,
        out_dir,
    })
}

/// Runs `f` on a pool of `jobs` threads, or the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .context("building thread pool")?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn seeds(cfg: &ExperimentConfig) -> Seeds {
    Seeds {
        scenarios: cfg.scenarios.seed,
        synthetic_history: match &cfg.data {
            DataConfig::Synthetic(s) => Some(s.seed),
            DataConfig::Csv { .. } => None,
        },
        evaluation: cfg.evaluation.seed,
    }
}

fn config_bytes(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    Ok(toml::to_string(cfg)?.into_bytes())
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub ok: bool,
    pub out_dir: PathBuf,
    pub cells: Vec<Cell>,
    pub report: RunReport,
    pub manifest: RunManifest,
}

/// Full sweep: every model at every ψ, then evaluation at the configured ψ.
pub fn run_experiment(l: &Loaded, jobs: Option<usize>) -> Result<RunOutcome> {
    let cfg = &l.config;
    let mut w = ArtifactWriter::start(&l.out_dir, "experiment", &config_bytes(cfg)?, seeds(cfg))?;
    let result = with_jobs(jobs, || -> Result<_> {
        let prep = prepare(cfg, &l.base_dir)?;
        let mut psis = cfg.psi.clone();
        if !psis.contains(&cfg.evaluation.psi) {
            psis.push(cfg.evaluation.psi);
        }
        let cells = solve_grid(cfg, &prep, &cfg.models, &psis)?;
        let (_, report) = evaluate(cfg, &prep, &cells, cfg.evaluation.test)?;
        Ok((prep, cells, report))
    })?;
    let (prep, cells, evaluation) = match result {
        Ok(r) => r,
        Err(e) => {
            w.finish(false)?;
            return Err(e);
        }
    };
    for (rel, bytes) in scenario_files(&prep)? {
        w.write(&rel, &bytes)?;
    }
    for c in cells.iter().filter(|c| cfg.psi.contains(&c.psi)) {
        if let Some(s) = &c.outcome.strategy {
            let rel = format!("strategies/{}_{}.csv", c.model.name(), psi_tag(c.psi));
            w.write(&rel, &strategy_csv(&prep.asset_names, s)?)?;
        }
    }
    w.write("contribution_rates.csv", &contribution_table(&cfg.models, &cfg.psi, &cells)?)?;
    w.write("contribution_rates_raw.csv", &contribution_raw(&cfg.psi, &cells)?)?;
    if let Some(r) = &evaluation {
        for (rel, bytes) in evaluation_files(r)? {
            w.write(&rel, &bytes)?;
        }
    }
    let report = RunReport::new(cfg.evaluation.psi, &cells, evaluation);
    w.write("report.json", &serde_json::to_vec_pretty(&report)?)?;
    w.record_cells(&cells);
    let ok = cells.iter().all(Cell::is_conclusive);
    let manifest = w.finish(ok)?;
    Ok(RunOutcome {
        ok,
        out_dir: l.out_dir.clone(),
        cells,
        report,
        manifest,
    })
}

/// One model at one ψ.
pub fn run_solve(l: &Loaded, jobs: Option<usize>) -> Result<RunOutcome> {
    let cfg = &l.config;
    let (&[model], &[psi]) = (cfg.models.as_slice(), cfg.psi.as_slice()) else {
        bail!("`solve` needs exactly one model and one ψ (use --models and --psi)");
    };
    let mut w = ArtifactWriter::start(&l.out_dir, "solve", &config_bytes(cfg)?, seeds(cfg))?;
    let (prep, cells) = with_jobs(jobs, || -> Result<_> {
        let prep = prepare(cfg, &l.base_dir)?;
        let cells = solve_grid(cfg, &prep, &[model], &[psi])?;
        Ok((prep, cells))
    })??;
    if let Some(s) = &cells[0].outcome.strategy {
        let rel = format!("strategies/{}_{}.csv", model.name(), psi_tag(psi));
        w.write(&rel, &strategy_csv(&prep.asset_names, s)?)?;
    }
    let report = RunReport::new(cfg.evaluation.psi, &cells, None);
    w.write("report.json", &serde_json::to_vec_pretty(&report)?)?;
    w.record_cells(&cells);
    let ok = cells.iter().all(Cell::is_conclusive);
    let manifest = w.finish(ok)?;
    Ok(RunOutcome {
        ok,
        out_dir: l.out_dir.clone(),
        cells,
        report,
        manifest,
    })
}

/// Regime estimation and scenario generation only.
pub fn run_scenarios(l: &Loaded, jobs: Option<usize>) -> Result<RunManifest> {
    let cfg = &l.config;
    let mut w = ArtifactWriter::start(&l.out_dir, "scenarios", &config_bytes(cfg)?, seeds(cfg))?;
    let prep = with_jobs(jobs, || prepare(cfg, &l.base_dir))??;
    for (rel, bytes) in scenario_files(&prep)? {
        w.write(&rel, &bytes)?;
    }
    w.finish(true)
}

/// Recomputes the evaluation tables of an existing run directory, optionally
/// with a different test kind.
pub fn run_report(out_dir: &Path, test: Option<TestKind>) -> Result<RunReport> {
    let path = out_dir.join("report.json");
    let text = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut report: RunReport = serde_json::from_slice(&text).with_context(|| format!("parsing {}", path.display()))?;
    if report.schema_version != artifacts::REPORT_SCHEMA_VERSION {
        bail!("report schema {} is not supported", report.schema_version);
    }
    let Some(old) = &report.evaluation else {
        bail!("{} has no evaluation to re-aggregate", path.display());
    };
    let series: Vec<ModelSeries> = old
        .funding_ratio
        .iter()
        .zip(&old.fund_return)
        .zip(&old.models)
        .map(|((fr, ret), m)| ModelSeries {
            model: fr.model.clone(),
            funding_ratio: fr.values.clone(),
            fund_return: ret.values.clone(),
            average_hhi: m.average_hhi,
            insolvency_rate: m.insolvency_rate,
        })
        .collect();
    let fresh = summarize(&series, test.unwrap_or(old.test_kind))?;
    let manifest_path = out_dir.join("manifest.json");
    let manifest: RunManifest = serde_json::from_slice(
        &std::fs::read(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?,
    )?;
    let mut w = ArtifactWriter::resume(out_dir, manifest)?;
    for (rel, bytes) in evaluation_files(&fresh)? {
        w.write(&rel, &bytes)?;
    }
    report.evaluation = Some(fresh);
    w.write("report.json", &serde_json::to_vec_pretty(&report)?)?;
    w.finish(true)?;
    Ok(report)
}

//! Experiment configuration (TOML).
//!
//! ```toml
//! psi = [1.02, 1.05, 1.07, 1.10, 1.15]
//! models = ["mixture", "box", "wasserstein", "sp"]
//! output_dir = "runs/synthetic"
//!
//! [fund]            # horizon, initial state, wages and benefits per period
//! [regulatory]      # y bounds, asset groups, nonnegativity flags
//! [discount]        # discount-rate scenarios and optional probabilities
//! [data]            # source = "synthetic" | "csv"
//! [scenarios]       # regimes, simulated paths, window length, seed, risk-free rate
//! [ambiguity.*]     # mixture epochs, box half-width, Wasserstein radius rule
//! [solver]          # feasibility and objective tolerances
//! [evaluation]      # out-of-sample ψ, paths, seed, discount-rate mode, test kind
//! ```
//!
//! See `configs/synthetic.toml` for a complete example.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use alm_core::conic::Tolerances;
use alm_core::evaluation::TestKind;
use alm_core::formulations::ModelKind;
use alm_core::fund::{FundSpec, GroupConstraint, RegulatorySets};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub psi: Vec<f64>,
    pub models: Vec<ModelKind>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub fund: FundConfig,
    pub regulatory: RegulatoryConfig,
    pub discount: DiscountConfig,
    pub data: DataConfig,
    pub scenarios: ScenarioConfig,
    #[serde(default)]
    pub ambiguity: AmbiguityConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("alm-output")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FundConfig {
    pub horizon: usize,
    pub initial_assets: f64,
    pub initial_wage: f64,
    pub initial_contribution_rate: f64,
    pub initial_liability: f64,
    /// Defaults to everything in cash.
    #[serde(default)]
    pub initial_holdings: Option<Vec<f64>>,
    pub wages: Vec<f64>,
    pub benefits: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatoryConfig {
    pub y_min: f64,
    pub y_max: f64,
    #[serde(default)]
    pub groups: Vec<GroupConstraint>,
    /// Defaults to long-only.
    #[serde(default)]
    pub nonnegative: Option<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscountConfig {
    pub rates: Vec<f64>,
    /// Defaults to the estimated regime probabilities when the counts match.
    #[serde(default)]
    pub probabilities: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// Historical returns generated from a known regime model.
    Synthetic(SyntheticConfig),
    /// Per-period simple returns, header of asset names, cash first.
    Csv { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub asset_names: Vec<String>,
    /// Market sensitivity of each risky asset; drift = beta · regime mean.
    pub betas: Vec<f64>,
    /// Volatility multiplier of each risky asset.
    pub vol_scales: Vec<f64>,
    pub regimes: Vec<SyntheticRegime>,
    /// Number of history windows; each has the scenario window length.
    pub windows: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticRegime {
    pub name: String,
    pub mean: f64,
    pub volatility: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub regimes: usize,
    pub paths: usize,
    pub window: usize,
    pub seed: u64,
    pub risk_free_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbiguityConfig {
    #[serde(default)]
    pub mixture: MixtureConfig,
    #[serde(default, rename = "box")]
    pub box_set: BoxConfig,
    #[serde(default)]
    pub wasserstein: WassersteinConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    /// Regime probability vectors of past epochs.
    #[serde(default)]
    pub epochs: Vec<Vec<f64>>,
    /// Add the nominal probabilities as a component.
    #[serde(default = "yes")]
    pub include_nominal: bool,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self {
            epochs: Vec::new(),
            include_nominal: true,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    /// Defaults to half the range of all epoch probabilities.
    #[serde(default)]
    pub half_width: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WassersteinConfig {
    /// Defaults to half the range of all epoch probabilities.
    #[serde(default)]
    pub half_range: Option<f64>,
    /// Support boxes widen the empirical range by this fraction on each side.
    #[serde(default = "default_widen")]
    pub support_widen: f64,
    #[serde(default = "one")]
    pub radius_scale: f64,
}

impl Default for WassersteinConfig {
    fn default() -> Self {
        Self {
            half_range: None,
            support_widen: default_widen(),
            radius_scale: 1.0,
        }
    }
}

fn default_widen() -> f64 {
    0.2
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub feasibility: f64,
    #[serde(default = "default_tol")]
    pub objective: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feasibility: default_tol(),
            objective: default_tol(),
        }
    }
}

fn default_tol() -> f64 {
    1e-8
}

impl SolverConfig {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            feas: self.feasibility,
            obj: self.objective,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// Liabilities valued at the nominal mean discount rate.
    #[default]
    Mean,
    /// Each path draws its discount rate from the discount scenarios.
    PerPath,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_eval_psi")]
    pub psi: f64,
    #[serde(default = "default_eval_paths")]
    pub paths: usize,
    #[serde(default = "default_eval_seed")]
    pub seed: u64,
    #[serde(default)]
    pub rate: RateMode,
    #[serde(default)]
    pub test: TestKind,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            psi: default_eval_psi(),
            paths: default_eval_paths(),
            seed: default_eval_seed(),
            rate: RateMode::default(),
            test: TestKind::default(),
        }
    }
}

fn default_eval_psi() -> f64 {
    1.05
}

fn default_eval_paths() -> usize {
    1000
}

fn default_eval_seed() -> u64 {
    7
}

impl ExperimentConfig {
    /// Number of assets including cash.
    pub fn n_assets(&self) -> Option<usize> {
        match &self.data {
            DataConfig::Synthetic(s) => Some(s.betas.len() + 1),
            DataConfig::Csv { .. } => self
                .fund
                .initial_holdings
                .as_ref()
                .map(Vec::len)
                .or(self.regulatory.nonnegative.as_ref().map(Vec::len)),
        }
    }

    /// The fund at threshold `psi` for `n_assets` assets.
    pub fn fund_spec(&self, n_assets: usize, psi: f64) -> FundSpec {
        let f = &self.fund;
        let holdings = f.initial_holdings.clone().unwrap_or_else(|| {
            let mut h = vec![0.0; n_assets];
            if let Some(c) = h.first_mut() {
                *c = f.initial_assets;
            }
            h
        });
        let mut regulatory = RegulatorySets::long_only(n_assets, self.regulatory.y_min, self.regulatory.y_max);
        regulatory.groups = self.regulatory.groups.clone();
        if let Some(flags) = &self.regulatory.nonnegative {
            regulatory.nonnegative = flags.clone();
        }
        FundSpec {
            horizon: f.horizon,
            n_assets,
            initial_assets: f.initial_assets,
            initial_wage: f.initial_wage,
            initial_contribution_rate: f.initial_contribution_rate,
            initial_liability: f.initial_liability,
            initial_holdings: holdings,
            wages: f.wages.clone(),
            benefits: f.benefits.clone(),
            funding_threshold: psi,
            regulatory,
        }
    }

    /// Every problem found, empty when the configuration is usable.
    pub fn problems(&self, base_dir: &Path) -> Vec<String> {
        let mut errs = Vec::new();
        if self.models.is_empty() {
            errs.push("`models` must name at least one model".to_string());
        }
        if self.models.iter().collect::<BTreeSet<_>>().len() != self.models.len() {
            errs.push("`models` lists a model twice".to_string());
        }
        if self.psi.is_empty() {
            errs.push("`psi` must list at least one threshold".to_string());
        }
        if let Some(p) = self.psi.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            errs.push(format!("`psi` value {p} must be positive"));
        }
        let f = &self.fund;
        if f.horizon == 0 {
            errs.push("`fund.horizon` must be at least 1".into());
        }
        if f.wages.len() != f.horizon {
            errs.push(format!("`fund.wages` has {} entries for horizon {}", f.wages.len(), f.horizon));
        }
        if f.benefits.len() != f.horizon {
            errs.push(format!(
                "`fund.benefits` has {} entries for horizon {}",
                f.benefits.len(),
                f.horizon
            ));
        }
        if self.discount.rates.is_empty() {
            errs.push("`discount.rates` must list at least one rate".into());
        }
        if let Some(p) = &self.discount.probabilities {
            if p.len() != self.discount.rates.len() {
                errs.push("`discount.probabilities` must match `discount.rates` in length".into());
            }
        }
        let sc = &self.scenarios;
        if sc.regimes == 0 || sc.paths == 0 {
            errs.push("`scenarios.regimes` and `scenarios.paths` must be positive".into());
        }
        if sc.window < 2 {
            errs.push("`scenarios.window` must be at least 2".into());
        }
        match &self.data {
            DataConfig::Synthetic(s) => {
                if s.asset_names.len() != s.betas.len() + 1 || s.vol_scales.len() != s.betas.len() {
                    errs.push(
                        "`data.asset_names` needs cash plus one name per beta, and one vol scale per beta"
                            .into(),
                    );
                }
                if s.regimes.is_empty() {
                    errs.push("`data.regimes` must define at least one regime".into());
                }
                if s.windows < sc.regimes {
                    errs.push(format!(
                        "`data.windows` = {} is fewer than {} regimes",
                        s.windows, sc.regimes
                    ));
                }
            }
            DataConfig::Csv { path } => {
                let full = base_dir.join(path);
                if !full.is_file() {
                    errs.push(format!("`data.path` {} does not exist", full.display()));
                }
                if self.n_assets().is_none() {
                    errs.push(
                        "csv data needs `fund.initial_holdings` or `regulatory.nonnegative` to fix the asset count"
                            .into(),
                    );
                }
            }
        }
        if let Some(n) = self.n_assets() {
            if let Some(h) = &f.initial_holdings {
                if h.len() != n {
                    errs.push(format!("`fund.initial_holdings` has {} entries for {n} assets", h.len()));
                }
            }
            if let Some(flags) = &self.regulatory.nonnegative {
                if flags.len() != n {
                    errs.push(format!("`regulatory.nonnegative` has {} entries for {n} assets", flags.len()));
                }
            }
            for g in &self.regulatory.groups {
                if g.assets.iter().any(|a| *a >= n) {
                    errs.push(format!("group `{}` names an asset outside 0..{n}", g.name));
                }
            }
        }
        let mix = &self.ambiguity.mixture;
        if self.models.contains(&ModelKind::Mixture) && mix.epochs.is_empty() {
            errs.push("the mixture model needs `ambiguity.mixture.epochs`".into());
        }
        if let Some(e) = mix.epochs.iter().find(|e| e.len() != sc.regimes) {
            errs.push(format!("mixture epoch {e:?} does not have {} entries", sc.regimes));
        }
        let needs_range = (self.models.contains(&ModelKind::Box) && self.ambiguity.box_set.half_width.is_none())
            || (self.models.contains(&ModelKind::Wasserstein) && self.ambiguity.wasserstein.half_range.is_none());
        if needs_range && mix.epochs.is_empty() {
            errs.push("box and Wasserstein defaults need `ambiguity.mixture.epochs` or explicit widths".into());
        }
        if !(self.evaluation.psi > 0.0) || self.evaluation.paths == 0 {
            errs.push("`evaluation.psi` and `evaluation.paths` must be positive".into());
        }
        errs
    }
}

/// Reads and checks a configuration, reporting every problem at once.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: ExperimentConfig =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let errs = cfg.problems(base);
    if !errs.is_empty() {
        bail!("{} has {} problem(s):\n  - {}", path.display(), errs.len(), errs.join("\n  - "));
    }
    Ok(cfg)
}

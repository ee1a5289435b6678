//! Benchmark fixtures. The core crate is re-exported so benches need one import.

pub use alm_core::*;

use alm_core::formulations::{
    AmbiguitySpec, BoxAmbiguity, MixtureAmbiguity, WassersteinAmbiguity,
};
use alm_core::scenario::{reduce_scenarios, simulate_paths, GbmParams, RegimeModel, SimulationConfig};

/// A full-size instance: 11 periods, cash plus 9 risky assets, 4 regimes and
/// 4 discount rates.
pub struct Fixture {
    pub spec: FundSpec,
    pub discount: DiscountScenarios,
    pub returns: ReturnScenarios,
    pub regimes: RegimeModel,
}

pub const PERIODS: usize = 11;
pub const RISKY: usize = 9;

pub fn regime_model() -> RegimeModel {
    let betas = [1.0, 1.3, 0.9, 0.7, 0.9, 1.0, 1.1, 1.2, 1.0];
    let scales = [1.0, 1.4, 0.9, 0.8, 0.9, 1.0, 1.1, 1.3, 1.2];
    let regimes = [
        ("LV", 0.010, 0.020, 0.51),
        ("MV", 0.006, 0.035, 0.22),
        ("IHV", 0.008, 0.060, 0.17),
        ("DHV", -0.015, 0.080, 0.10),
    ];
    RegimeModel {
        names: regimes.iter().map(|r| r.0.to_string()).collect(),
        params: regimes
            .iter()
            .map(|&(_, mean, vol, _)| GbmParams {
                drift: betas.iter().map(|b| b * mean).collect(),
                volatility: scales.iter().map(|s| s * vol).collect(),
                dt: 1.0,
            })
            .collect(),
        probs: regimes.iter().map(|r| r.3).collect(),
    }
}

pub fn simulation_config(paths: usize, regime: u64) -> SimulationConfig {
    SimulationConfig {
        paths,
        seed: 42 + regime,
        periods: PERIODS,
        risk_free_rate: 0.0025,
    }
}

pub fn fixture(psi: f64) -> Fixture {
    let regimes = regime_model();
    let raw: Vec<_> = regimes
        .params
        .iter()
        .enumerate()
        .map(|(k, p)| simulate_paths(p, &simulation_config(1000, k as u64), k).expect("valid parameters"))
        .collect();
    let returns = reduce_scenarios(&raw, &regimes.probs).expect("four regimes");
    let wages = vec![10.0; PERIODS];
    let mut benefits = vec![0.2; PERIODS];
    benefits[PERIODS - 1] = 30.0;
    let discount = build_discount_scenarios(&wages, &benefits, &[0.022, 0.025, 0.027, 0.030], &regimes.probs)
        .expect("valid discounting");
    let n = RISKY + 1;
    let mut holdings = vec![0.0; n];
    holdings[0] = 29.0;
    let spec = FundSpec {
        horizon: PERIODS,
        n_assets: n,
        initial_assets: 29.0,
        initial_wage: 10.0,
        initial_contribution_rate: 0.1,
        initial_liability: 0.2,
        initial_holdings: holdings,
        wages,
        benefits,
        funding_threshold: psi,
        regulatory: RegulatorySets::long_only(n, 0.02, 0.30),
    };
    Fixture {
        spec,
        discount,
        returns,
        regimes,
    }
}

impl Fixture {
    pub fn mixture(&self) -> AmbiguitySpec {
        let mut m = MixtureAmbiguity::singleton(&self.discount.probs, &self.returns.probs);
        m.discount.push(vec![0.25; 4]);
        m.returns.push(vec![0.25; 4]);
        m.discount.push(vec![0.35, 0.39, 0.15, 0.11]);
        m.returns.push(vec![0.35, 0.39, 0.15, 0.11]);
        AmbiguitySpec::Mixture(m)
    }

    pub fn box_set(&self) -> AmbiguitySpec {
        AmbiguitySpec::Box(BoxAmbiguity::symmetric(&self.discount.probs, &self.returns.probs, 0.225))
    }

    pub fn wasserstein(&self) -> AmbiguitySpec {
        AmbiguitySpec::Wasserstein(WassersteinAmbiguity::from_rule(&self.discount, &self.returns, 0.225, 0.2))
    }
}

#![allow(dead_code)]

use alm_core::fund::{
    build_discount_scenarios, DiscountScenarios, FundSpec, RegulatorySets, ReturnScenarios,
};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Desk {
    pub spec: FundSpec,
    pub ds: DiscountScenarios,
    pub rs: ReturnScenarios,
}

pub fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Small random instance that is feasible by construction: the all-cash
/// portfolio covers every liability bound with a wide margin.
pub fn desk(seed: u64, t_len: usize, n: usize, s_len: usize, k_len: usize) -> Desk {
    desk_with_wealth(seed, t_len, n, s_len, k_len, 3.0)
}

/// As [`desk`] with initial assets `wealth × Σ benefits`; below 3 feasibility is not guaranteed.
pub fn desk_with_wealth(seed: u64, t_len: usize, n: usize, s_len: usize, k_len: usize, wealth: f64) -> Desk {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wages: Vec<f64> = (0..t_len).map(|_| rng.gen_range(5.0..15.0)).collect();
    let benefits: Vec<f64> = (0..t_len).map(|_| rng.gen_range(0.5..2.0)).collect();
    let rates: Vec<f64> = (0..s_len).map(|_| rng.gen_range(0.0..0.06)).collect();
    let p = simplex(&mut rng, s_len);
    let q = simplex(&mut rng, k_len);
    let ds = build_discount_scenarios(&wages, &benefits, &rates, &p).unwrap();
    let rf = rng.gen_range(0.0..0.02);
    let gross = Array3::from_shape_fn((t_len, k_len, n), |(_, _, a)| {
        if a == 0 {
            1.0 + rf
        } else {
            1.0 + rng.gen_range(-0.08..0.12)
        }
    });
    let rs = ReturnScenarios { gross, probs: q };
    let total_benefits: f64 = benefits.iter().sum();
    let initial_assets = wealth * total_benefits * rng.gen_range(0.9..1.1);
    let mut holdings = vec![0.0; n];
    holdings[0] = initial_assets;
    let spec = FundSpec {
        horizon: t_len,
        n_assets: n,
        initial_assets,
        initial_wage: wages[0],
        initial_contribution_rate: 0.07,
        initial_liability: rng.gen_range(0.5..2.0),
        initial_holdings: holdings,
        wages,
        benefits,
        funding_threshold: rng.gen_range(1.0..1.2),
        regulatory: RegulatorySets::long_only(n, 0.05, 0.10),
    };
    Desk { spec, ds, rs }
}

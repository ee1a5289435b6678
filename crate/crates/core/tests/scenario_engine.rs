use alm_core::scenario::*;
use ndarray::{Array2, Array3, Axis};
use proptest::prelude::*;

fn cfg(paths: usize, periods: usize, seed: u64) -> SimulationConfig {
    SimulationConfig {
        paths,
        seed,
        periods,
        risk_free_rate: 0.002,
    }
}

#[test]
fn zero_drift_sample_mean_within_four_standard_errors() {
    let sigma = [0.02, 0.05, 0.1];
    let p = GbmParams {
        drift: vec![0.0; 3],
        volatility: sigma.to_vec(),
        dt: 1.0,
    };
    let m = 100_000;
    let raw = simulate_paths(&p, &cfg(m, 2, 17), 0).unwrap();
    let mean = raw.mean_axis(Axis(0)).unwrap();
    for i in 0..2 {
        assert!((mean[[i, 0]] - 0.002).abs() < 1e-12);
        for (j, s) in sigma.iter().enumerate() {
            let bound = 4.0 * s / (m as f64).sqrt();
            assert!(mean[[i, j + 1]].abs() <= bound, "{} > {bound}", mean[[i, j + 1]]);
        }
    }
}

#[test]
fn drift_recovered_within_five_standard_errors() {
    let p = GbmParams {
        drift: vec![0.01, -0.02],
        volatility: vec![0.04, 0.08],
        dt: 0.5,
    };
    let m = 100_000;
    let raw = simulate_paths(&p, &cfg(m, 1, 3), 2).unwrap();
    let mean = raw.mean_axis(Axis(0)).unwrap();
    for j in 0..2 {
        let bound = 5.0 * p.volatility[j] * (p.dt / m as f64).sqrt();
        assert!((mean[[0, j + 1]] - p.drift[j] * p.dt).abs() <= bound);
    }
}

#[test]
fn same_seed_is_bitwise_identical() {
    let p = GbmParams {
        drift: vec![0.01, 0.0],
        volatility: vec![0.03, 0.07],
        dt: 1.0,
    };
    let a = simulate_paths(&p, &cfg(500, 4, 9), 1).unwrap();
    let b = simulate_paths(&p, &cfg(500, 4, 9), 1).unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = pool.install(|| simulate_paths(&p, &cfg(500, 4, 9), 1).unwrap());
    assert_eq!(a, c);
}

fn two_cluster_history(calm: &[bool], window: usize) -> Array2<f64> {
    // Alternating ±a within each window gives mean 0 and std set by a exactly.
    let mut h = Array2::zeros((calm.len() * window, 2));
    for (w, &c) in calm.iter().enumerate() {
        let a = if c { 0.005 } else { 0.08 };
        let drift = if c { 0.01 } else { -0.01 };
        for i in 0..window {
            h[[w * window + i, 1]] = drift + if i % 2 == 0 { a } else { -a };
        }
    }
    h
}

#[test]
fn separated_clusters_are_recovered() {
    let calm: Vec<bool> = (0..40).map(|w| (w * 7) % 3 != 0).collect();
    let h = two_cluster_history(&calm, 6);
    let labels = classify_regimes(h.view(), 6, 2, (0.0, 0.05), 4).unwrap();
    // Calm windows have the larger mean/volatility ratio and take label 0.
    for (l, c) in labels.iter().zip(&calm) {
        assert_eq!(*l, if *c { 0 } else { 1 });
    }
}

#[test]
fn single_regime_and_constant_series() {
    let calm: Vec<bool> = (0..10).map(|w| w % 2 == 0).collect();
    let h = two_cluster_history(&calm, 4);
    assert!(classify_regimes(h.view(), 4, 1, (0.0, 0.05), 0).unwrap().iter().all(|l| *l == 0));

    let flat = Array2::from_elem((40, 3), 0.01);
    let labels = classify_regimes(flat.view(), 4, 3, (0.01, 0.0), 0).unwrap();
    assert_eq!(labels.len(), 10);
    assert!(labels.iter().all(|l| *l < 3));
}

#[test]
fn too_few_windows_is_insufficient_data() {
    let flat = Array2::from_elem((7, 2), 0.01);
    let err = classify_regimes(flat.view(), 4, 2, (0.0, 1.0), 0).unwrap_err();
    assert!(matches!(err, alm_core::AlmError::InsufficientData(_)));
}

#[test]
fn historical_regime_mix() {
    let labels: Vec<usize> = [(0, 51), (1, 22), (2, 17), (3, 10)]
        .iter()
        .flat_map(|&(r, n)| std::iter::repeat_n(r, n))
        .collect();
    let p = regime_probabilities(&labels).unwrap();
    let expected = [0.51, 0.22, 0.17, 0.10];
    for (a, b) in p.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(regime_probabilities(&[2, 2]).unwrap(), vec![0.0, 0.0, 1.0]);
}

#[test]
fn synthetic_history_hits_the_mix() {
    let params = |m: f64, s: f64| GbmParams {
        drift: vec![m; 2],
        volatility: vec![s; 2],
        dt: 1.0,
    };
    let model = RegimeModel {
        names: vec!["a".into(), "b".into(), "c".into(), "d".into()],
        params: vec![params(0.01, 0.02), params(0.006, 0.03), params(0.008, 0.06), params(-0.015, 0.08)],
        probs: vec![0.51, 0.22, 0.17, 0.10],
    };
    let (h, labels) = synthetic_history(&model, 100, 12, 0.002, 5).unwrap();
    assert_eq!(h.dim(), (1200, 3));
    assert_eq!(regime_probabilities(&labels).unwrap(), vec![0.51, 0.22, 0.17, 0.10]);
}

#[test]
fn reduction_examples() {
    let zero = |mu: f64| GbmParams {
        drift: vec![mu],
        volatility: vec![0.0],
        dt: 1.0,
    };
    let up = simulate_paths(&zero(0.01), &cfg(3, 2, 0), 0).unwrap();
    let down = simulate_paths(&zero(-0.01), &cfg(3, 2, 0), 1).unwrap();
    let rs = reduce_scenarios(&[up, down], &[0.7, 0.3]).unwrap();
    for i in 0..2 {
        assert_eq!(rs.gross[[i, 0, 1]], 1.01);
        assert_eq!(rs.gross[[i, 1, 1]], 0.99);
        assert_eq!(rs.gross[[i, 0, 0]], 1.002);
        assert_eq!(rs.gross[[i, 1, 0]], 1.002);
    }
    assert_eq!(rs.probs, vec![0.7, 0.3]);

    assert!(reduce_scenarios(&[Array3::zeros((0, 2, 2))], &[1.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn single_path_reduces_to_itself(seed in 0u64..10_000, vol in 0.0f64..0.2) {
        let p = GbmParams { drift: vec![0.005, 0.0], volatility: vec![vol, vol / 2.0], dt: 1.0 };
        let raw = simulate_paths(&p, &cfg(1, 5, seed), 0).unwrap();
        let rs = reduce_scenarios(std::slice::from_ref(&raw), &[1.0]).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                prop_assert_eq!(rs.gross[[i, 0, j]], 1.0 + raw[[0, i, j]]);
            }
        }
    }

    #[test]
    fn cash_bypasses_the_random_walk(seed in 0u64..10_000, regime in 0usize..4) {
        let p = GbmParams { drift: vec![0.01], volatility: vec![0.3], dt: 1.0 };
        let raw = simulate_paths(&p, &cfg(20, 3, seed), regime).unwrap();
        prop_assert!(raw.index_axis(Axis(2), 0).iter().all(|r| *r == 0.002));
    }

    #[test]
    fn label_frequencies_are_a_distribution(labels in prop::collection::vec(0usize..6, 1..200)) {
        let p = regime_probabilities(&labels).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
    }
}

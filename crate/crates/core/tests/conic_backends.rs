use alm_core::conic::{
    check_solution, solve, ClarabelBackend, ConicBackend, ConicProblem, DenseSimplex, LinExpr,
    SolveStatus, Tolerances,
};
use alm_core::AlmError;
use proptest::prelude::*;

fn backends() -> Vec<Box<dyn ConicBackend>> {
    vec![
        Box::new(ClarabelBackend::default()),
        Box::new(DenseSimplex::default()),
    ]
}

#[test]
fn minimize_x_above_three() {
    for b in backends() {
        let mut p = ConicProblem::new();
        let x = p.add_free("x").unwrap();
        p.add_ge("floor", x.into(), LinExpr::constant(3.0)).unwrap();
        p.minimize(x.into()).unwrap();
        let r = b.solve(&p.sealed(), &Tolerances::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "{}", b.name());
        assert!((r.objective.unwrap() - 3.0).abs() < 1e-7, "{}", b.name());
    }
}

#[test]
fn pythagoras_bound() {
    let mut p = ConicProblem::new();
    let t = p.add_free("t").unwrap();
    p.add_soc("c", vec![LinExpr::constant(3.0), LinExpr::constant(4.0)], t.into())
        .unwrap();
    p.minimize(t.into()).unwrap();
    let r = solve(&p.sealed(), &Tolerances::default()).unwrap();
    assert!(r.is_optimal());
    assert!((r.objective.unwrap() - 5.0).abs() < 1e-7);
}

#[test]
fn one_dimensional_cone_is_absolute_value() {
    // min t  s.t. |x| <= t, x >= 2 - t/2  ->  x = t = 4/3
    let mut p = ConicProblem::new();
    let x = p.add_free("x").unwrap();
    let t = p.add_free("t").unwrap();
    p.add_soc("abs", vec![x.into()], t.into()).unwrap();
    p.add_ge("link", x.into(), LinExpr::constant(2.0) - LinExpr::from(t) * 0.5)
        .unwrap();
    p.minimize(t.into()).unwrap();
    let r = solve(&p.sealed(), &Tolerances::default()).unwrap();
    assert!(r.is_optimal());
    assert!((r.value(t).unwrap() - 4.0 / 3.0).abs() < 1e-6);
    assert!((r.value(x).unwrap() - 4.0 / 3.0).abs() < 1e-6);
}

#[test]
fn simplex_rejects_cones() {
    let mut p = ConicProblem::new();
    let t = p.add_free("t").unwrap();
    p.add_soc("c", vec![LinExpr::constant(1.0)], t.into()).unwrap();
    let err = DenseSimplex::default()
        .solve(&p.sealed(), &Tolerances::default())
        .unwrap_err();
    assert!(matches!(err, AlmError::Unsupported { .. }));
}

#[test]
fn unsealed_problem_is_rejected() {
    let p = ConicProblem::new();
    assert!(matches!(
        solve(&p, &Tolerances::default()),
        Err(AlmError::NotSealed)
    ));
}

#[test]
fn infeasible_and_unbounded_are_reported() {
    for b in backends() {
        let mut p = ConicProblem::new();
        let x = p.add_variable("x", 0.0, 1.0).unwrap();
        p.add_ge("too_high", x.into(), LinExpr::constant(2.0)).unwrap();
        p.minimize(x.into()).unwrap();
        let r = b.solve(&p.sealed(), &Tolerances::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible, "{}", b.name());
        assert!(r.primal.is_none());

        let mut p = ConicProblem::new();
        let x = p.add_free("x").unwrap();
        p.add_le("cap", x.into(), LinExpr::constant(1.0)).unwrap();
        p.minimize(x.into()).unwrap();
        let r = b.solve(&p.sealed(), &Tolerances::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded, "{}", b.name());
    }
}

/// Minimum of `c·x` over `{a_i·x <= b_i} ∩ [-10,10]²` by intersecting every
/// pair of boundary lines.
fn vertex_enumeration(c: [f64; 2], rows: &[([f64; 2], f64)]) -> Option<f64> {
    let mut all: Vec<([f64; 2], f64)> = rows.to_vec();
    all.extend([
        ([1.0, 0.0], 10.0),
        ([-1.0, 0.0], 10.0),
        ([0.0, 1.0], 10.0),
        ([0.0, -1.0], 10.0),
    ]);
    let mut best: Option<f64> = None;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let (a, b) = (all[i].0, all[j].0);
            let det = a[0] * b[1] - a[1] * b[0];
            if det.abs() < 1e-9 {
                continue;
            }
            let x0 = (all[i].1 * b[1] - a[1] * all[j].1) / det;
            let x1 = (a[0] * all[j].1 - all[i].1 * b[0]) / det;
            if all
                .iter()
                .all(|(r, rhs)| r[0] * x0 + r[1] * x1 <= rhs + 1e-9)
            {
                let v = c[0] * x0 + c[1] * x1;
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    }
    best
}

fn two_variable_lp(c: [f64; 2], rows: &[([f64; 2], f64)], shuffle: bool) -> ConicProblem {
    let mut p = ConicProblem::new();
    let x0 = p.add_variable("x0", -10.0, 10.0).unwrap();
    let x1 = p.add_variable("x1", -10.0, 10.0).unwrap();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    if shuffle {
        order.reverse();
    }
    for i in order {
        let (a, b) = rows[i];
        p.add_le(
            format!("row{i}"),
            LinExpr::from(x0) * a[0] + LinExpr::from(x1) * a[1],
            LinExpr::constant(b),
        )
        .unwrap();
    }
    p.minimize(LinExpr::from(x0) * c[0] + LinExpr::from(x1) * c[1])
        .unwrap();
    p.sealed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lp_matches_vertex_enumeration(
        c in prop::array::uniform2(-5.0f64..5.0),
        rows in prop::collection::vec((prop::array::uniform2(-3.0f64..3.0), -2.0f64..8.0), 1..6),
    ) {
        let oracle = vertex_enumeration(c, &rows);
        for b in backends() {
            let p = two_variable_lp(c, &rows, false);
            let r = b.solve(&p, &Tolerances::default()).unwrap();
            match oracle {
                Some(v) => {
                    prop_assert_eq!(r.status, SolveStatus::Optimal);
                    prop_assert!((r.objective.unwrap() - v).abs() <= 1e-6 * (1.0 + v.abs()),
                        "{}: {} vs {}", b.name(), r.objective.unwrap(), v);
                }
                None => prop_assert_eq!(r.status, SolveStatus::Infeasible),
            }
        }
    }

    #[test]
    fn construction_order_does_not_change_optimum(
        c in prop::array::uniform2(-5.0f64..5.0),
        rows in prop::collection::vec((prop::array::uniform2(-3.0f64..3.0), 0.5f64..8.0), 1..6),
    ) {
        let a = solve(&two_variable_lp(c, &rows, false), &Tolerances::default()).unwrap();
        let b = solve(&two_variable_lp(c, &rows, true), &Tolerances::default()).unwrap();
        prop_assert!(a.is_optimal() && b.is_optimal());
        prop_assert!((a.objective.unwrap() - b.objective.unwrap()).abs() < 1e-6);
    }

    /// min c·x s.t. A x >= b, x >= 0 with positive data; the dual point
    /// y = α·1, α = min_j c_j / Σ_i A_ij, is feasible for A'y <= c.
    #[test]
    fn weak_duality_against_hand_built_dual(
        n in 2usize..5,
        m in 1usize..5,
        seed in prop::collection::vec(0.1f64..3.0, 40),
    ) {
        let a: Vec<Vec<f64>> = (0..m).map(|i| (0..n).map(|j| seed[i * n + j]).collect()).collect();
        let b: Vec<f64> = (0..m).map(|i| seed[20 + i]).collect();
        let c: Vec<f64> = (0..n).map(|j| seed[30 + j]).collect();
        let alpha = (0..n)
            .map(|j| c[j] / (0..m).map(|i| a[i][j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let dual_value: f64 = b.iter().sum::<f64>() * alpha;

        let mut p = ConicProblem::new();
        let x = p.add_nonneg_vec("x", n).unwrap();
        for i in 0..m {
            let lhs = LinExpr::weighted_sum(x.iter().zip(a[i].iter().copied()));
            p.add_ge(format!("r{i}"), lhs, LinExpr::constant(b[i])).unwrap();
        }
        p.minimize(LinExpr::weighted_sum(x.iter().zip(c.iter().copied()))).unwrap();
        let p = p.sealed();
        for be in backends() {
            let r = be.solve(&p, &Tolerances::default()).unwrap();
            prop_assert!(r.is_optimal());
            prop_assert!(r.objective.unwrap() >= dual_value - 1e-7);
        }
    }

    #[test]
    fn optimal_points_pass_residual_check(
        shift in -3.0f64..3.0,
        scale in 0.5f64..4.0,
    ) {
        // min t + x  s.t. ‖(x - shift, 1)‖ <= t / scale
        let mut p = ConicProblem::new();
        let x = p.add_free("x").unwrap();
        let t = p.add_free("t").unwrap();
        p.add_soc("c", vec![LinExpr::from(x) - shift, LinExpr::constant(1.0)], LinExpr::from(t) * (1.0 / scale)).unwrap();
        p.add_ge("x_floor", x.into(), LinExpr::constant(shift - 1.0)).unwrap();
        p.minimize(LinExpr::from(t) + x).unwrap();
        let p = p.sealed();
        let tol = Tolerances::default();
        let r = solve(&p, &tol).unwrap();
        prop_assert!(r.is_optimal());
        let report = check_solution(&p, r.primal.as_ref().unwrap());
        prop_assert!(report.passes(10.0 * tol.feas));
    }
}

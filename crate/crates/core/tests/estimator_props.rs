use hiertrack::belief::{predict, MotionModel, TargetBelief};
use hiertrack::estimator::{chi2_cdf_df2, estimate_coverage, truncate_estimate};
use hiertrack::scenario::sample_target;
use hiertrack::seed::rng_for;
use nalgebra::{Matrix4, Vector2, Vector4};
use proptest::prelude::*;

fn static_belief(var: f64) -> TargetBelief {
    TargetBelief::new(
        Vector4::new(300.0, 0.0, 0.0, 0.0),
        Matrix4::from_diagonal(&Vector4::new(var, var, 0.0, 0.0)) + Matrix4::identity() * 1e-12,
        0.0,
    )
}

#[test]
fn chi2_matches_quadrature() {
    for x in [0.1, 1.0, 2.0 * 2f64.ln(), 4.60517, 12.0] {
        let n = 20_000;
        let h = x / n as f64;
        let density = |t: f64| 0.5 * (-0.5 * t).exp();
        let simpson: f64 = (0..n)
            .map(|i| {
                let a = i as f64 * h;
                h / 6.0 * (density(a) + 4.0 * density(a + h / 2.0) + density(a + h))
            })
            .sum();
        assert!((chi2_cdf_df2(x).unwrap() - simpson).abs() < 1e-12, "x = {x}");
    }
    assert!((chi2_cdf_df2(4.60517).unwrap() - 0.9).abs() < 1e-5);
}

#[test]
fn frozen_ellipse_is_eventually_swept() {
    let m = MotionModel::constant_velocity(0.5, 0.0).unwrap();
    let est = estimate_coverage(&static_belief(2000.0), Vector2::zeros(), 30.0, 100.0, &m, 20_000).unwrap();
    assert!(est.p_max > 1.0 - 1e-8);
}

#[test]
fn budget_equal_to_intercept_keeps_only_the_first_disc() {
    let m = MotionModel::constant_velocity(0.5, 3e-4).unwrap();
    let b = static_belief(1500.0);
    let est = estimate_coverage(&b, Vector2::zeros(), 30.0, 100.0, &m, 10_000).unwrap();
    let cut = truncate_estimate(&est, est.intercept_time);
    let d = b.position_cov_after(&m, est.intercept_steps as u64).determinant();
    let first = 1.0 - (-(std::f64::consts::PI * 2500.0) / (2.0 * std::f64::consts::PI * d.sqrt())).exp();
    assert!((cut.p_max - first).abs() < 1e-12);
    assert_eq!(truncate_estimate(&est, 0.0).p_max, 0.0);
    assert_eq!(truncate_estimate(&est, est.intercept_time + est.t_cutoff + 10.0), est);
}

proptest! {
    #[test]
    fn sampled_cases_reach_a_finite_cutoff(seed in 0u64..10_000, t_d in 0.0..300.0f64) {
        let spec = sample_target(&mut rng_for(seed, &[]));
        let m = MotionModel::constant_velocity(0.5, spec.q).unwrap();
        let b = predict(&spec.belief(), &m, m.steps_for(t_d));
        let est = estimate_coverage(&b, Vector2::zeros(), 30.0, 100.0, &m, 1_000_000).unwrap();
        prop_assert!(est.cutoff_step() < 100_000);
        prop_assert!(est.pcdf.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(est.expected_find_time >= 0.0 && est.expected_find_time <= est.t_cutoff);
        prop_assert_eq!(est.pcdf_at(est.cutoff_step() + 7), est.p_max);
    }

    #[test]
    fn curve_depends_only_on_area_ratio(var in 500.0..2000.0f64, scale in 1.5..4.0f64) {
        // Doubling the sweep width and every length scale of the ellipse
        // leaves S/(π√D) unchanged when the agent also travels proportionally.
        let m = MotionModel::constant_velocity(0.5, 0.0).unwrap();
        let base = estimate_coverage(&static_belief(var), Vector2::new(300.0, 0.0), 30.0, 100.0, &m, 400).unwrap();
        let scaled_belief = TargetBelief::new(Vector4::new(300.0, 0.0, 0.0, 0.0), Matrix4::from_diagonal(&Vector4::new(var * scale * scale, var * scale * scale, 0.0, 0.0)) + Matrix4::identity() * 1e-12, 0.0);
        let scaled = estimate_coverage(&scaled_belief, Vector2::new(300.0, 0.0), 30.0 * scale, 100.0 * scale, &m, 400).unwrap();
        prop_assert_eq!(base.pcdf.len(), scaled.pcdf.len());
        for (a, b) in base.pcdf.iter().zip(&scaled.pcdf) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

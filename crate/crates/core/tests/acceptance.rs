//! End-to-end acceptance checks. Prints one PASS/FAIL line per check and
//! exits non-zero if any check fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use hiertrack::belief::{predict, update, MotionModel, ObservationModel, TargetBelief};
use hiertrack::bench::{
    emit_report, run_estimator_study, run_tracking_study, EstimatorStudyOptions, StudyReport, TrackingStudyOptions,
};
use hiertrack::estimator::{estimate_coverage, STALL_EPSILON};
use hiertrack::planner::{
    apply_outcome, evaluate_action, tree_search, Decision, DecisionState, History, MctsConfig, Outcome,
    PlanningContext, SearchMode,
};
use hiertrack::scenario::{sample_scenario, sample_target};
use hiertrack::seed::rng_for;
use hiertrack::spiral::{build_coverage_plan, make_spiral_params, step_theta, SpiralParams};
use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

const MASTER_SEED: u64 = 20_240_901;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn estimator_accuracy() -> Check {
    let opts = EstimatorStudyOptions { seed: MASTER_SEED, ..EstimatorStudyOptions::default() };
    let report = run_estimator_study(&opts).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = report.failures.is_empty();
    for &t_d in &opts.departure_delays {
        let agg = report.estimator_aggregate(t_d).ok_or(format!("no aggregate for t_d = {t_d}"))?;
        let p = agg.mape_pfind.unwrap_or(f64::INFINITY);
        let t = agg.mape_tfind.unwrap_or(f64::INFINITY);
        ok &= p <= 0.08 && t <= 0.08 && agg.cases == opts.cases;
        lines.push(format!("t_d={t_d}: P {:.2}% T {:.2}%", 100.0 * p, 100.0 * t));
    }
    let summary = format!("{} cases x {} runs; {}", opts.cases, opts.runs, lines.join(", "));
    if ok {
        Ok(summary)
    } else {
        Err(format!("{summary} (limit 8%, failures {})", report.failures.len()))
    }
}

fn coverage_curve_shape() -> Check {
    let mut rng = rng_for(MASTER_SEED, &[2]);
    let mut runs = 0;
    let mut longest = 0;
    for _ in 0..1000 {
        let spec = sample_target(&mut rng);
        let model = MotionModel::constant_velocity(0.5, spec.q).map_err(|e| e.to_string())?;
        let initial = spec.belief();
        for t_d in [0.0, 100.0, 200.0] {
            let belief = predict(&initial, &model, model.steps_for(t_d));
            let est = estimate_coverage(&belief, Vector2::zeros(), 30.0, 100.0, &model, usize::MAX / 4)
                .map_err(|e| e.to_string())?;
            runs += 1;
            let k_cut = est.cutoff_step();
            ensure(!est.pcdf.is_empty(), || "empty curve".into())?;
            for w in est.pcdf.windows(2) {
                ensure(w[1] >= w[0], || format!("pcdf decreases: {} -> {}", w[0], w[1]))?;
            }
            ensure(est.pcdf.iter().all(|p| (0.0..=1.0).contains(p)), || "pcdf outside [0,1]".into())?;
            ensure(est.p_max == est.pcdf[k_cut], || "p_max differs from pcdf at cutoff".into())?;
            ensure(est.t_cutoff == k_cut as f64 * 0.5, || "t_cutoff off the step grid".into())?;
            for k in [k_cut + 1, k_cut + 10, k_cut + 10_000] {
                ensure(est.pcdf_at(k) == est.p_max, || format!("curve not flat after cutoff at k={k}"))?;
            }
            // The loop ended on a stall, not on the step cap.
            let sigma = belief.position_cov_after(&model, (est.intercept_steps + k_cut + 1) as u64);
            let s = 30.0 * 100.0 * 0.5 * (k_cut + 1) as f64 + PI * 2500.0;
            let next = 1.0 - (-s / (2.0 * PI * sigma.determinant().sqrt())).exp();
            ensure(next - est.p_max <= STALL_EPSILON, || format!("cutoff at k={k_cut} is not a stall"))?;
            ensure(est.t_cutoff.is_finite(), || "infinite cutoff".into())?;
            ensure(est.expected_find_time >= 0.0 && est.expected_find_time <= est.t_cutoff + 1e-12, || {
                "expected find time outside [0, t_cutoff]".into()
            })?;
            longest = longest.max(k_cut);
        }
    }
    Ok(format!("{runs} curves monotone then flat; longest cutoff {longest} steps"))
}

fn random_covariance(rng: &mut ChaCha8Rng) -> Matrix2<f64> {
    let vx: f64 = rng.random_range(1.0..5000.0);
    let vy: f64 = rng.random_range(1.0..5000.0);
    let rho: f64 = rng.random_range(-0.95..0.95);
    let c = rho * (vx * vy).sqrt();
    Matrix2::new(vx, c, c, vy)
}

/// Smallest root after `theta_k` by a dense scan followed by bisection.
fn dense_scan_root(theta_k: f64, p: &SpiralParams, v_a: f64, tau: f64) -> f64 {
    let base = p.frame_point(theta_k);
    let f = |t: f64| (p.rotation * (p.frame_point(t) - base) + p.drift * tau).norm_squared() - (v_a * tau).powi(2);
    let step = 1e-5;
    let mut lo = theta_k;
    loop {
        let hi = lo + step;
        if f(hi) >= 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if f(m) >= 0.0 {
                    b = m;
                } else {
                    a = m;
                }
            }
            return 0.5 * (a + b);
        }
        lo = hi;
    }
}

fn spiral_geometry() -> Check {
    let mut rng = rng_for(MASTER_SEED, &[3]);
    let w = 100.0;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..1000 {
        let cov = random_covariance(&mut rng);
        let p = make_spiral_params(&cov, Vector2::zeros(), Vector2::zeros(), w, 30.0).map_err(|e| e.to_string())?;
        let tr = cov.trace();
        let disc = ((cov[(0, 0)] - cov[(1, 1)]).powi(2) + 4.0 * cov[(0, 1)].powi(2)).sqrt();
        let (major, minor) = (((tr + disc) / 2.0).sqrt(), ((tr - disc) / 2.0).sqrt());
        ensure((p.semi_major - major).abs() <= 1e-9 * major && (p.semi_minor - minor).abs() <= 1e-9 * major, || {
            "semi-axes disagree with the eigenvalues".into()
        })?;
        for turn in [1.0, 3.0, 10.0] {
            for axis in [0.0, PI / 2.0, PI, 1.5 * PI] {
                let theta = 2.0 * PI * turn + axis;
                let gap = (p.world_point(theta + 2.0 * PI, 0, 0.5) - p.world_point(theta, 0, 0.5)).norm();
                worst_gap = worst_gap.max(gap);
                ensure(gap <= w + 1e-9, || format!("loop gap {gap} exceeds sensor width"))?;
            }
        }
    }

    let mut worst_spacing: f64 = 0.0;
    for i in 0..1000 {
        let cov = random_covariance(&mut rng);
        let vel = if i % 2 == 0 {
            Vector2::zeros()
        } else {
            Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))
        };
        let mut full = Matrix4::zeros();
        full.fixed_view_mut::<2, 2>(0, 0).copy_from(&cov);
        full[(2, 2)] = 0.3;
        full[(3, 3)] = 0.3;
        let mean = Vector4::new(rng.random_range(-1000.0..1000.0), rng.random_range(-1000.0..1000.0), vel[0], vel[1]);
        let belief = TargetBelief::new(mean, full, 0.0);
        let model = MotionModel::constant_velocity(0.5, rng.random_range(1e-4..5e-4)).map_err(|e| e.to_string())?;
        let plan = build_coverage_plan(Vector2::zeros(), 30.0, w, &belief, &model, 300).map_err(|e| e.to_string())?;
        for pair in plan.spiral_waypoints().windows(2) {
            let d = (pair[1] - pair[0]).norm();
            worst_spacing = worst_spacing.max((d - 15.0).abs());
            ensure((d - 15.0).abs() <= 1e-6, || format!("spiral spacing {d} != 15"))?;
        }
        for pair in plan.waypoints.windows(2) {
            ensure((pair[1] - pair[0]).norm() <= 15.0 + 1e-9, || "waypoints farther apart than one step".into())?;
        }
    }

    let mut worst_theta: f64 = 0.0;
    for _ in 0..1000 {
        let cov = random_covariance(&mut rng);
        let drift = Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let w = rng.random_range(20.0..200.0);
        let p = make_spiral_params(&cov, Vector2::zeros(), drift, w, 30.0).map_err(|e| e.to_string())?;
        let theta_k = rng.random_range(0.0..150.0);
        let got = step_theta(theta_k, &p, 30.0, 0.5).map_err(|e| e.to_string())?;
        let want = dense_scan_root(theta_k, &p, 30.0, 0.5);
        worst_theta = worst_theta.max((got - want).abs());
        ensure((got - want).abs() <= 1e-6, || format!("step from {theta_k}: {got} vs oracle {want}"))?;
    }
    Ok(format!(
        "max loop gap {worst_gap:.6}, max spacing error {worst_spacing:.2e} m, max phase error {worst_theta:.2e} rad"
    ))
}

fn random_belief(rng: &mut ChaCha8Rng) -> TargetBelief {
    let l = Matrix4::from_fn(|r, c| if r >= c { rng.random_range(-3.0..3.0) } else { 0.0 });
    let cov = l * l.transpose() + Matrix4::identity() * rng.random_range(0.01..10.0);
    let mean = Vector4::from_fn(|_, _| rng.random_range(-100.0..100.0));
    TargetBelief::new(mean, cov, 0.0)
}

fn rel_close(a: &Matrix4<f64>, b: &Matrix4<f64>, tol: f64) -> bool {
    (a - b).abs().max() <= tol * a.abs().max().max(b.abs().max()).max(1.0)
}

fn kalman_properties() -> Check {
    let mut rng = rng_for(MASTER_SEED, &[4]);
    let tol = 1e-9;
    let mut checks = 0;
    while checks < 10_000 {
        let b = random_belief(&mut rng);
        let tau = rng.random_range(0.1..2.0);
        let q = rng.random_range(0.0..0.01);
        let model = MotionModel::constant_velocity(tau, q).map_err(|e| e.to_string())?;
        let obs = ObservationModel::isotropic(rng.random_range(0.1..10.0)).map_err(|e| e.to_string())?;
        let k1 = rng.random_range(0..60u64);
        let k2 = rng.random_range(0..60u64);

        let joint = predict(&b, &model, k1 + k2);
        let split = predict(&predict(&b, &model, k1), &model, k2);
        ensure(rel_close(&joint.cov, &split.cov, tol), || "predict does not compose".into())?;
        ensure((joint.mean - split.mean).abs().max() <= tol * joint.mean.abs().max().max(1.0), || {
            "predicted means do not compose".into()
        })?;

        let f = model.transition();
        let mut cov = b.cov;
        for _ in 0..k1 + k2 {
            cov = f * cov * f.transpose() + model.process_noise();
        }
        ensure(rel_close(&joint.cov, &cov, tol), || "closed form disagrees with stepping".into())?;

        let z = joint.position() + Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let post = update(&joint, &z, &obs).map_err(|e| e.to_string())?;
        for m in [&joint.cov, &post.cov] {
            ensure(*m == m.transpose(), || "covariance not symmetric".into())?;
            let min_eig = m.symmetric_eigenvalues().min();
            ensure(min_eig >= -tol * m.abs().max(), || format!("covariance not PSD (min eigenvalue {min_eig})"))?;
        }

        let before = b.log_det_xy().map_err(|e| e.to_string())?;
        let after = joint.log_det_xy().map_err(|e| e.to_string())?;
        ensure(after >= before - tol * before.abs().max(1.0), || "log det fell under predict".into())?;
        let updated = post.log_det_xy().map_err(|e| e.to_string())?;
        ensure(updated <= after + tol * after.abs().max(1.0), || "log det rose under update".into())?;
        checks += 1;
    }
    Ok(format!("{checks} randomized belief checks"))
}

/// Lowest terminal U over all action sequences with every pursuit
/// succeeding.
fn exhaustive_best(ctx: &PlanningContext, state: &DecisionState) -> f64 {
    if state.remaining_steps == 0 || state.available_actions().is_empty() {
        return hiertrack::planner::terminal_uncertainty(ctx, state).unwrap();
    }
    state
        .available_actions()
        .into_iter()
        .map(|a| {
            let task = evaluate_action(ctx, state, a).unwrap();
            exhaustive_best(ctx, &apply_outcome(ctx, state, &task, Outcome::Find).unwrap())
        })
        .fold(f64::INFINITY, f64::min)
}

fn tree_search_vs_exhaustive() -> Check {
    let mut correct = 0;
    let mut decisive = 0;
    let toys = 100;
    for toy in 0..toys {
        let mut rng = rng_for(MASTER_SEED, &[5, toy]);
        let mut config = sample_scenario(2, &mut rng);
        config.budget = 240.0;
        let ctx =
            PlanningContext::new(config.motion_models().unwrap(), config.observation_model().unwrap(), 30.0, 100.0)
                .map_err(|e| e.to_string())?;
        let start = DecisionState {
            history: History::default(),
            beliefs: config.initial_beliefs(),
            agent_pos: config.agent_start(),
            remaining_steps: config.total_steps(),
            time: 0.0,
        };
        let values: Vec<f64> = start
            .available_actions()
            .into_iter()
            .map(|a| {
                let task = evaluate_action(&ctx, &start, a).unwrap();
                exhaustive_best(&ctx, &apply_outcome(&ctx, &start, &task, Outcome::Find).unwrap())
            })
            .collect();
        let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let optimal: Vec<usize> =
            (0..values.len()).filter(|&a| values[a] <= best + 1e-9 * best.abs().max(1.0)).collect();
        decisive += usize::from(optimal.len() == 1);

        let mcts = MctsConfig { iterations: 20_000, force_find: true, ..MctsConfig::default() };
        let decision = tree_search(&ctx, start, SearchMode::Fresh, &mcts, &mut rng).map_err(|e| e.to_string())?;
        if let Decision::Action(Some(a)) = decision {
            correct += usize::from(optimal.contains(&a));
        }
    }
    let summary = format!("{correct}/{toys} optimal first actions ({decisive} toys with a unique optimum)");
    if correct >= 95 {
        Ok(summary)
    } else {
        Err(format!("{summary}; need 95"))
    }
}

fn planner_ordering(report: &StudyReport) -> Check {
    let mut lines = Vec::new();
    let mut ok = report.failures.is_empty();
    for n in [2, 3] {
        let mean = |p: &str| report.tracking_aggregate(n, p).and_then(|a| a.mean_final_u).unwrap_or(f64::NAN);
        let (m, g, r) = (mean("mcts"), mean("greedy"), mean("random"));
        let pair = report.paired(n, "mcts", "greedy").ok_or("missing paired comparison")?;
        let rate = pair.win_rate.unwrap_or(0.0);
        ok &= m < g && g < r && rate >= 0.7 && pair.cases == 50;
        lines.push(format!(
            "n={n}: U mcts {m:.2} < greedy {g:.2} < random {r:.2}, mcts wins {}/{}",
            pair.wins, pair.cases
        ));
    }
    let summary = lines.join("; ");
    if ok {
        Ok(summary)
    } else {
        Err(format!("{summary} (need strict ordering and >= 70% wins)"))
    }
}

fn absolute_band(report: &StudyReport) -> Check {
    let agg = report.tracking_aggregate(2, "mcts").ok_or("no n=2 mcts results")?;
    let mean = agg.mean_final_u.unwrap_or(f64::NAN);
    let summary =
        format!("n=2 mcts mean U {mean:.2} ± {:.2} over {} cases", agg.std_final_u.unwrap_or(f64::NAN), agg.cases);
    if (7.0..=28.0).contains(&mean) && agg.cases == 50 {
        Ok(summary)
    } else {
        Err(format!("{summary}; expected within [7, 28]"))
    }
}

fn same_bytes(a: &Path, b: &Path) -> Result<(), String> {
    for file in ["cases.csv", "summary.json"] {
        let x = std::fs::read(a.join(file)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(file)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{file} differs between {} and {}", a.display(), b.display()))?;
    }
    Ok(())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (run, workers) in [1usize, 8, 8].into_iter().enumerate() {
        let est = EstimatorStudyOptions { cases: 12, runs: 300, seed: MASTER_SEED, workers, ..Default::default() };
        let track =
            TrackingStudyOptions { cases: 4, iterations: 3000, seed: MASTER_SEED, workers, ..Default::default() };
        let est_dir = dir.path().join(format!("est-{run}"));
        let track_dir = dir.path().join(format!("track-{run}"));
        emit_report(&run_estimator_study(&est).map_err(|e| e.to_string())?, &est_dir).map_err(|e| e.to_string())?;
        emit_report(&run_tracking_study(&track).map_err(|e| e.to_string())?, &track_dir).map_err(|e| e.to_string())?;
        outputs.push((est_dir, track_dir));
    }
    for (est, track) in &outputs[1..] {
        same_bytes(&outputs[0].0, est)?;
        same_bytes(&outputs[0].1, track)?;
    }
    Ok("estimator and tracking outputs identical for 1 and 8 workers and on rerun".into())
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |name: &str, started: Instant, result: Check| {
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("PASS  {name}: {msg} [{secs:.1}s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg} [{secs:.1}s]");
            }
        }
    };

    let t = Instant::now();
    report("estimator accuracy", t, estimator_accuracy());
    let t = Instant::now();
    report("coverage curve shape", t, coverage_curve_shape());
    let t = Instant::now();
    report("spiral geometry", t, spiral_geometry());
    let t = Instant::now();
    report("kalman properties", t, kalman_properties());
    let t = Instant::now();
    report("tree search vs exhaustive", t, tree_search_vs_exhaustive());

    let t = Instant::now();
    let opts = TrackingStudyOptions { seed: MASTER_SEED, ..TrackingStudyOptions::default() };
    match run_tracking_study(&opts) {
        Ok(tracking) => {
            report("planner ordering", t, planner_ordering(&tracking));
            report("absolute uncertainty band", t, absolute_band(&tracking));
        }
        Err(e) => {
            report("planner ordering", t, Err(e.to_string()));
            report("absolute uncertainty band", t, Err(e.to_string()));
        }
    }
    let t = Instant::now();
    report("determinism", t, determinism());

    if failed == 0 {
        println!("all acceptance checks passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance check(s) failed");
        ExitCode::FAILURE
    }
}

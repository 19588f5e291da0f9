//! Estimator-validation and multi-target tracking studies.

use std::time::Instant;

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::predict;
use crate::error::{Error, Result};
use crate::estimator::estimate_coverage;
use crate::scenario::{sample_scenario, PlannerKind, ScenarioConfig, DEFAULT_ITERATIONS, TRACKING_BUDGET};
use crate::seed::{derive_seed, rng_for, STREAM_ESTIMATOR, STREAM_TRACKING};
use crate::sim::{run_episode, step_truth, TargetTruth};
use crate::spiral::build_coverage_plan;

use super::report::{CaseRecord, FailureRecord, StudyReport};

/// Longest coverage curve evaluated when the study sets no budget.
pub const UNBOUNDED_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStudyOptions {
    pub cases: usize,
    pub runs: usize,
    pub departure_delays: Vec<f64>,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub timing: bool,
}

impl Default for EstimatorStudyOptions {
    fn default() -> Self {
        Self { cases: 100, runs: 2000, departure_delays: vec![0.0, 100.0, 200.0], seed: 0, workers: 1, timing: false }
    }
}

impl EstimatorStudyOptions {
    pub fn paper_scale() -> Self {
        Self { cases: 1000, runs: 10_000, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.cases == 0 {
            return Err(Error::InvalidConfig("estimator study needs at least one case".into()));
        }
        if self.runs < 100 {
            return Err(Error::InvalidConfig(format!(
                "estimator study needs at least 100 runs per case, got {}",
                self.runs
            )));
        }
        if self.departure_delays.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::InvalidConfig("departure delays must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingStudyOptions {
    pub target_counts: Vec<usize>,
    pub cases: usize,
    pub planners: Vec<PlannerKind>,
    pub seed: u64,
    pub iterations: usize,
    pub exploration: f64,
    pub budget: f64,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub timing: bool,
}

impl Default for TrackingStudyOptions {
    fn default() -> Self {
        Self {
            target_counts: vec![2, 3],
            cases: 50,
            planners: vec![PlannerKind::Mcts, PlannerKind::Greedy, PlannerKind::Random],
            seed: 0,
            iterations: DEFAULT_ITERATIONS,
            exploration: std::f64::consts::SQRT_2,
            budget: TRACKING_BUDGET,
            workers: 1,
            timing: false,
        }
    }
}

impl TrackingStudyOptions {
    pub fn paper_scale() -> Self {
        Self { cases: 100, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.cases == 0 || self.target_counts.is_empty() || self.planners.is_empty() {
            return Err(Error::InvalidConfig("tracking study needs cases, target counts and planners".into()));
        }
        if self.target_counts.contains(&0) {
            return Err(Error::InvalidConfig("target counts must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("planner iterations must be positive".into()));
        }
        if !(self.exploration >= 0.0 && self.exploration.is_finite()) {
            return Err(Error::InvalidConfig("exploration constant must be finite and >= 0".into()));
        }
        if !(self.budget >= 0.0 && self.budget.is_finite()) {
            return Err(Error::InvalidConfig(format!("budget must be >= 0, got {}", self.budget)));
        }
        Ok(())
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

/// Seed of estimator-study case `case`.
pub fn estimator_case_seed(master: u64, case: usize) -> u64 {
    derive_seed(master, &[STREAM_ESTIMATOR, case as u64])
}

/// Single-target scenario of estimator-study case `case`.
pub fn estimator_case(master: u64, case: usize) -> ScenarioConfig {
    sample_scenario(1, &mut rng_for(estimator_case_seed(master, case), &[0]))
}

/// Monte Carlo outcome of one fixed coverage plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageTrial {
    pub estimated_pfind: f64,
    /// From departure; `None` when the estimator reports no chance of a find.
    pub estimated_tfind: Option<f64>,
    pub empirical_pfind: f64,
    /// From departure; `None` when no run found the target.
    pub empirical_tfind: Option<f64>,
}

/// Waits `departure_delay`, then flies the plan for the propagated belief
/// against `runs` sampled true trajectories.
pub fn coverage_trial(config: &ScenarioConfig, departure_delay: f64, runs: usize, seed: u64) -> Result<CoverageTrial> {
    config.validate()?;
    let model = config.motion_models()?[0];
    let initial = config.initial_beliefs()[0];
    let wait = model.steps_for(departure_delay);
    let departure = predict(&initial, &model, wait);
    let agent = config.agent_start();
    let est = estimate_coverage(&departure, agent, config.agent_speed, config.sensor_width, &model, UNBOUNDED_STEPS)?;
    let plan =
        build_coverage_plan(agent, config.agent_speed, config.sensor_width, &departure, &model, est.cutoff_step())?;
    let waypoints: &[Vector2<f64>] = &plan.waypoints;
    let radius = 0.5 * config.sensor_width;

    let mut finds = 0usize;
    let mut find_time = 0.0;
    for run in 0..runs {
        let mut rng = rng_for(seed, &[1, run as u64]);
        let mut truth = TargetTruth::sample_from(&initial, model, &mut rng)?;
        for _ in 0..wait {
            truth = step_truth(&truth, &mut rng);
        }
        for (i, p) in waypoints.iter().enumerate() {
            if i > 0 {
                truth = step_truth(&truth, &mut rng);
            }
            if (truth.position() - p).norm() <= radius {
                finds += 1;
                find_time += i as f64 * config.tau;
                break;
            }
        }
    }
    Ok(CoverageTrial {
        estimated_pfind: est.p_max,
        estimated_tfind: (est.p_max > 0.0).then(|| est.time_to_find()),
        empirical_pfind: finds as f64 / runs as f64,
        empirical_tfind: (finds > 0).then(|| find_time / finds as f64),
    })
}

/// Estimated versus Monte Carlo find probability and find time for random
/// single-target cases at each departure delay.
pub fn run_estimator_study(opts: &EstimatorStudyOptions) -> Result<StudyReport> {
    opts.validate()?;
    let started = Instant::now();
    let jobs: Vec<(usize, usize)> =
        (0..opts.cases).flat_map(|c| (0..opts.departure_delays.len()).map(move |d| (c, d))).collect();
    let outcomes: Vec<std::result::Result<CaseRecord, FailureRecord>> = pool(opts.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(case, d)| {
                let job_start = Instant::now();
                let seed = estimator_case_seed(opts.seed, case);
                let t_d = opts.departure_delays[d];
                let config = estimator_case(opts.seed, case);
                match coverage_trial(&config, t_d, opts.runs, seed) {
                    Ok(trial) => Ok(CaseRecord {
                        t_d: Some(t_d),
                        empirical_pfind: Some(trial.empirical_pfind),
                        estimated_pfind: Some(trial.estimated_pfind),
                        empirical_tfind: trial.empirical_tfind,
                        estimated_tfind: trial.estimated_tfind,
                        runtime_s: opts.timing.then(|| job_start.elapsed().as_secs_f64()),
                        ..CaseRecord::new("estimator", 1, case, seed)
                    }
                    .rounded()),
                    Err(e) => Err(FailureRecord {
                        n_targets: 1,
                        case_id: case,
                        seed,
                        planner: None,
                        t_d: Some(t_d),
                        message: e.to_string(),
                    }),
                }
            })
            .collect()
    });
    let (records, failures) = split(outcomes);
    Ok(StudyReport {
        study: "estimator".into(),
        master_seed: opts.seed,
        config: serde_json::to_value(opts).expect("options serialize"),
        records,
        failures,
        total_runtime_s: opts.timing.then(|| started.elapsed().as_secs_f64()),
    })
}

/// Seeds of tracking-study case `case` with `n` targets: the scenario seed
/// and the episode seed shared by every planner.
pub fn tracking_case_seeds(master: u64, n: usize, case: usize) -> (u64, u64) {
    let base = derive_seed(master, &[STREAM_TRACKING, n as u64, case as u64]);
    (base, derive_seed(base, &[1]))
}

/// Scenario of tracking-study case `case` with `n` targets.
pub fn tracking_case(opts: &TrackingStudyOptions, n: usize, case: usize, planner: PlannerKind) -> ScenarioConfig {
    let (scenario_seed, episode_seed) = tracking_case_seeds(opts.seed, n, case);
    let mut config = sample_scenario(n, &mut rng_for(scenario_seed, &[0]));
    config.budget = opts.budget;
    config.planner = planner;
    config.planner_params.iterations = opts.iterations;
    config.planner_params.exploration = opts.exploration;
    config.planner_params.seed = episode_seed;
    config
}

/// One closed-loop episode per (target count, case, planner). Every planner
/// sees the same scenario and the same true trajectories for a case.
pub fn run_tracking_study(opts: &TrackingStudyOptions) -> Result<StudyReport> {
    opts.validate()?;
    let started = Instant::now();
    let mut jobs = Vec::new();
    for &n in &opts.target_counts {
        for case in 0..opts.cases {
            for &planner in &opts.planners {
                jobs.push((n, case, planner));
            }
        }
    }
    let outcomes = pool(opts.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(n, case, planner)| {
                let job_start = Instant::now();
                let config = tracking_case(opts, n, case, planner);
                let seed = config.planner_params.seed;
                match run_episode(&config, seed) {
                    Ok(episode) => Ok(CaseRecord {
                        planner: Some(planner.name().into()),
                        final_u: Some(episode.final_u),
                        runtime_s: opts.timing.then(|| job_start.elapsed().as_secs_f64()),
                        ..CaseRecord::new("tracking", n, case, seed)
                    }
                    .rounded()),
                    Err(e) => Err(FailureRecord {
                        n_targets: n,
                        case_id: case,
                        seed,
                        planner: Some(planner.name().into()),
                        t_d: None,
                        message: e.to_string(),
                    }),
                }
            })
            .collect::<Vec<_>>()
    });
    let (records, failures) = split(outcomes);
    Ok(StudyReport {
        study: "tracking".into(),
        master_seed: opts.seed,
        config: serde_json::to_value(opts).expect("options serialize"),
        records,
        failures,
        total_runtime_s: opts.timing.then(|| started.elapsed().as_secs_f64()),
    })
}

fn split(outcomes: Vec<std::result::Result<CaseRecord, FailureRecord>>) -> (Vec<CaseRecord>, Vec<FailureRecord>) {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    (records, failures)
}

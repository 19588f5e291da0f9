//! Ground-truth simulation and closed-loop episode execution.
//!
//! True targets move under the same constant-velocity model with sampled
//! process noise. The agent flies intercept-and-spiral sub-tasks chosen by a
//! planner; every target's belief is predicted each step and updated
//! whenever the target sits inside the circular sensor footprint.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::belief::{predict, uncertainty_metric, update, MotionModel, ObservationModel, TargetBelief};
use crate::error::{Error, Result};
use crate::estimator::estimate_coverage;
use crate::planner::{DecisionState, History, Outcome, PlanningContext, TargetPlanner};
use crate::scenario::ScenarioConfig;
use crate::seed::{rng_for, STREAM_MEASUREMENT, STREAM_PLANNER, STREAM_TRUTH};
use crate::spiral::build_coverage_plan;

/// Lower-triangular factor `L` with `L Lᵀ = m`; an all-zero matrix factors
/// to zero.
fn psd_factor4(m: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    if m.iter().all(|&v| v == 0.0) {
        return Ok(Matrix4::zeros());
    }
    m.cholesky().map(|c| c.l()).ok_or(Error::NotPsd)
}

fn standard_normal4<R: Rng + ?Sized>(rng: &mut R) -> Vector4<f64> {
    Vector4::from_fn(|_, _| rng.sample(StandardNormal))
}

/// True state of one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTruth {
    pub state: Vector4<f64>,
    pub model: MotionModel,
    noise_factor: Matrix4<f64>,
}

impl TargetTruth {
    pub fn new(state: Vector4<f64>, model: MotionModel) -> Result<Self> {
        let noise_factor = psd_factor4(model.process_noise())?;
        Ok(Self { state, model, noise_factor })
    }

    /// Draws the initial true state from a belief.
    pub fn sample_from<R: Rng + ?Sized>(belief: &TargetBelief, model: MotionModel, rng: &mut R) -> Result<Self> {
        let factor = psd_factor4(&belief.cov)?;
        Self::new(belief.mean + factor * standard_normal4(rng), model)
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.state[0], self.state[1])
    }
}

/// `state' = F·state + w`, `w ~ N(0, Q)`.
pub fn step_truth<R: Rng + ?Sized>(truth: &TargetTruth, rng: &mut R) -> TargetTruth {
    let mut next = *truth;
    next.state = truth.model.transition() * truth.state + truth.noise_factor * standard_normal4(rng);
    next
}

/// Noisy position measurement when the target lies within the footprint
/// (boundary inclusive).
pub fn detect<R: Rng + ?Sized>(
    agent_pos: Vector2<f64>,
    truth: &TargetTruth,
    sensor_width: f64,
    rng: &mut R,
    obs: &ObservationModel,
) -> Option<Vector2<f64>> {
    let pos = truth.position();
    if (pos - agent_pos).norm() > 0.5 * sensor_width {
        return None;
    }
    let factor = obs.noise().cholesky().map(|c| c.l()).unwrap_or_else(Matrix2::zeros);
    let noise = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    Some(pos + factor * noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub step: usize,
    pub time: f64,
    pub target: usize,
    pub measurement: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubTaskRecord {
    pub target: usize,
    pub start_step: usize,
    pub end_step: usize,
    pub outcome: Outcome,
    pub follow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub final_u: f64,
    pub steps: usize,
    pub detections: Vec<Detection>,
    pub subtasks: Vec<SubTaskRecord>,
    /// Agent position at every step, including step 0.
    pub agent_track: Vec<[f64; 2]>,
    /// Every target's belief at every step, including step 0.
    pub belief_log: Vec<Vec<TargetBelief>>,
    /// Every target's true `[x, y, vx, vy]` at every step, including step 0.
    pub truth_log: Vec<Vec<[f64; 4]>>,
}

/// Mutable world during one episode.
struct World {
    truths: Vec<TargetTruth>,
    beliefs: Vec<TargetBelief>,
    models: Vec<MotionModel>,
    obs: ObservationModel,
    sensor_width: f64,
    agent_speed: f64,
    tau: f64,
    agent: Vector2<f64>,
    step: usize,
    total_steps: usize,
    truth_rngs: Vec<ChaCha8Rng>,
    meas_rng: ChaCha8Rng,
    detections: Vec<Detection>,
    track: Vec<[f64; 2]>,
    belief_log: Vec<Vec<TargetBelief>>,
    truth_log: Vec<Vec<[f64; 4]>>,
}

fn truth_row(truths: &[TargetTruth]) -> Vec<[f64; 4]> {
    truths.iter().map(|t| t.state.into()).collect()
}

impl World {
    fn done(&self) -> bool {
        self.step >= self.total_steps
    }

    fn remaining(&self) -> usize {
        self.total_steps - self.step
    }

    /// Advances one step with the agent moving to `next`; returns which
    /// targets were detected.
    fn advance(&mut self, next: Vector2<f64>) -> Result<Vec<usize>> {
        self.step += 1;
        let time = self.step as f64 * self.tau;
        for (truth, rng) in self.truths.iter_mut().zip(&mut self.truth_rngs) {
            *truth = step_truth(truth, rng);
        }
        for (belief, model) in self.beliefs.iter_mut().zip(&self.models) {
            *belief = predict(belief, model, 1);
            belief.time = time;
        }
        self.agent = next;
        let mut seen = Vec::new();
        for (i, truth) in self.truths.iter().enumerate() {
            if let Some(z) = detect(self.agent, truth, self.sensor_width, &mut self.meas_rng, &self.obs) {
                self.beliefs[i] = update(&self.beliefs[i], &z, &self.obs)?;
                self.detections.push(Detection { step: self.step, time, target: i, measurement: [z[0], z[1]] });
                seen.push(i);
            }
        }
        self.track.push([self.agent[0], self.agent[1]]);
        self.belief_log.push(self.beliefs.clone());
        self.truth_log.push(truth_row(&self.truths));
        Ok(seen)
    }

    /// One step towards where `target`'s belief mean will be next step.
    fn chase(&mut self, target: usize) -> Result<Vec<usize>> {
        let b = &self.beliefs[target];
        let aim = b.position() + b.velocity() * self.tau;
        let offset = aim - self.agent;
        let stride = self.agent_speed * self.tau;
        let next = if offset.norm() <= stride { aim } else { self.agent + offset * (stride / offset.norm()) };
        self.advance(next)
    }

    fn decision_state(&self, history: &History) -> DecisionState {
        DecisionState {
            history: history.clone(),
            beliefs: self.beliefs.clone(),
            agent_pos: self.agent,
            remaining_steps: self.remaining(),
            time: self.step as f64 * self.tau,
        }
    }
}

/// Runs one episode of `config` with the planner named in the config.
pub fn run_episode(config: &ScenarioConfig, seed: u64) -> Result<EpisodeResult> {
    let mut planner = crate::bench::baselines::make_planner(config, rng_for(seed, &[STREAM_PLANNER]));
    run_episode_with(config, seed, planner.as_mut())
}

/// Runs one episode with an explicit planner.
pub fn run_episode_with(config: &ScenarioConfig, seed: u64, planner: &mut dyn TargetPlanner) -> Result<EpisodeResult> {
    config.validate()?;
    let models = config.motion_models()?;
    let obs = config.observation_model()?;
    let ctx = PlanningContext::new(models.clone(), obs, config.agent_speed, config.sensor_width)?;
    let beliefs = config.initial_beliefs();

    let mut truth_rngs: Vec<ChaCha8Rng> =
        (0..beliefs.len()).map(|i| rng_for(seed, &[STREAM_TRUTH, i as u64])).collect();
    let truths = beliefs
        .iter()
        .zip(&models)
        .zip(&mut truth_rngs)
        .map(|((b, m), rng)| TargetTruth::sample_from(b, *m, rng))
        .collect::<Result<Vec<_>>>()?;

    let agent = config.agent_start();
    let truth_log = vec![truth_row(&truths)];
    let mut world = World {
        truths,
        beliefs: beliefs.clone(),
        models: models.clone(),
        obs,
        sensor_width: config.sensor_width,
        agent_speed: config.agent_speed,
        tau: config.tau,
        agent,
        step: 0,
        total_steps: config.total_steps(),
        truth_rngs,
        meas_rng: rng_for(seed, &[STREAM_MEASUREMENT]),
        detections: Vec::new(),
        track: vec![[agent[0], agent[1]]],
        belief_log: vec![beliefs],
        truth_log,
    };

    let mut history = History::default();
    let mut subtasks = Vec::new();
    let mut queued: Option<usize> = None;

    while !world.done() {
        let state = world.decision_state(&history);
        let available = state.available_actions();
        if available.is_empty() {
            while !world.done() {
                world.advance(world.agent)?;
            }
            break;
        }
        let action = match queued.take().filter(|a| available.contains(a)) {
            Some(a) => a,
            None => planner.choose(&ctx, &state)?.filter(|a| available.contains(a)).unwrap_or(available[0]),
        };
        let start_step = world.step;

        if history.last_found() == Some(action) {
            while !world.done() {
                world.chase(action)?;
            }
            history.push(action, Outcome::Find);
            subtasks.push(SubTaskRecord {
                target: action,
                start_step,
                end_step: world.step,
                outcome: Outcome::Find,
                follow: true,
            });
            break;
        }

        let belief = world.beliefs[action];
        let model = &models[action];
        let est =
            estimate_coverage(&belief, world.agent, config.agent_speed, config.sensor_width, model, world.remaining())?;
        let plan = build_coverage_plan(
            world.agent,
            config.agent_speed,
            config.sensor_width,
            &belief,
            model,
            est.cutoff_step(),
        )?;
        let conditional = planner.plan_conditional(&ctx, &state, action)?;

        let mut found = false;
        for i in 1..=plan.duration_steps().max(1) {
            if world.done() {
                break;
            }
            let next = plan.waypoints.get(i).copied().unwrap_or(world.agent);
            if world.advance(next)?.contains(&action) {
                found = true;
                break;
            }
        }
        if found {
            for _ in 1..config.dwell {
                if world.done() {
                    break;
                }
                world.chase(action)?;
            }
        }
        let outcome = if found { Outcome::Find } else { Outcome::Miss };
        history.push(action, outcome);
        subtasks.push(SubTaskRecord { target: action, start_step, end_step: world.step, outcome, follow: false });
        queued = conditional.and_then(|c| c.next(outcome));
    }

    let final_u = uncertainty_metric(&world.beliefs, &models, world.step as f64 * config.tau)?;
    Ok(EpisodeResult {
        seed,
        final_u,
        steps: world.step,
        detections: world.detections,
        subtasks,
        agent_track: world.track,
        belief_log: world.belief_log,
        truth_log: world.truth_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn model(q: f64) -> MotionModel {
        MotionModel::constant_velocity(0.5, q).unwrap()
    }

    #[test]
    fn noiseless_truth_is_constant_velocity() {
        let t = TargetTruth::new(Vector4::new(1.0, 2.0, 3.0, -4.0), model(0.0)).unwrap();
        let next = step_truth(&t, &mut rng_for(1, &[]));
        assert_eq!(next.state, Vector4::new(2.5, 0.0, 3.0, -4.0));
    }

    #[test]
    fn truth_streams_repeat_per_seed() {
        let t = TargetTruth::new(Vector4::zeros(), model(3e-4)).unwrap();
        let walk = |seed| {
            let mut rng = rng_for(seed, &[]);
            let mut cur = t;
            (0..50)
                .map(|_| {
                    cur = step_truth(&cur, &mut rng);
                    cur.state
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(walk(4), walk(4));
        assert_ne!(walk(4), walk(5));
    }

    #[test]
    fn footprint_boundary_is_inclusive() {
        let obs = ObservationModel::default();
        let mut rng = rng_for(2, &[]);
        let on_edge = TargetTruth::new(Vector4::new(50.0, 0.0, 0.0, 0.0), model(0.0)).unwrap();
        assert!(detect(Vector2::zeros(), &on_edge, 100.0, &mut rng, &obs).is_some());
        let outside = TargetTruth::new(Vector4::new(50.0 + 1e-9, 0.0, 0.0, 0.0), model(0.0)).unwrap();
        assert!(detect(Vector2::zeros(), &outside, 100.0, &mut rng, &obs).is_none());
    }

    #[test]
    fn non_psd_process_noise_is_rejected() {
        let belief = TargetBelief::new(Vector4::zeros(), -Matrix4::identity(), 0.0);
        assert!(matches!(TargetTruth::sample_from(&belief, model(1e-4), &mut rng_for(1, &[])), Err(Error::NotPsd)));
    }
}

//! Scenario descriptions and the randomized scenario generator.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{MotionModel, ObservationModel, TargetBelief};
use crate::error::{Error, Result};

pub const AGENT_SPEED: f64 = 30.0;
pub const SENSOR_WIDTH: f64 = 100.0;
pub const TIME_STEP: f64 = 0.5;
pub const TRACKING_BUDGET: f64 = 900.0;

pub const POSITION_RANGE: (f64, f64) = (-1000.0, 1000.0);
pub const VELOCITY_RANGE: (f64, f64) = (-3.0, 3.0);
pub const POSITION_VARIANCE_RANGE: (f64, f64) = (500.0, 2000.0);
pub const VELOCITY_VARIANCE_RANGE: (f64, f64) = (0.25, 0.5);
pub const CORRELATION_RANGE: (f64, f64) = (-0.8, 0.8);
pub const PROCESS_NOISE_RANGE: (f64, f64) = (0.0001, 0.0005);

pub const DEFAULT_ITERATIONS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    #[default]
    Mcts,
    Greedy,
    Random,
}

impl PlannerKind {
    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Mcts => "mcts",
            PlannerKind::Greedy => "greedy",
            PlannerKind::Random => "random",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mcts" => Ok(PlannerKind::Mcts),
            "greedy" => Ok(PlannerKind::Greedy),
            "random" => Ok(PlannerKind::Random),
            other => Err(Error::InvalidConfig(format!("unknown planner '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerParams {
    pub iterations: usize,
    /// UCB1 exploration constant applied to min/max-normalised values.
    pub exploration: f64,
    pub seed: u64,
    /// Optional wall-clock cap per search, in seconds. Leaves results
    /// machine-dependent when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit_s: Option<f64>,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self { iterations: DEFAULT_ITERATIONS, exploration: std::f64::consts::SQRT_2, seed: 0, time_limit_s: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    /// `[x, y, vx, vy]`
    pub mean: [f64; 4],
    /// Row-major 4×4 initial covariance.
    pub cov: [[f64; 4]; 4],
    /// Process-noise intensity.
    pub q: f64,
}

impl TargetSpec {
    pub fn belief(&self) -> TargetBelief {
        TargetBelief::new(Vector4::from(self.mean), Matrix4::from_fn(|r, c| self.cov[r][c]), 0.0)
    }
}

fn default_observation_noise() -> [[f64; 2]; 2] {
    [[1.0, 0.0], [0.0, 1.0]]
}

fn default_dwell() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_targets: usize,
    pub targets: Vec<TargetSpec>,
    pub agent_start: [f64; 2],
    pub agent_speed: f64,
    pub sensor_width: f64,
    pub tau: f64,
    pub budget: f64,
    #[serde(default)]
    pub planner: PlannerKind,
    #[serde(default)]
    pub planner_params: PlannerParams,
    /// Stationary wait before departure (estimator study only).
    #[serde(default)]
    pub departure_delay: f64,
    #[serde(default = "default_observation_noise")]
    pub observation_noise: [[f64; 2]; 2],
    /// Measurement updates taken per detection event.
    #[serde(default = "default_dwell")]
    pub dwell: usize,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_targets == 0 || self.n_targets != self.targets.len() {
            return bad(format!("n_targets = {} but {} targets listed", self.n_targets, self.targets.len()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.budget >= 0.0 && self.budget.is_finite()) {
            return bad(format!("budget must be >= 0, got {}", self.budget));
        }
        if !(self.sensor_width > 0.0 && self.sensor_width.is_finite()) {
            return bad(format!("sensor_width must be positive, got {}", self.sensor_width));
        }
        if !(self.departure_delay >= 0.0) {
            return bad(format!("departure_delay must be >= 0, got {}", self.departure_delay));
        }
        if self.dwell == 0 {
            return bad("dwell must be at least 1".into());
        }
        if self.planner_params.iterations == 0 {
            return bad("planner iterations must be positive".into());
        }
        if !(self.planner_params.exploration >= 0.0) {
            return bad("exploration constant must be >= 0".into());
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.q >= 0.0 && t.q.is_finite()) {
                return bad(format!("target {i}: q must be >= 0"));
            }
            let cov = Matrix4::from_fn(|r, c| t.cov[r][c]);
            if (cov - cov.transpose()).abs().max() > 1e-9 * cov.abs().max().max(1.0) {
                return bad(format!("target {i}: covariance is not symmetric"));
            }
            if cov.cholesky().is_none() {
                return bad(format!("target {i}: covariance is not positive definite"));
            }
            let speed = Vector2::new(t.mean[2], t.mean[3]).norm();
            if !(self.agent_speed > speed) {
                return bad(format!(
                    "target {i}: agent speed {} does not exceed target speed {speed}",
                    self.agent_speed
                ));
            }
        }
        self.observation_model()?;
        Ok(())
    }

    pub fn motion_models(&self) -> Result<Vec<MotionModel>> {
        self.targets.iter().map(|t| MotionModel::constant_velocity(self.tau, t.q)).collect()
    }

    pub fn observation_model(&self) -> Result<ObservationModel> {
        let r = self.observation_noise;
        ObservationModel::new(Matrix2::new(r[0][0], r[0][1], r[1][0], r[1][1]))
    }

    pub fn initial_beliefs(&self) -> Vec<TargetBelief> {
        self.targets.iter().map(TargetSpec::belief).collect()
    }

    pub fn agent_start(&self) -> Vector2<f64> {
        Vector2::from(self.agent_start)
    }

    pub fn total_steps(&self) -> usize {
        (self.budget / self.tau).round() as usize
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config serializes")
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, range: (f64, f64)) -> f64 {
    rng.random_range(range.0..=range.1)
}

/// Draws one random target description from the benchmark distributions.
pub fn sample_target<R: Rng + ?Sized>(rng: &mut R) -> TargetSpec {
    let x = uniform(rng, POSITION_RANGE);
    let y = uniform(rng, POSITION_RANGE);
    let vx = uniform(rng, VELOCITY_RANGE);
    let vy = uniform(rng, VELOCITY_RANGE);
    let var_x = uniform(rng, POSITION_VARIANCE_RANGE);
    let var_y = uniform(rng, POSITION_VARIANCE_RANGE);
    let var_vx = uniform(rng, VELOCITY_VARIANCE_RANGE);
    let var_vy = uniform(rng, VELOCITY_VARIANCE_RANGE);
    let rho = uniform(rng, CORRELATION_RANGE);
    let q = uniform(rng, PROCESS_NOISE_RANGE);
    let cxy = rho * (var_x * var_y).sqrt();
    TargetSpec {
        mean: [x, y, vx, vy],
        cov: [[var_x, cxy, 0.0, 0.0], [cxy, var_y, 0.0, 0.0], [0.0, 0.0, var_vx, 0.0], [0.0, 0.0, 0.0, var_vy]],
        q,
    }
}

/// Random benchmark scenario: agent at the origin, 30 m/s, 100 m sensor,
/// τ = 0.5 s, 900 s budget.
pub fn sample_scenario<R: Rng + ?Sized>(n_targets: usize, rng: &mut R) -> ScenarioConfig {
    let targets = (0..n_targets).map(|_| sample_target(rng)).collect();
    ScenarioConfig {
        n_targets,
        targets,
        agent_start: [0.0, 0.0],
        agent_speed: AGENT_SPEED,
        sensor_width: SENSOR_WIDTH,
        tau: TIME_STEP,
        budget: TRACKING_BUDGET,
        planner: PlannerKind::Mcts,
        planner_params: PlannerParams::default(),
        departure_delay: 0.0,
        observation_noise: default_observation_noise(),
        dwell: 1,
    }
}

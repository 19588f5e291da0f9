//! Shifting elliptic spiral coverage paths.
//!
//! In the ellipse frame `{E}` the static spiral is
//! `r(θ) = a + bθ`, `x = r(θ)·A·cos θ`, `y = r(θ)·B·sin θ`, where `A ≥ B`
//! are the square roots of the position-covariance eigenvalues. The world
//! path adds the frame rotation, the spiral origin and the estimated target
//! drift `v̂·kτ`, so the spiral stays centred on the moving belief mean.
//! Each phase step is chosen so the agent moves exactly `v_a·τ`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::belief::{predict, MotionModel, TargetBelief};
use crate::error::{Error, Result};

const SCAN_STEP: f64 = PI / 180.0;
const MAX_EXPANSIONS: u32 = 8;

/// Geometry of one shifting elliptic spiral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralParams {
    /// Radial offset; zero so the spiral starts at the ellipse centre.
    pub a: f64,
    /// Radial growth per radian, sized so one loop advances one sensor width
    /// along the major axis.
    pub b: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Columns are the unit eigenvectors of the major and minor axes.
    pub rotation: Matrix2<f64>,
    pub center0: Vector2<f64>,
    pub drift: Vector2<f64>,
    pub theta0: f64,
}

impl SpiralParams {
    pub fn radius(&self, theta: f64) -> f64 {
        self.a + self.b * theta
    }

    /// Point on the static spiral in the ellipse frame.
    pub fn frame_point(&self, theta: f64) -> Vector2<f64> {
        let r = self.radius(theta);
        Vector2::new(r * self.semi_major * theta.cos(), r * self.semi_minor * theta.sin())
    }

    /// World-frame waypoint for phase `theta` at coverage step `k`.
    pub fn world_point(&self, theta: f64, k: usize, tau: f64) -> Vector2<f64> {
        self.center0 + self.rotation * self.frame_point(theta) + self.drift * (k as f64 * tau)
    }

    /// Gap between consecutive loops along the (major, minor) axes.
    pub fn loop_gaps(&self) -> (f64, f64) {
        (2.0 * PI * self.b * self.semi_major, 2.0 * PI * self.b * self.semi_minor)
    }
}

/// Eigen-decomposition of a symmetric 2×2 matrix: eigenvalues in descending
/// order and a right-handed matrix of unit eigenvectors. A circular input
/// aligns the first axis with world x.
pub fn symmetric_eigen2(m: &Matrix2<f64>) -> (f64, f64, Matrix2<f64>) {
    let (a, c, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = half_diff.hypot(c);
    let l1 = mean + disc;
    let l2 = mean - disc;

    let scale = a.abs().max(d.abs()).max(f64::MIN_POSITIVE);
    let u1 = if disc <= 1e-14 * scale {
        Vector2::new(1.0, 0.0)
    } else {
        // Two algebraically equivalent eigenvector forms; take the better
        // conditioned one.
        let v1 = Vector2::new(l1 - d, c);
        let v2 = Vector2::new(c, l1 - a);
        if v1.norm_squared() >= v2.norm_squared() {
            v1.normalize()
        } else {
            v2.normalize()
        }
    };
    let rotation = Matrix2::new(u1[0], -u1[1], u1[1], u1[0]);
    (l1, l2, rotation)
}

pub fn make_spiral_params(
    sigma_xy: &Matrix2<f64>,
    center: Vector2<f64>,
    v_hat: Vector2<f64>,
    sensor_width: f64,
    agent_speed: f64,
) -> Result<SpiralParams> {
    if !(sensor_width > 0.0) {
        return Err(Error::Domain(format!("sensor width must be positive, got {sensor_width}")));
    }
    if agent_speed <= v_hat.norm() {
        return Err(Error::SpeedInfeasible { agent_speed, target_speed: v_hat.norm() });
    }
    let det = sigma_xy.determinant();
    if !(sigma_xy[(0, 0)] > 0.0 && det > 0.0) {
        return Err(Error::DegenerateEllipse { det });
    }
    let (l1, l2, rotation) = symmetric_eigen2(sigma_xy);
    if !(l2 > 0.0) {
        return Err(Error::DegenerateEllipse { det });
    }
    let semi_major = l1.sqrt();
    let semi_minor = l2.sqrt();
    Ok(SpiralParams {
        a: 0.0,
        b: sensor_width / (2.0 * PI * semi_major.max(semi_minor)),
        semi_major,
        semi_minor,
        rotation,
        center0: center,
        drift: v_hat,
        theta0: 0.0,
    })
}

/// Next spiral phase: the smallest `θ > θ_k` at which the agent, moving at
/// `agent_speed` for one step, lands on the spiral shifted by `v̂·τ`.
///
/// The residual `f(θ) = ‖R(E(θ) − E(θ_k)) + v̂τ‖² − (v_a τ)²` is negative
/// at `θ_k`; the first sign change is located by a 1° scan over a window
/// that starts at π/2 and doubles up to eight times, then refined by
/// bisection.
pub fn step_theta(theta_k: f64, params: &SpiralParams, agent_speed: f64, tau: f64) -> Result<f64> {
    let reach2 = (agent_speed * tau).powi(2);
    let base = params.frame_point(theta_k);
    let shift = params.drift * tau;
    let residual = |theta: f64| (params.rotation * (params.frame_point(theta) - base) + shift).norm_squared() - reach2;

    if residual(theta_k) >= 0.0 {
        return Err(Error::StepFailure { theta: theta_k, expansions: 0 });
    }
    let mut lo = theta_k;
    let mut window = FRAC_PI_2;
    for _ in 0..=MAX_EXPANSIONS {
        let end = theta_k + window;
        while lo < end {
            let hi = (lo + SCAN_STEP).min(end);
            if residual(hi) >= 0.0 {
                return Ok(bisect(residual, lo, hi, reach2));
            }
            lo = hi;
        }
        window *= 2.0;
    }
    Err(Error::StepFailure { theta: theta_k, expansions: MAX_EXPANSIONS })
}

/// Bisection on `[lo, hi]` with `f(lo) < 0 <= f(hi)`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, scale: f64) -> f64 {
    let tol = 1e-12 * scale;
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid.abs() <= tol {
            return mid;
        }
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    if f_lo.abs() < f_hi.abs() {
        lo
    } else {
        hi
    }
}

/// Earliest meeting point of an agent at constant speed with a target
/// moving at the belief's mean velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intercept {
    pub point: Vector2<f64>,
    /// Exact meeting time in seconds (not rounded to the step grid).
    pub time: f64,
}

impl Intercept {
    /// Whole time steps needed to reach the meeting point.
    pub fn steps(&self, tau: f64) -> usize {
        (self.time / tau - 1e-9).ceil().max(0.0) as usize
    }
}

pub fn intercept(agent_pos: Vector2<f64>, agent_speed: f64, belief: &TargetBelief) -> Result<Intercept> {
    let v_hat = belief.velocity();
    let speed2 = v_hat.norm_squared();
    if agent_speed * agent_speed <= speed2 {
        return Err(Error::SpeedInfeasible { agent_speed, target_speed: speed2.sqrt() });
    }
    let d = belief.position() - agent_pos;
    let dist2 = d.norm_squared();
    if dist2 == 0.0 {
        return Ok(Intercept { point: belief.position(), time: 0.0 });
    }
    // (v_a² − |v̂|²) t² − 2 (d·v̂) t − |d|² = 0, positive root.
    let a = agent_speed * agent_speed - speed2;
    let beta = d.dot(&v_hat);
    let root = (beta * beta + a * dist2).sqrt();
    let time = if beta >= 0.0 { (beta + root) / a } else { dist2 / (root - beta) };
    Ok(Intercept { point: belief.position() + v_hat * time, time })
}

/// A full coverage sub-task path: straight intercept leg then the shifting
/// spiral, one waypoint per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveragePlan {
    /// `waypoints[i]` is the agent position `i` steps after departure;
    /// `waypoints[0]` is the departure position.
    pub waypoints: Vec<Vector2<f64>>,
    /// Spiral phase of each spiral waypoint, starting at the intercept
    /// arrival (`thetas[k]` belongs to `waypoints[intercept_steps + k]`).
    pub thetas: Vec<f64>,
    pub intercept_steps: usize,
    pub start_time: f64,
    pub cutoff_step: usize,
    pub params: SpiralParams,
}

impl CoveragePlan {
    pub fn spiral_waypoints(&self) -> &[Vector2<f64>] {
        &self.waypoints[self.intercept_steps..]
    }

    /// Number of time steps needed to fly the whole plan.
    pub fn duration_steps(&self) -> usize {
        self.waypoints.len() - 1
    }
}

/// Builds the intercept leg and the spiral truncated at `cutoff_step`
/// coverage steps. The spiral is sized from the belief propagated to the
/// intercept arrival step and centred on that propagated mean.
pub fn build_coverage_plan(
    agent_pos: Vector2<f64>,
    agent_speed: f64,
    sensor_width: f64,
    belief: &TargetBelief,
    model: &MotionModel,
    cutoff_step: usize,
) -> Result<CoveragePlan> {
    let tau = model.tau();
    let meet = intercept(agent_pos, agent_speed, belief)?;
    let intercept_steps = meet.steps(tau);
    let arrival = predict(belief, model, intercept_steps as u64);
    let params =
        make_spiral_params(&arrival.position_cov(), arrival.position(), arrival.velocity(), sensor_width, agent_speed)?;

    let stride = agent_speed * tau;
    let mut waypoints = Vec::with_capacity(intercept_steps + cutoff_step + 1);
    let leg = params.center0 - agent_pos;
    let leg_len = leg.norm();
    for i in 0..intercept_steps {
        let along = (i as f64 * stride).min(leg_len);
        let p = if leg_len > 0.0 { agent_pos + leg * (along / leg_len) } else { agent_pos };
        waypoints.push(p);
    }

    let mut thetas = Vec::with_capacity(cutoff_step + 1);
    let mut theta = params.theta0;
    thetas.push(theta);
    waypoints.push(params.world_point(theta, 0, tau));
    for k in 1..=cutoff_step {
        theta = step_theta(theta, &params, agent_speed, tau)?;
        thetas.push(theta);
        waypoints.push(params.world_point(theta, k, tau));
    }

    Ok(CoveragePlan { waypoints, thetas, intercept_steps, start_time: belief.time, cutoff_step, params })
}

//! Analytic prediction of a coverage sub-task's outcome.
//!
//! The swept area is modelled as growing linearly, `S(k) = v_a·w·kτ + S_init`
//! with `S_init = π(w/2)²`, while the target's position ellipse grows under
//! the motion model. The probability that the target lies inside an
//! ellipse of area `S` is the df-2 chi-squared CDF at `S / (π√det Σ^{xy})`.
//! Coverage stops paying off once that probability stalls.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::belief::{MotionModel, TargetBelief};
use crate::error::{Error, Result};
use crate::spiral::intercept;

/// One-step gain below which the find probability is considered stalled.
pub const STALL_EPSILON: f64 = 1e-9;

// Safety net for pathological inputs (e.g. a frozen, zero-size ellipse with
// an unlimited budget); normal cases stall within a few thousand steps.
const MAX_COVERAGE_STEPS: usize = 2_000_000;

/// Chi-squared CDF with two degrees of freedom, `1 − exp(−x/2)`.
pub fn chi2_cdf_df2(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("chi-squared argument must be >= 0, got {x}")));
    }
    Ok(-(-0.5 * x).exp_m1())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageEstimate {
    /// `pcdf[k]` is the find probability after `k` spiral steps; the curve
    /// is flat beyond the last entry.
    pub pcdf: Vec<f64>,
    pub t_cutoff: f64,
    pub p_max: f64,
    /// Mean find time given a find, measured from the start of the spiral.
    pub expected_find_time: f64,
    /// Intercept leg duration, rounded up to whole steps.
    pub intercept_time: f64,
    pub intercept_steps: usize,
    pub tau: f64,
}

impl CoverageEstimate {
    pub fn cutoff_step(&self) -> usize {
        self.pcdf.len().saturating_sub(1)
    }

    /// `(k, P_cdf(k))` pairs.
    pub fn curve(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.pcdf.iter().copied().enumerate()
    }

    /// Find probability after `k` spiral steps (flat after the cutoff).
    pub fn pcdf_at(&self, k: usize) -> f64 {
        match self.pcdf.len() {
            0 => 0.0,
            n => self.pcdf[k.min(n - 1)],
        }
    }

    /// Expected duration from departure to a find, given a find.
    pub fn time_to_find(&self) -> f64 {
        self.intercept_time + self.expected_find_time
    }

    /// Duration from departure to giving up.
    pub fn time_to_miss(&self) -> f64 {
        self.intercept_time + self.t_cutoff
    }

    fn from_curve(pcdf: Vec<f64>, intercept_steps: usize, tau: f64) -> Self {
        let (p_max, expected_find_time) = summarize(&pcdf, tau);
        let t_cutoff = pcdf.len().saturating_sub(1) as f64 * tau;
        Self {
            pcdf,
            t_cutoff,
            p_max,
            expected_find_time,
            intercept_time: intercept_steps as f64 * tau,
            intercept_steps,
            tau,
        }
    }
}

/// `(p_max, Σ kτ·Δpcdf(k) / p_max)`.
fn summarize(pcdf: &[f64], tau: f64) -> (f64, f64) {
    let Some(&p_max) = pcdf.last() else {
        return (0.0, 0.0);
    };
    if p_max <= 0.0 {
        return (0.0, 0.0);
    }
    let mut prev = 0.0;
    let mut weighted = 0.0;
    for (k, &p) in pcdf.iter().enumerate() {
        weighted += k as f64 * tau * (p - prev);
        prev = p;
    }
    (p_max, weighted / p_max)
}

/// Predicts the find-probability curve for intercepting and spiralling over
/// `belief` (taken at departure), within `max_budget_steps` total steps.
pub fn estimate_coverage(
    belief: &TargetBelief,
    agent_pos: Vector2<f64>,
    agent_speed: f64,
    sensor_width: f64,
    model: &MotionModel,
    max_budget_steps: usize,
) -> Result<CoverageEstimate> {
    let tau = model.tau();
    let meet = intercept(agent_pos, agent_speed, belief)?;
    let intercept_steps = meet.steps(tau);
    if intercept_steps > max_budget_steps {
        return Ok(CoverageEstimate::from_curve(Vec::new(), intercept_steps, tau));
    }

    let radius = 0.5 * sensor_width;
    let s_init = std::f64::consts::PI * radius * radius;
    let sweep_rate = agent_speed * sensor_width * tau;
    let find_prob = |k: usize| -> Result<f64> {
        let sigma = belief.position_cov_after(model, (intercept_steps + k) as u64);
        let det = sigma.determinant();
        if !(det > 0.0) {
            return Err(Error::DegenerateEllipse { det });
        }
        let covered = sweep_rate * k as f64 + s_init;
        chi2_cdf_df2(covered / (std::f64::consts::PI * det.sqrt()))
    };

    let last_step = (max_budget_steps - intercept_steps).min(MAX_COVERAGE_STEPS);
    let mut pcdf = vec![find_prob(0)?];
    let mut current = pcdf[0];
    for k in 1..=last_step {
        let next = find_prob(k)?;
        if next - current <= STALL_EPSILON {
            break;
        }
        pcdf.push(next);
        current = next;
    }
    Ok(CoverageEstimate::from_curve(pcdf, intercept_steps, tau))
}

/// Clips an estimate to what fits in `remaining_budget` seconds of mission.
pub fn truncate_estimate(est: &CoverageEstimate, remaining_budget: f64) -> CoverageEstimate {
    let spare = remaining_budget - est.intercept_time;
    if spare < -1e-9 * est.tau {
        return CoverageEstimate::from_curve(Vec::new(), est.intercept_steps, est.tau);
    }
    let k_max = (spare.max(0.0) / est.tau + 1e-9).floor() as usize;
    if k_max + 1 >= est.pcdf.len() {
        return est.clone();
    }
    CoverageEstimate::from_curve(est.pcdf[..=k_max].to_vec(), est.intercept_steps, est.tau)
}

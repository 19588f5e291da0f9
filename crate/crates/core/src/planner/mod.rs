//! Target sequencing as an MDP over single-target coverage sub-tasks.
//!
//! A decision state holds the history of (target, outcome) pairs, the
//! remaining budget, the agent position and every target's belief. Pursuing
//! a target ends in `Find` with the estimator's `p_max`, otherwise `Miss`;
//! a missed target leaves the action list.

mod dynamics;
mod mcts;

pub use dynamics::{apply_outcome, evaluate_action, terminal_uncertainty, SubTask};
pub use mcts::{
    tree_search, ActionNode, ConditionalPlan, Decision, MctsConfig, MctsPlanner, NodeId, SearchMode, SearchTree,
    StateNode,
};

use nalgebra::{Matrix4, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{predict, update, MotionModel, ObservationModel, TargetBelief};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Find,
    Miss,
}

impl Outcome {
    pub fn sample<R: Rng + ?Sized>(p_find: f64, rng: &mut R) -> Self {
        if p_find >= 1.0 || (p_find > 0.0 && rng.random::<f64>() < p_find) {
            Outcome::Find
        } else {
            Outcome::Miss
        }
    }
}

/// Append-only record of pursued targets and their outcomes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    entries: Vec<(usize, Outcome)>,
}

impl History {
    pub fn push(&mut self, target: usize, outcome: Outcome) {
        self.entries.push((target, outcome));
    }

    pub fn entries(&self) -> &[(usize, Outcome)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The target found by the most recent sub-task, if it ended in a find.
    pub fn last_found(&self) -> Option<usize> {
        match self.entries.last() {
            Some(&(t, Outcome::Find)) => Some(t),
            _ => None,
        }
    }

    /// True when the latest outcome recorded for `target` is a miss.
    pub fn is_dropped(&self, target: usize) -> bool {
        self.entries.iter().rev().find(|(t, _)| *t == target).is_some_and(|(_, o)| *o == Outcome::Miss)
    }
}

/// Everything the planners need about the world at a decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionState {
    pub history: History,
    pub beliefs: Vec<TargetBelief>,
    pub agent_pos: Vector2<f64>,
    pub remaining_steps: usize,
    pub time: f64,
}

impl DecisionState {
    pub fn available_actions(&self) -> Vec<usize> {
        (0..self.beliefs.len()).filter(|&t| !self.history.is_dropped(t)).collect()
    }
}

/// Fixed mission parameters shared by every node of a search.
#[derive(Debug, Clone)]
pub struct PlanningContext {
    pub models: Vec<MotionModel>,
    pub obs: ObservationModel,
    pub agent_speed: f64,
    pub sensor_width: f64,
    pub tau: f64,
    tracked_covs: Vec<Matrix4<f64>>,
}

impl PlanningContext {
    pub fn new(models: Vec<MotionModel>, obs: ObservationModel, agent_speed: f64, sensor_width: f64) -> Result<Self> {
        let tau = models.first().map_or(0.5, |m| m.tau());
        let tracked_covs = models.iter().map(|m| tracked_steady_cov(m, &obs)).collect::<Result<_>>()?;
        Ok(Self { models, obs, agent_speed, sensor_width, tau, tracked_covs })
    }

    /// Posterior covariance of a target observed every step, at steady state.
    pub fn tracked_cov(&self, target: usize) -> &Matrix4<f64> {
        &self.tracked_covs[target]
    }
}

/// Fixed point of `P ← update(predict(P))` with one measurement per step.
fn tracked_steady_cov(model: &MotionModel, obs: &ObservationModel) -> Result<Matrix4<f64>> {
    let mut belief = TargetBelief::new(Default::default(), Matrix4::identity() * 100.0, 0.0);
    for _ in 0..1_000_000 {
        let prior = predict(&belief, model, 1);
        let next = update(&prior, &prior.position(), obs)?;
        let change = (next.cov - belief.cov).abs().max();
        belief = next;
        if change <= 1e-13 * belief.cov.abs().max() {
            break;
        }
    }
    Ok(belief.cov)
}

/// A policy that picks the next target to pursue.
pub trait TargetPlanner {
    fn choose(&mut self, ctx: &PlanningContext, state: &DecisionState) -> Result<Option<usize>>;

    /// Plan computed while `pursuing` is underway, keyed by its outcome.
    fn plan_conditional(
        &mut self,
        _ctx: &PlanningContext,
        _state: &DecisionState,
        _pursuing: usize,
    ) -> Result<Option<ConditionalPlan>> {
        Ok(None)
    }
}

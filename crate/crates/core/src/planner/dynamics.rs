use super::{DecisionState, Outcome, PlanningContext};
use crate::belief::{predict, uncertainty_metric, update};
use crate::error::{Error, Result};
use crate::estimator::estimate_coverage;

/// Predicted outcome model of pursuing one target from a decision state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubTask {
    pub target: usize,
    pub p_find: f64,
    /// Expected steps until a find (given a find).
    pub find_steps: usize,
    /// Steps until the coverage is abandoned.
    pub miss_steps: usize,
    /// Re-pursuing the target just found: follow it until the budget runs out.
    pub follow: bool,
}

impl SubTask {
    pub fn steps(&self, outcome: Outcome) -> usize {
        match outcome {
            Outcome::Find => self.find_steps,
            Outcome::Miss => self.miss_steps,
        }
    }
}

/// Runs the coverage estimator for `target` within the state's remaining
/// budget. Durations are whole steps, at least one and at most the
/// remaining budget.
pub fn evaluate_action(ctx: &PlanningContext, state: &DecisionState, target: usize) -> Result<SubTask> {
    let remaining = state.remaining_steps;
    if remaining == 0 {
        return Err(Error::Planner("no budget left to pursue a target".into()));
    }
    if state.history.last_found() == Some(target) {
        return Ok(SubTask { target, p_find: 1.0, find_steps: remaining, miss_steps: remaining, follow: true });
    }
    let est = estimate_coverage(
        &state.beliefs[target],
        state.agent_pos,
        ctx.agent_speed,
        ctx.sensor_width,
        &ctx.models[target],
        remaining,
    )?;
    if est.pcdf.is_empty() {
        return Ok(SubTask { target, p_find: 0.0, find_steps: remaining, miss_steps: remaining, follow: false });
    }
    let clamp = |steps: f64| (steps.round() as usize).clamp(1, remaining);
    Ok(SubTask {
        target,
        p_find: est.p_max,
        find_steps: clamp(est.time_to_find() / ctx.tau),
        miss_steps: clamp((est.intercept_steps + est.cutoff_step()) as f64),
        follow: false,
    })
}

/// Successor state after `task` ends with `outcome`, using expected durations.
pub fn apply_outcome(
    ctx: &PlanningContext,
    state: &DecisionState,
    task: &SubTask,
    outcome: Outcome,
) -> Result<DecisionState> {
    let elapsed = task.steps(outcome).min(state.remaining_steps);
    let mut beliefs: Vec<_> =
        state.beliefs.iter().zip(&ctx.models).map(|(b, m)| predict(b, m, elapsed as u64)).collect();
    let pursued = &mut beliefs[task.target];
    if outcome == Outcome::Find {
        if task.follow {
            pursued.cov = *ctx.tracked_cov(task.target);
        } else {
            *pursued = update(pursued, &pursued.position(), &ctx.obs)?;
        }
    }
    let agent_pos = pursued.position();
    let mut history = state.history.clone();
    history.push(task.target, outcome);
    Ok(DecisionState {
        history,
        beliefs,
        agent_pos,
        remaining_steps: state.remaining_steps - elapsed,
        time: state.time + elapsed as f64 * ctx.tau,
    })
}

/// `U` at budget depletion, propagating every belief through whatever
/// budget is left.
pub fn terminal_uncertainty(ctx: &PlanningContext, state: &DecisionState) -> Result<f64> {
    let horizon = state.time + state.remaining_steps as f64 * ctx.tau;
    uncertainty_metric(&state.beliefs, &ctx.models, horizon)
}

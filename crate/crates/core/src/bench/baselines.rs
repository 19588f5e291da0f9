//! Comparison planners for the tracking study.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::planner::{
    apply_outcome, evaluate_action, DecisionState, MctsConfig, MctsPlanner, Outcome, PlanningContext, TargetPlanner,
};
use crate::scenario::{PlannerKind, ScenarioConfig};

/// Myopic planner: maximizes `p_max × (log det Σxy now − log det Σxy after a find)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyPlanner;

impl GreedyPlanner {
    pub fn score(ctx: &PlanningContext, state: &DecisionState, target: usize) -> Result<f64> {
        let task = evaluate_action(ctx, state, target)?;
        if task.p_find <= 0.0 {
            return Ok(0.0);
        }
        let now = state.beliefs[target].log_det_xy()?;
        let after = apply_outcome(ctx, state, &task, Outcome::Find)?.beliefs[target].log_det_xy()?;
        Ok(task.p_find * (now - after))
    }
}

impl TargetPlanner for GreedyPlanner {
    fn choose(&mut self, ctx: &PlanningContext, state: &DecisionState) -> Result<Option<usize>> {
        if state.remaining_steps == 0 {
            return Ok(state.available_actions().first().copied());
        }
        let mut best: Option<(usize, f64, bool)> = None;
        for target in state.available_actions() {
            let task = evaluate_action(ctx, state, target)?;
            let reachable = task.p_find > 0.0;
            let score = Self::score(ctx, state, target)?;
            let better = match best {
                None => true,
                Some((_, s, r)) => (reachable && !r) || (reachable == r && score > s),
            };
            if better {
                best = Some((target, score, reachable));
            }
        }
        Ok(best.map(|(t, _, _)| t))
    }
}

/// Picks uniformly among available targets.
#[derive(Debug, Clone)]
pub struct RandomPlanner<R> {
    pub rng: R,
}

impl<R: Rng> TargetPlanner for RandomPlanner<R> {
    fn choose(&mut self, _ctx: &PlanningContext, state: &DecisionState) -> Result<Option<usize>> {
        let actions = state.available_actions();
        if actions.is_empty() {
            return Ok(None);
        }
        Ok(Some(actions[self.rng.random_range(0..actions.len())]))
    }
}

/// Planner named by the scenario, seeded with `rng`.
pub fn make_planner(config: &ScenarioConfig, rng: ChaCha8Rng) -> Box<dyn TargetPlanner> {
    match config.planner {
        PlannerKind::Mcts => {
            let p = &config.planner_params;
            let mcts = MctsConfig {
                iterations: p.iterations,
                exploration: p.exploration,
                time_limit: p.time_limit_s.map(std::time::Duration::from_secs_f64),
                force_find: false,
            };
            Box::new(MctsPlanner { config: mcts, rng })
        }
        PlannerKind::Greedy => Box::new(GreedyPlanner),
        PlannerKind::Random => Box::new(RandomPlanner { rng }),
    }
}

//! Monte Carlo tree search over coverage sub-tasks.
//!
//! State nodes alternate with action nodes; an action node has at most two
//! children, one per coverage outcome. Values are running means of `−U`.
//! UCB1 works on values min/max-normalised per state node because raw
//! log-det magnitudes vary by scenario scale.

use std::time::{Duration, Instant};

use rand::Rng;

use super::dynamics::{apply_outcome, evaluate_action, terminal_uncertainty};
use super::{DecisionState, Outcome, PlanningContext, SubTask, TargetPlanner};
use crate::error::{Error, Result};
use crate::scenario::DEFAULT_ITERATIONS;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct MctsConfig {
    pub iterations: usize,
    pub exploration: f64,
    pub time_limit: Option<Duration>,
    /// Treat every pursuit as successful. Used for deterministic toy
    /// problems with a brute-force reference.
    pub force_find: bool,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            exploration: std::f64::consts::SQRT_2,
            time_limit: None,
            force_find: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionNode {
    pub task: SubTask,
    pub visits: u64,
    /// Running mean of `−U` over simulations through this node.
    pub value: f64,
    pub return_min: f64,
    pub return_max: f64,
    pub find_child: Option<NodeId>,
    pub miss_child: Option<NodeId>,
}

impl ActionNode {
    fn new(task: SubTask) -> Self {
        Self {
            task,
            visits: 0,
            value: 0.0,
            return_min: f64::INFINITY,
            return_max: f64::NEG_INFINITY,
            find_child: None,
            miss_child: None,
        }
    }

    pub fn target(&self) -> usize {
        self.task.target
    }

    pub fn child(&self, outcome: Outcome) -> Option<NodeId> {
        match outcome {
            Outcome::Find => self.find_child,
            Outcome::Miss => self.miss_child,
        }
    }

    fn record(&mut self, ret: f64) {
        self.visits += 1;
        self.value += (ret - self.value) / self.visits as f64;
        self.return_min = self.return_min.min(ret);
        self.return_max = self.return_max.max(ret);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateNode {
    pub state: DecisionState,
    pub actions: Vec<usize>,
    pub visits: u64,
    pub expanded: bool,
    pub children: Vec<ActionNode>,
    value_min: f64,
    value_max: f64,
}

impl StateNode {
    fn new(state: DecisionState, actions: Vec<usize>) -> Self {
        Self {
            state,
            actions,
            visits: 0,
            expanded: false,
            children: Vec::new(),
            value_min: f64::INFINITY,
            value_max: f64::NEG_INFINITY,
        }
    }

    pub fn child_for(&self, target: usize) -> Option<&ActionNode> {
        self.children.iter().find(|a| a.target() == target)
    }

    fn normalized(&self, value: f64) -> f64 {
        let span = self.value_max - self.value_min;
        if span > 0.0 {
            (value - self.value_min) / span
        } else {
            0.5
        }
    }

    /// Highest-valued visited action; ties go to the lowest target id.
    pub fn best_action(&self) -> Option<usize> {
        let mut best: Option<&ActionNode> = None;
        for a in self.children.iter().filter(|a| a.visits > 0) {
            if best.is_none_or(|b| a.value > b.value) {
                best = Some(a);
            }
        }
        best.map(ActionNode::target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Fresh,
    /// First action fixed to the target currently being pursued.
    Replan {
        pursuing: usize,
    },
}

/// Next target for each outcome of the sub-task in progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionalPlan {
    pub on_find: Option<usize>,
    pub on_miss: Option<usize>,
}

impl ConditionalPlan {
    pub fn next(&self, outcome: Outcome) -> Option<usize> {
        match outcome {
            Outcome::Find => self.on_find,
            Outcome::Miss => self.on_miss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Action(Option<usize>),
    Conditional(ConditionalPlan),
}

pub struct SearchTree<'a> {
    ctx: &'a PlanningContext,
    config: MctsConfig,
    nodes: Vec<StateNode>,
    mode: SearchMode,
    iterations_run: usize,
}

impl<'a> SearchTree<'a> {
    pub fn new(ctx: &'a PlanningContext, config: MctsConfig, start: DecisionState, mode: SearchMode) -> Result<Self> {
        let mut actions = start.available_actions();
        if let SearchMode::Replan { pursuing } = mode {
            if !actions.contains(&pursuing) {
                return Err(Error::Planner(format!("target {pursuing} is not available for replanning")));
            }
            actions = vec![pursuing];
        }
        Ok(Self { ctx, config, nodes: vec![StateNode::new(start, actions)], mode, iterations_run: 0 })
    }

    pub const ROOT: NodeId = 0;

    pub fn root(&self) -> &StateNode {
        &self.nodes[Self::ROOT]
    }

    pub fn node(&self, id: NodeId) -> &StateNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[StateNode] {
        &self.nodes
    }

    pub fn iterations_run(&self) -> usize {
        self.iterations_run
    }

    /// Runs simulations until the iteration budget (or optional wall-clock
    /// cap) is spent.
    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize> {
        if self.config.iterations == 0 {
            return Err(Error::Planner("tree search needs at least one iteration".into()));
        }
        let started = Instant::now();
        for _ in 0..self.config.iterations {
            if self.config.time_limit.is_some_and(|limit| started.elapsed() >= limit) {
                break;
            }
            self.simulate(Self::ROOT, rng)?;
            self.iterations_run += 1;
        }
        Ok(self.iterations_run)
    }

    pub fn decision(&self) -> Decision {
        match self.mode {
            SearchMode::Fresh => Decision::Action(self.root().best_action()),
            SearchMode::Replan { .. } => Decision::Conditional(self.conditional_plan()),
        }
    }

    fn conditional_plan(&self) -> ConditionalPlan {
        let branch = |outcome| {
            self.root().children.first().and_then(|a| a.child(outcome)).and_then(|id| self.nodes[id].best_action())
        };
        ConditionalPlan { on_find: branch(Outcome::Find), on_miss: branch(Outcome::Miss) }
    }

    /// One descent from `start`: select with UCB1, sample outcomes, expand
    /// the first unvisited state, roll out, then back up `−U`.
    pub fn simulate<R: Rng + ?Sized>(&mut self, start: NodeId, rng: &mut R) -> Result<f64> {
        let mut path: Vec<(NodeId, usize)> = Vec::new();
        let mut current = start;
        let u = loop {
            let node = &self.nodes[current];
            if node.state.remaining_steps == 0 {
                break terminal_uncertainty(self.ctx, &node.state)?;
            }
            if !node.expanded {
                let children = node
                    .actions
                    .iter()
                    .map(|&a| evaluate_action(self.ctx, &node.state, a).map(ActionNode::new))
                    .collect::<Result<Vec<_>>>()?;
                let state = node.state.clone();
                let node = &mut self.nodes[current];
                node.children = children;
                node.expanded = true;
                break self.rollout(&state, rng)?;
            }
            if node.children.is_empty() {
                break terminal_uncertainty(self.ctx, &node.state)?;
            }

            let idx = self.select(current);
            let p_find = self.nodes[current].children[idx].task.p_find;
            let outcome = if self.config.force_find { Outcome::Find } else { Outcome::sample(p_find, rng) };
            let next = match self.nodes[current].children[idx].child(outcome) {
                Some(id) => id,
                None => self.expand_action(current, idx, outcome)?,
            };
            path.push((current, idx));
            current = next;
        };

        let ret = -u;
        let leaf = &mut self.nodes[current];
        leaf.visits += 1;
        leaf.value_min = leaf.value_min.min(ret);
        leaf.value_max = leaf.value_max.max(ret);
        for &(id, idx) in path.iter().rev() {
            let node = &mut self.nodes[id];
            node.visits += 1;
            node.value_min = node.value_min.min(ret);
            node.value_max = node.value_max.max(ret);
            node.children[idx].record(ret);
        }
        Ok(u)
    }

    /// UCB1 choice; unvisited actions win outright in id order.
    fn select(&self, id: NodeId) -> usize {
        let node = &self.nodes[id];
        if let Some(idx) = node.children.iter().position(|a| a.visits == 0) {
            return idx;
        }
        let log_n = (node.visits.max(1) as f64).ln();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (idx, a) in node.children.iter().enumerate() {
            let score = node.normalized(a.value) + self.config.exploration * (log_n / a.visits as f64).sqrt();
            if score > best_score {
                best_score = score;
                best = idx;
            }
        }
        best
    }

    fn expand_action(&mut self, parent: NodeId, idx: usize, outcome: Outcome) -> Result<NodeId> {
        let anode = &self.nodes[parent].children[idx];
        if anode.child(outcome).is_some() {
            return Err(Error::Planner("outcome child already expanded".into()));
        }
        let state = apply_outcome(self.ctx, &self.nodes[parent].state, &anode.task, outcome)?;
        let actions = state.available_actions();
        let id = self.nodes.len();
        self.nodes.push(StateNode::new(state, actions));
        let anode = &mut self.nodes[parent].children[idx];
        match outcome {
            Outcome::Find => anode.find_child = Some(id),
            Outcome::Miss => anode.miss_child = Some(id),
        }
        Ok(id)
    }

    /// Uniform-random policy to budget depletion, nodes not stored.
    pub fn rollout<R: Rng + ?Sized>(&self, state: &DecisionState, rng: &mut R) -> Result<f64> {
        rollout(self.ctx, state, self.config.force_find, rng)
    }
}

pub(crate) fn rollout<R: Rng + ?Sized>(
    ctx: &PlanningContext,
    state: &DecisionState,
    force_find: bool,
    rng: &mut R,
) -> Result<f64> {
    let mut state = state.clone();
    loop {
        if state.remaining_steps == 0 {
            return terminal_uncertainty(ctx, &state);
        }
        let actions = state.available_actions();
        if actions.is_empty() {
            return terminal_uncertainty(ctx, &state);
        }
        let target = actions[rng.random_range(0..actions.len())];
        let task = evaluate_action(ctx, &state, target)?;
        let outcome = if force_find { Outcome::Find } else { Outcome::sample(task.p_find, rng) };
        state = apply_outcome(ctx, &state, &task, outcome)?;
    }
}

/// Builds a tree at `start`, searches it and returns the decision.
pub fn tree_search<R: Rng + ?Sized>(
    ctx: &PlanningContext,
    start: DecisionState,
    mode: SearchMode,
    config: &MctsConfig,
    rng: &mut R,
) -> Result<Decision> {
    let mut tree = SearchTree::new(ctx, config.clone(), start, mode)?;
    tree.run(rng)?;
    Ok(tree.decision())
}

/// MCTS as an episode policy.
pub struct MctsPlanner<R> {
    pub config: MctsConfig,
    pub rng: R,
}

impl<R: Rng> TargetPlanner for MctsPlanner<R> {
    fn choose(&mut self, ctx: &PlanningContext, state: &DecisionState) -> Result<Option<usize>> {
        let available = state.available_actions();
        if available.len() <= 1 || state.remaining_steps == 0 {
            return Ok(available.first().copied());
        }
        match tree_search(ctx, state.clone(), SearchMode::Fresh, &self.config, &mut self.rng)? {
            Decision::Action(a) => Ok(a),
            Decision::Conditional(_) => unreachable!("fresh search yields a single action"),
        }
    }

    fn plan_conditional(
        &mut self,
        ctx: &PlanningContext,
        state: &DecisionState,
        pursuing: usize,
    ) -> Result<Option<ConditionalPlan>> {
        if state.remaining_steps == 0 {
            return Ok(None);
        }
        match tree_search(ctx, state.clone(), SearchMode::Replan { pursuing }, &self.config, &mut self.rng)? {
            Decision::Conditional(plan) => Ok(Some(plan)),
            Decision::Action(_) => unreachable!("replan yields a conditional plan"),
        }
    }
}

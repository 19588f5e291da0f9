//! Long-horizon multi-target tracking with a single agent.
//!
//! Each target carries a constant-velocity Kalman belief. Locating a target
//! is a coverage sub-task: intercept the belief centre, then fly an elliptic
//! spiral that drifts with the estimated velocity. A closed-form estimator
//! predicts the find probability and time of each coverage, and Monte Carlo
//! tree search orders the sub-tasks to minimize the summed log-determinant
//! of the position covariances when the time budget runs out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod bench;
pub mod error;
pub mod estimator;
pub mod planner;
pub mod scenario;
pub mod seed;
pub mod sim;
pub mod spiral;

pub use belief::{predict, uncertainty_metric, update, MotionModel, ObservationModel, TargetBelief};
pub use error::{Error, Result};
pub use estimator::{chi2_cdf_df2, estimate_coverage, CoverageEstimate};
pub use planner::{tree_search, MctsConfig, PlanningContext, TargetPlanner};
pub use scenario::{sample_scenario, PlannerKind, ScenarioConfig};
pub use sim::{run_episode, EpisodeResult};
pub use spiral::{build_coverage_plan, make_spiral_params, step_theta, CoveragePlan, SpiralParams};

//! Experiment harness: comparison planners, studies and report output.

pub mod baselines;
pub mod report;
pub mod study;

pub use baselines::{make_planner, GreedyPlanner, RandomPlanner};
pub use report::{aggregate, emit_report, read_records, round_sig, Aggregates, CaseRecord, StudyReport};
pub use study::{run_estimator_study, run_tracking_study, EstimatorStudyOptions, TrackingStudyOptions};

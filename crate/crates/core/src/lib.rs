//! Model-free bang-ride fast charging: plant models, the data-driven
//! controller, a model-based oracle and regret/robustness analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod controller;
pub mod error;
pub mod experiment;
pub mod io;
pub mod models;
pub mod oracle;
pub mod plant;
pub mod scenario;

pub use controller::{
    active_index, constraint_errors, step_size, ConstraintSpec, ControlAction, ControllerConfig,
    ControllerState, ErrorVector, GainBox, HistoryStats,
};
pub use error::{Error, Result};
pub use oracle::{oracle_trajectory, selector, solve_constraint, FeedbackValue, RootConfig};
pub use plant::{
    phases_of, replay_open_loop, run_closed_loop, run_closed_loop_with, validate_monotonicity,
    MonotonicityReport, Phase, PlantModel, RunOptions, StepContext, StepRecord, Trajectory,
    TrajectoryMeta,
};

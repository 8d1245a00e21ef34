//! The sketched private gradient loop, its step sizes and schedules, and the
//! utility-bound calculators used to compare sampling strategies.

mod bounds;
mod run;
mod schedule;

pub use bounds::{utility_bound, BoundQuery, BoundRow, Regime};
pub use run::{dp_skgd, RunOptions, RunResult};
pub use schedule::{
    default_step_sizes, importance_probabilities, schedule_convex, schedule_strongly_convex,
    sigma_s_sq, sigma_s_sq_monte_carlo, Schedule, NICE_SIGMA_SAMPLES,
};

//! Synthetic data, experiment configuration and the comparison harness.

pub mod config;
pub mod experiment;
pub mod synthetic;

pub use config::{parse_seed_list, RawConfig, Value};
pub use experiment::{
    compare_methods, comparison_table, plan_method, run_experiment, run_prepared, run_seed, DataSource,
    DistributionSpec, ExperimentConfig, ExperimentOutput, MethodPlan, MethodSpec, Prepared, ScheduleMode,
    Summary, CSV_HEADER,
};
pub use synthetic::{gen_synthetic, solve_optimum, Optimum, Profile, Synthetic, SyntheticSpec};

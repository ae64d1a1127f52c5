//! Seeded instance generators, the experiment runner, CSV records,
//! performance profiles and robustness tables for the Newton solvers.

pub mod generators;
pub mod profile;
pub mod record;
pub mod rng;
pub mod suite;

pub use profile::{
    performance_profile, robustness_table, Metric, PerformanceProfile, ProfileError, RobustnessRow,
};
pub use record::{read_records, write_records, BenchmarkRecord, RecordError};
pub use rng::{rng_normal, Rng};
pub use suite::{
    instances, run_suite, solve, Instance, Outcome, SolverSpec, Suite, SuiteConfig, SuiteError,
};

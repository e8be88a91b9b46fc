pub mod blocksworld;
pub mod pddl;
pub mod planner;
pub mod translator;
pub mod curriculum;
pub mod evaluator;
pub mod repair;
pub mod scoring;
pub mod stats;

pub use stats::{levenshtein, plan_distance, ttest_ind};

/// Welch test result over `f64` samples.
pub type TTestF64 = stats::TTest<f64>;

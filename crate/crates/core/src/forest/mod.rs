//! Tree, lumber and forest polynomials in a symmetric matrix.

pub mod calibrate;
pub mod compile;
pub mod enumerate;
pub mod lumber;
pub mod moments;
pub mod reasonable;
pub mod tree;

pub use calibrate::{
    c_slack, calibrate_statistics, infinity_cap, lumber_vectors, CalibrationOptions, SlackPolicy, StatisticsTable,
};
pub use compile::{compile_amp_forest, compile_amp_iterates, DEFAULT_TERM_CAP};
pub use enumerate::{enumerate_lumber, lumber_bound, trees_by_degree, MAX_ENUMERATION_DEGREE};
pub use lumber::{evaluate_forest, Forest, Lumber};
pub use moments::{expectation_bound, rooted_expectation, tree_coordinate_expectation, MAX_MOMENT_DEGREE};
pub use reasonable::{reasonableness_report, ReasonablenessReport};
pub use tree::{canonicalize, evaluate_tree, trunk_value, RootedTree, Tree, TreeEvaluator};

//! Robust local-statistics relaxation: constraint compilation, solvers,
//! auditing and rounding.

mod admm;
pub mod basis;
pub mod lowrank;
pub mod ops;
pub mod pe;
pub mod poly;
pub mod rounding;
pub mod solve;
pub mod system;

pub use basis::{BasisVar, MonomialBasis};
pub use ops::Certificate;
pub use pe::{audit, integral_moment, PseudoExpectation, ResidualReport};
pub use poly::{FormPool, Poly, SparseVec};
pub use rounding::{correlation, extract_second_moment, recover, round_top_eigenvector, RecoveryResult};
pub use solve::{solve_feasibility, SolveReport, SolverConfig, SolverKind, Verdict};
pub use system::{
    build_constraint_system, integral_point, Constraint, ConstraintSystem, DroppedConstraint, LshConfig, OpNormLmi,
    PointReport, Tag,
};

//! Approximate message passing.

pub mod denoiser;
pub mod engine;
pub mod problem;
pub mod se;

pub use denoiser::{Arity, Denoiser, DenoiserFamily, DenoiserKind, Monomial, MultiPoly};
pub use engine::{amp_run, onsager_coeff, recursion_residual, AmpTrace, DIVERGENCE_GUARD};
pub use problem::{objective, round_to_feasible, ProblemKind, ProblemSpec};
pub use se::{state_evolution, StateEvolutionTable, TestFunction};

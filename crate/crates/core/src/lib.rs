//! Double-phase variable-order fractional Musielak problems with nonlocal
//! Neumann/Robin exterior conditions, discretized on a one-dimensional mesh.

// NaN-rejecting guards are written as negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod energy;
pub mod error;
pub mod expr;
pub mod fields;
pub mod io;
pub mod mesh;
pub mod modular;
pub mod musielak;
pub mod operator;
pub mod problem;
pub mod solver;
pub mod verify;

#[cfg(test)]
mod testing;

pub use config::RunConfig;
pub use energy::{EnergyParts, ReactionSpec};
pub use error::{Error, Result};
pub use expr::Expression;
pub use fields::{Interval, OrderField, ScalarField, SymmetricField};
pub use mesh::{GridFunction, Mesh, MeshConfig, Region};
pub use modular::{luxemburg_norm, BracketReport, ModularBreakdown};
pub use musielak::{FamilyKind, LocalYoung, MusielakFamily};
pub use operator::{Defect, FormValue};
pub use problem::{Instance, PhaseSpec, Problem, ProblemSpec};
pub use solver::{Branch, SolveOptions, SolveReport};
pub use verify::{run_suite, SuiteSize, VerifyReport};

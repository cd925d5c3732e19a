//! Safety checking for non-linear constrained Horn clauses through a linear
//! clause solver.
//!
//! The pipeline splits a program by tree dimension ([`dimension::kdim`]),
//! turns each bounded program into linear clauses by specialising a
//! goal-stack interpreter ([`linearise`]), solves those with a polyhedral
//! fixpoint ([`linear_solver`]), and lifts or refines the result
//! ([`driver::solve`]).

pub mod ast;
pub mod dimension;
pub mod driver;
mod error;
pub mod linarith;
pub mod linear_solver;
pub mod linearise;
pub mod oracle;
pub mod polyhedra;
mod simplex;

pub use error::{Error, Result};

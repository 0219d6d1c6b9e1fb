//! Extrapolation cascadic multigrid (EXCMG) for the 3D biharmonic equation
//! `Δ²u = f` on the unit cube with Dirichlet data of the first or second kind.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] holds uniform grids, ghost-padded fields, norms and restriction.
//! * [`discretization`] is the matrix-free 25-point operator and boundary handling.
//! * [`extrapolation`] builds third-order initial guesses from coarser solutions.
//! * [`krylov`] provides preconditioned Bi-CG and a banded direct solver.
//! * [`driver`] runs the level cascade and [`report`] renders the results.
//! * [`problems`] supplies manufactured test problems with a derivative oracle.
//! * [`cli`] is the command-line harness.

pub mod cli;
pub mod discretization;
pub mod driver;
pub mod error;
pub mod extrapolation;
pub mod grid;
pub mod krylov;
pub mod problems;
pub mod report;

pub use discretization::{BcKind, BoundaryData, DiscreteSystem};
pub use driver::{excmg_compare, excmg_run, ExcmgConfig, LevelReport, RunMode, RunReport, RunStatus};
pub use error::{Error, Result};
pub use grid::{Field, GridSpec, NormKind};
pub use krylov::{bicg_solve, dsolve, PrecondKind};
pub use problems::{get_problem, ManufacturedProblem, ProblemId};

//! Nonoverlapping space-time domain decomposition for parabolic problems.
//!
//! Time is discretized on the whole real line with a band-limited spectral
//! basis and space with piecewise linear elements on a 1D interval split into
//! two subdomains at a single interface node. The crate provides the
//! space-time operators, the interface preconditioners, the modified
//! Dirichlet–Neumann and Robin–Robin interface iterations, and a monolithic
//! reference solver.

pub mod error;
pub mod linalg;
pub mod nonlinearity;
pub mod solvers;
pub mod spatial;
pub mod system;
pub mod temporal;

pub use error::{Error, Result};
pub use nonlinearity::{check_assumptions, AssumptionReport, Nonlinearity, SourceTerm};
pub use solvers::{DdSolver, InnerConfig, IterRecord, IterationTrace, Method, RunResult, SolverConfig};
pub use spatial::{Region, SpatialMatrices, SpatialMesh};
pub use system::{Problem, QuadratureSpec};
pub use temporal::{GramKind, TemporalBasis, TemporalGram};

//! Projection pursuit tests for general null hypotheses on high-dimensional
//! regression coefficients.
//!
//! The null hypothesis is `beta* in B0` for a closed set `B0` (sparsity
//! balls, beta-min sets, quadratic balls, or a user-supplied projection).
//! See [`pptest::run_pptest`] for the test itself and the `examples/`
//! directory for runnable walkthroughs. The `pptest` binary is a thin
//! wrapper over [`cli`].

pub mod cli;
pub mod error;
pub mod linalg;
pub mod models;
pub mod precision;
pub mod projection;
pub mod pptest;
pub mod seeds;
pub mod simulate;
pub mod solvers;

pub use error::{Error, Result};
pub use models::Model;
pub use pptest::{run_pptest, Dataset, PreparedTest, TestConfig, TestResult};
pub use projection::{project, NullSet, Projection};

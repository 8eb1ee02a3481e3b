//! Digital memcomputing solver for 3-SAT.
//!
//! The numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the CLI and the batch
//! runner use.

// `!(x > 0)` is used on purpose so NaN is rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod circuit;
pub mod dynamics;
pub mod error;
pub mod imperfections;
pub mod integrator;
pub mod real;
pub mod rng;
pub mod sat;

pub use error::{Error, Result};
pub use real::Real;
pub use sat::{Assignment, Clause, CnfFormula, Literal};

pub type Params = dynamics::DmmParams<f64>;
pub type State = dynamics::DmmState<f64>;
pub type Derivatives = dynamics::Derivatives<f64>;
pub type Imperfections = imperfections::ImperfectionModel<f64>;
pub type Config = integrator::SolverConfig<f64>;
pub type Run = integrator::RunResult<f64>;

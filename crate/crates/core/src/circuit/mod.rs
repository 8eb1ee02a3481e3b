//! Behavioral model of the analog implementation: op-amp blocks with rail
//! saturation, the clause and variable modules built from them, and a text
//! format for wiring blocks into graphs.

pub mod blocks;
pub mod check;
pub mod graph;
pub mod modules;

pub use blocks::BlockConstants;
pub use check::{blocks_check, CheckRow};
pub use graph::Graph;
pub use modules::{circuit_derivatives, clause_module, variable_module, ClauseOutput};

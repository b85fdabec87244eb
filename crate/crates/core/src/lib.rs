//! Temporal fault tree analysis with priority-AND (PAND) and
//! simultaneous-AND (SAND) gates.
//!
//! The pipeline reads a fault tree, rewrites its failure function into a
//! temporal disjunctive normal form ([`laws::to_tdnf`]), reduces it to
//! minimal cutset sequences ([`normal::minimize`]), separates them into
//! mutually exclusive terms ([`normal::disjointify`]) and quantifies the
//! TOP event ([`quantify`]). [`seqtree`] and [`oracles`] provide independent
//! logical and probabilistic references.

pub mod cli;
pub mod expr;
pub mod laws;
pub mod normal;
pub mod oracles;
pub mod parser;
pub mod pipeline;
pub mod quantify;
pub mod seq;
pub mod seqtree;

pub use expr::{EventId, FaultTree, TemporalExpr};

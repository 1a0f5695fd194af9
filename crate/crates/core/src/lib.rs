//! Evolutionary design of hierarchical multi-agent organizations.
//!
//! Organizations are forests of mediators, aggregators and databases encoded
//! as fixed-length arrays of separation levels ([`genome`]). The
//! [`engine`] evolves those arrays with either hierarchical sub-structure
//! crossover or the classic one/two-point operators ([`operators`]), scoring
//! them with a pluggable [`fitness::Evaluator`]. [`harness`] runs batches of
//! experiments, exhaustive-search oracles and statistical comparisons
//! ([`metrics`]).

pub mod engine;
pub mod fitness;
pub mod genome;
pub mod harness;
pub mod metrics;
pub mod operators;
pub mod tree;

pub use engine::{Algorithm, GaConfig, RunResult};
pub use fitness::{EnvironmentParams, Evaluator, IrUtilityModel};
pub use genome::{Genome, GenomeError, Level};
pub use tree::{decode, encode, Node, OrganizationTree, Role};

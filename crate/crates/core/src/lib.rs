//! Exact optimal multiple switching on finite scenario trees.
//!
//! A [`switching::SwitchingProblem`] holds running rewards, switching costs
//! (of any sign) and terminal rewards for `m` modes on a
//! [`lattice::ScenarioTree`]. [`switching::solve`] computes the value process
//! of every mode as the fixed point of coupled Snell envelopes, and
//! [`switching::extract_strategy`] turns that into an optimal strategy.
//! [`validate`] checks the cost assumptions and the martingale hypothesis on
//! costs; [`oracle`] cross-checks everything by brute force.

pub mod exec;
pub mod generate;
pub mod lattice;
pub mod oracle;
pub mod snell;
pub mod spec;
pub mod switching;
pub mod validate;

pub use lattice::{AdaptedProcess, NodeId, ScenarioTree};
pub use switching::{Mode, Strategy, SwitchingProblem, ValueFamily};

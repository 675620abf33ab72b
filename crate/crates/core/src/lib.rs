//! Joint scheduling, power and cluster assignment (SPCAP) for cooperative
//! wireless networks.
//!
//! The crate builds the big-M binary formulation, strengthens it with GUB
//! cover inequalities, computes relaxation bounds and searches for good
//! solutions with an ant colony whose construction is guided by LP bounds
//! and whose solutions are refined by a relaxation-induced neighborhood
//! search. A brute-force [`oracle`] gives ground truth on tiny instances.

pub mod aco;
pub mod bounds;
pub mod cli;
pub mod cuts;
pub mod formulation;
pub mod instance;
pub mod model;
pub mod oracle;
pub mod report;
pub mod rins;
pub mod solver;

pub use formulation::CandidateSolution;
pub use instance::{GenConfig, Instance};

//! Built-in all-atom reference: a classical force field on the toy chain,
//! an energy minimizer, and a Langevin sampler. This is the labeling oracle
//! the active-learning loop queries for forces on backmapped frames.

pub mod forcefield;
pub mod langevin;
pub mod minimize;

pub use forcefield::{aa_energy_forces, aa_energy_forces_restrained, Restraint};
pub use langevin::{run_langevin, OracleConfig, RunSummary};
pub use minimize::{minimize, minimize_restrained, MinimizeReport};

//! Active learning for coarse-grained molecular dynamics.
//!
//! The crate closes the data-gathering loop for coarse-grained (CG) neural
//! network potentials on a self-contained toy polymer:
//!
//! 1. sample all-atom configurations from a built-in classical force field
//!    ([`oracle`]),
//! 2. project coordinates and forces onto CG beads ([`bridge`]),
//! 3. train a small continuous-filter network by force matching ([`cgnet`]),
//! 4. run CG Langevin dynamics with the learned potential ([`cgsim`]),
//! 5. pick the least-covered frames by minimum RMSD against the training
//!    set ([`selector`]), backmap them to all-atom, label them with the
//!    oracle, and retrain,
//! 6. score each round against a long reference trajectory with a
//!    TICA/Wasserstein-1 benchmark ([`analysis`]).
//!
//! The [`orchestrator`] module wires the stages into a resumable loop; the
//! `almd` binary exposes each stage as a CLI verb. Every stage is seeded and
//! deterministic for a fixed configuration and thread-independent where
//! `rayon` is used.

pub mod analysis;
pub mod bridge;
pub mod cgnet;
pub mod cgsim;
pub mod constants;
pub mod error;
pub mod mathcore;
pub mod oracle;
pub mod orchestrator;
pub mod selector;
pub mod system;

mod integrator;

pub use error::{Error, Result};

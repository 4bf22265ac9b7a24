//! Active-learning orchestration: config, run manifests, and the
//! round-by-round driver tying training, simulation, selection,
//! backmapping, and the oracle into one resumable, deterministic loop.

mod config;
mod loop_run;
mod manifest;

pub use config::{LoopConfig, DEFAULT_TOML};
pub use loop_run::{
    derive_seed, ensure_reference, make_initial_dataset, read_sim, run_active_learning,
    toy_setup, write_sim, ToySetup,
};
pub use manifest::{LoopStatus, RmsdSpread, RoundRecord, RunManifest, StageTime};

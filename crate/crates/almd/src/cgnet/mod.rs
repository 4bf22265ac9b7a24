//! Coarse-grained neural network potential: distance-featurized message
//! passing with continuous-filter convolutions, a physics prior, and
//! force-matching training on projected all-atom forces.

pub mod checkpoint;
pub mod loss;
pub mod model;
pub mod prior;
pub mod tape;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use loss::{fm_loss, force_mse};
pub use model::{rbf_expand, reference_network_energy, CgModel, HyperParams};
pub use prior::Prior;
pub use tape::{NodeId, RbfSpec, Tape};
pub use train::{train, EpochStats, TrainConfig, TrainReport};

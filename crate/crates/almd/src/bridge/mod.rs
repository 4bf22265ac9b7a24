//! AA↔CG representation bridge: the linear mapping operator, force
//! projection, and geometric backmapping.

pub mod backmap;
pub mod mapping;

pub use backmap::{backmap, backmap_frame, BackmapOutcome, RELAX_ITERATIONS, RESTRAINT_K};
pub use mapping::{MappingOperator, MappingScheme};

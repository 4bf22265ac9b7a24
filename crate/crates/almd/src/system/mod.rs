//! Molecular system definitions: topology, frames, trajectory files, and
//! the training-dataset store.

pub mod dataset;
pub mod frame;
pub mod topology;
pub mod trajectory;

pub use dataset::{Dataset, Provenance, Source};
pub use frame::{AaFrame, CgFrame, Frame};
pub use topology::{
    build_toy_topology, ideal_toy_coords, nominal_bead_spacing, Angle, Atom, AtomKind, Bond,
    Dihedral, DihedralKind, Topology,
};
pub use trajectory::{read_trajectory, write_trajectory, write_xyz_debug};

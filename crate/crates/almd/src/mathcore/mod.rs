//! Numerical primitives shared across the workflow: compensated summation,
//! small dense eigensolvers, rigid-body alignment, and 1-D distribution
//! statistics.

pub mod eigen;
pub mod geometry;
pub mod stats;
pub mod sum;

pub use eigen::{cholesky, generalized_sym_eig, sym_eig, SquareMat};
pub use geometry::{
    angle, centroid, dihedral, kabsch_align, rmsd_after_alignment, Alignment, Vec3,
};
pub use stats::{
    histogram, sample_mean, sample_variance, wasserstein1_1d, GaussianKde, Histogram,
};
pub use sum::{pairwise_mean, pairwise_sum};

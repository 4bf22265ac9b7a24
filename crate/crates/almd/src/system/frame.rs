//! Coordinate frames at either resolution.

use crate::error::{Error, Result};

/// One snapshot: a time stamp, per-site coordinates in nm, and optionally
/// per-site forces in kJ·mol⁻¹·nm⁻¹. The same container serves both
/// resolutions; [`AaFrame`] and [`CgFrame`] name the intent.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub coords: Vec<[f64; 3]>,
    pub forces: Option<Vec<[f64; 3]>>,
}

/// All-atom frame: sites are atoms.
pub type AaFrame = Frame;
/// Coarse-grained frame: sites are beads.
pub type CgFrame = Frame;

impl Frame {
    pub fn new(time: f64, coords: Vec<[f64; 3]>) -> Self {
        Frame {
            time,
            coords,
            forces: None,
        }
    }

    pub fn with_forces(time: f64, coords: Vec<[f64; 3]>, forces: Vec<[f64; 3]>) -> Self {
        Frame {
            time,
            coords,
            forces: Some(forces),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.coords.len()
    }

    /// Check site count against a topology expectation and that every
    /// stored value is finite.
    pub fn validate(&self, expected_sites: usize) -> Result<()> {
        if self.coords.len() != expected_sites {
            return Err(Error::FrameSizeMismatch {
                got: self.coords.len(),
                expected: expected_sites,
            });
        }
        if let Some(f) = &self.forces {
            if f.len() != expected_sites {
                return Err(Error::FrameSizeMismatch {
                    got: f.len(),
                    expected: expected_sites,
                });
            }
        }
        let all = self
            .coords
            .iter()
            .chain(self.forces.iter().flatten())
            .flat_map(|v| v.iter());
        for &x in all {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    op: "frame_validate",
                    detail: Some(format!("time {}", self.time)),
                });
            }
        }
        if !self.time.is_finite() {
            return Err(Error::NonFinite {
                op: "frame_validate",
                detail: Some("time stamp".to_string()),
            });
        }
        Ok(())
    }
}

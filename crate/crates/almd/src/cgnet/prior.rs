//! Physics prior under the network: harmonic bonds between consecutive
//! beads plus an r⁻¹² excluded-volume wall between all other pairs. The
//! prior absorbs the stiff, well-understood part of the free-energy
//! surface so the network only has to learn the residual, and it keeps
//! dynamics bounded where training data is thin.
//!
//! Constants come from dataset statistics (no hand tuning): the bond rest
//! length is the mean consecutive-bead distance, the stiffness follows
//! from equipartition (k = k_BT / Var[r]), and the repulsion prefactor is
//! pinned so the wall reaches k_BT at the closest nonbonded approach seen
//! in the data.

use serde::{Deserialize, Serialize};

use crate::constants::KB;
use crate::error::{Error, Result};
use crate::mathcore::geometry::{vdot, vsub, Vec3};
use crate::mathcore::sum::pairwise_sum;
use crate::system::CgFrame;

/// Variance floor guarding against degenerate (constant-distance) data.
const MIN_VARIANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    /// Harmonic stiffness for consecutive-bead bonds, kJ·mol⁻¹·nm⁻².
    pub k_bond: f64,
    /// Rest length for consecutive-bead bonds, nm.
    pub r0: f64,
    /// Repulsion prefactor: V(r) = c12 / r¹² for |i−j| ≥ 2, kJ·mol⁻¹·nm¹².
    pub c12: f64,
}

impl Prior {
    /// Fit prior constants from CG frames at the given temperature (K).
    pub fn fit(frames: &[CgFrame], temperature: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptySample { op: "prior fit" });
        }
        if !(temperature > 0.0) {
            return Err(Error::Config(format!(
                "prior fit needs a positive temperature, got {temperature}"
            )));
        }
        let n = frames[0].n_sites();
        if n < 2 {
            return Err(Error::InvalidDataset(
                "prior fit needs at least two beads".into(),
            ));
        }

        let mut bond_dists = Vec::new();
        let mut min_nonbonded = f64::INFINITY;
        for frame in frames {
            if frame.n_sites() != n {
                return Err(Error::InvalidDataset(format!(
                    "mixed bead counts in prior fit: {} vs {n}",
                    frame.n_sites()
                )));
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = vsub(frame.coords[i], frame.coords[j]);
                    let r = vdot(d, d).sqrt();
                    if j == i + 1 {
                        bond_dists.push(r);
                    } else if r < min_nonbonded {
                        min_nonbonded = r;
                    }
                }
            }
        }

        let kbt = KB * temperature;
        let mean = pairwise_sum(&bond_dists) / bond_dists.len() as f64;
        let sq: Vec<f64> = bond_dists.iter().map(|r| (r - mean) * (r - mean)).collect();
        let var = (pairwise_sum(&sq) / bond_dists.len() as f64).max(MIN_VARIANCE);
        // Wall height k_BT exactly at the closest approach in the data;
        // zero when the chain is too short to have nonbonded pairs.
        let c12 = if min_nonbonded.is_finite() {
            kbt * min_nonbonded.powi(12)
        } else {
            0.0
        };

        let prior = Prior {
            k_bond: kbt / var,
            r0: mean,
            c12,
        };
        if !prior.k_bond.is_finite() || !prior.r0.is_finite() || !prior.c12.is_finite() {
            return Err(Error::NonFinite {
                op: "prior fit",
                detail: None,
            });
        }
        Ok(prior)
    }

    /// Analytic energy and forces; no automatic differentiation involved.
    pub fn energy_forces(&self, coords: &[Vec3]) -> Result<(f64, Vec<Vec3>)> {
        let n = coords.len();
        let mut energy = 0.0;
        let mut forces = vec![[0.0; 3]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = vsub(coords[i], coords[j]);
                let r = vdot(d, d).sqrt();
                if r < 1e-10 {
                    return Err(Error::DegenerateGeometry {
                        op: "prior",
                        detail: format!("beads {i} and {j} coincide"),
                    });
                }
                // dV/dr; force on i is −(dV/dr)·(d/r).
                let dv_dr = if j == i + 1 {
                    energy += 0.5 * self.k_bond * (r - self.r0) * (r - self.r0);
                    self.k_bond * (r - self.r0)
                } else if self.c12 > 0.0 {
                    let inv12 = self.c12 / r.powi(12);
                    energy += inv12;
                    -12.0 * inv12 / r
                } else {
                    continue;
                };
                let g = -dv_dr / r;
                for a in 0..3 {
                    forces[i][a] += g * d[a];
                    forces[j][a] -= g * d[a];
                }
            }
        }
        if !energy.is_finite() {
            return Err(Error::NonFinite {
                op: "prior",
                detail: Some("energy".into()),
            });
        }
        Ok((energy, forces))
    }
}

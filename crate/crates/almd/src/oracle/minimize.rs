//! Steepest-descent energy minimization with an adaptive step size.
//!
//! Simple and robust is the point here: the minimizer only has to clean up
//! backmapped or hand-built geometries, not find global minima.

use crate::error::{Error, Result};
use crate::mathcore::geometry::{vnorm, Vec3};
use crate::oracle::forcefield::{aa_energy_forces_restrained, Restraint};
use crate::system::topology::Topology;

/// Result of a minimization run.
#[derive(Debug, Clone)]
pub struct MinimizeReport {
    pub coords: Vec<Vec3>,
    pub energy: f64,
    /// Largest per-atom force magnitude at the final geometry.
    pub max_force: f64,
    pub iterations: usize,
    /// True if `max_force` dropped below the tolerance, false if the
    /// iteration cap stopped the run first.
    pub converged: bool,
}

/// Largest per-atom force magnitude.
fn max_force_norm(forces: &[Vec3]) -> f64 {
    forces.iter().map(|f| vnorm(*f)).fold(0.0, f64::max)
}

/// Minimize the restrained force-field energy from `start`.
///
/// Steepest descent along the force with backtracking: an accepted step
/// grows the trial step size, a rejected one shrinks it and retries, so the
/// energy sequence is non-increasing by construction.
pub fn minimize_restrained(
    top: &Topology,
    start: &[Vec3],
    restraints: &[Restraint],
    max_iterations: usize,
    force_tolerance: f64,
) -> Result<MinimizeReport> {
    let mut coords = start.to_vec();
    let (mut energy, mut forces) = aa_energy_forces_restrained(top, &coords, restraints)?;
    // Initial displacement scale in nm for the steepest atom.
    let mut alpha = 1e-3;
    let mut iterations = 0;

    while iterations < max_iterations {
        let fmax = max_force_norm(&forces);
        if fmax <= force_tolerance {
            break;
        }
        if !fmax.is_finite() {
            return Err(Error::MinimizationDiverged {
                iteration: iterations,
            });
        }
        iterations += 1;

        let mut accepted = false;
        for _ in 0..60 {
            // Normalize so `alpha` is the displacement of the steepest atom.
            let s = alpha / fmax;
            let trial: Vec<Vec3> = coords
                .iter()
                .zip(forces.iter())
                .map(|(c, f)| [c[0] + s * f[0], c[1] + s * f[1], c[2] + s * f[2]])
                .collect();
            match aa_energy_forces_restrained(top, &trial, restraints) {
                Ok((e_trial, f_trial)) if e_trial <= energy => {
                    coords = trial;
                    energy = e_trial;
                    forces = f_trial;
                    alpha = (alpha * 1.5).min(0.05);
                    accepted = true;
                    break;
                }
                // Uphill or overlapping trial: shrink and retry.
                _ => alpha *= 0.5,
            }
            if alpha < 1e-14 {
                break;
            }
        }
        if !accepted {
            // No downhill step representable: treat the current point as
            // converged-as-far-as-possible rather than diverged.
            break;
        }
    }

    let max_force = max_force_norm(&forces);
    Ok(MinimizeReport {
        coords,
        energy,
        max_force,
        iterations,
        converged: max_force <= force_tolerance,
    })
}

/// Minimize the bare force-field energy.
pub fn minimize(
    top: &Topology,
    start: &[Vec3],
    max_iterations: usize,
    force_tolerance: f64,
) -> Result<MinimizeReport> {
    minimize_restrained(top, start, &[], max_iterations, force_tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ToyParams;
    use crate::system::topology::{build_toy_topology, ideal_toy_coords};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stretched_dimer_relaxes_to_bond_length() {
        let p = ToyParams::default();
        let top = build_toy_topology(2, &p).unwrap();
        let mut coords = ideal_toy_coords(2, &p).unwrap();
        // Stretch the first B–L bond by 25%. Steepest descent zigzags on
        // the stiff-bond/soft-LJ landscape, so the force tolerance is kept
        // modest; at k = 8000 a residual force of 0.1 means the bond length
        // is within ~1e-5 nm of its minimum.
        coords[1][0] *= 1.25;
        let report = minimize(&top, &coords, 5000, 0.1).unwrap();
        assert!(report.converged, "max_force {}", report.max_force);
        let d = crate::mathcore::geometry::vsub(report.coords[0], report.coords[1]);
        let r = crate::mathcore::geometry::vnorm(d);
        // LJ between non-excluded pairs shifts the minimum a hair off r0,
        // but the bond term dominates at k = 8000.
        assert!(
            (r - p.bond_bl_r0).abs() <= 1e-3,
            "relaxed B0–L0 distance {r}"
        );
    }

    #[test]
    fn pure_harmonic_pair_hits_r0_exactly() {
        use crate::system::topology::{Atom, AtomKind, Bond, LjType, Topology};
        let atom = |name: &str| Atom {
            name: name.to_string(),
            kind: AtomKind::Linker,
            mass: 10.0,
            bead_id: None,
            type_id: 0,
        };
        let mut exclusions = std::collections::HashSet::new();
        exclusions.insert((0, 1));
        let top = Topology {
            atoms: vec![atom("X0"), atom("X1")],
            bonds: vec![Bond {
                atoms: [0, 1],
                r0: 0.15,
                k: 1000.0,
            }],
            angles: vec![],
            dihedrals: vec![],
            nonbonded: vec![LjType {
                sigma: 0.3,
                epsilon: 0.0,
            }],
            exclusions,
            nominal_bead_spacing: 1.0,
        };
        let report = minimize(&top, &[[0.0; 3], [0.25, 0.0, 0.0]], 10_000, 1e-6).unwrap();
        assert!(report.converged);
        let r = crate::mathcore::geometry::vnorm(crate::mathcore::geometry::vsub(
            report.coords[0],
            report.coords[1],
        ));
        assert!((r - 0.15).abs() <= 1e-6, "relaxed distance {r}");
    }

    #[test]
    fn energy_trace_is_non_increasing_from_perturbed_chain() {
        let p = ToyParams::default();
        let top = build_toy_topology(5, &p).unwrap();
        let mut coords = ideal_toy_coords(5, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for c in coords.iter_mut() {
            for x in c.iter_mut() {
                *x += rng.gen_range(-0.03..0.03);
            }
        }
        // Re-run the minimizer one iteration at a time and record energies.
        let mut trace = Vec::new();
        let mut current = coords;
        for _ in 0..50 {
            let report = minimize(&top, &current, 1, 0.0).unwrap();
            trace.push(report.energy);
            current = report.coords;
        }
        for w in trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-12,
                "energy increased: {} -> {}",
                w[0],
                w[1]
            );
        }
        let report = minimize(&top, &current, 20_000, 1.0).unwrap();
        assert!(report.converged);
        assert!(report.energy <= trace[trace.len() - 1]);
    }

    #[test]
    fn already_minimal_geometry_is_left_alone() {
        use crate::system::topology::{Atom, AtomKind, Bond, LjType, Topology};
        let atom = |name: &str| Atom {
            name: name.to_string(),
            kind: AtomKind::Linker,
            mass: 10.0,
            bead_id: None,
            type_id: 0,
        };
        let mut exclusions = std::collections::HashSet::new();
        exclusions.insert((0, 1));
        let top = Topology {
            atoms: vec![atom("X0"), atom("X1")],
            bonds: vec![Bond {
                atoms: [0, 1],
                r0: 0.15,
                k: 1000.0,
            }],
            angles: vec![],
            dihedrals: vec![],
            nonbonded: vec![LjType {
                sigma: 0.3,
                epsilon: 0.0,
            }],
            exclusions,
            nominal_bead_spacing: 1.0,
        };
        let start = vec![[0.0; 3], [0.15, 0.0, 0.0]];
        let report = minimize(&top, &start, 100, 1e-6).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
        for (a, b) in report.coords.iter().zip(start.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn iteration_cap_is_reported_as_not_converged() {
        let p = ToyParams::default();
        let top = build_toy_topology(3, &p).unwrap();
        let mut coords = ideal_toy_coords(3, &p).unwrap();
        coords[2][1] += 0.05;
        let report = minimize(&top, &coords, 2, 1e-12).unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations, 2);
    }
}

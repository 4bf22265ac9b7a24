//! Classical all-atom force field: harmonic bonds and angles, periodic and
//! double-well dihedrals, Lennard-Jones with Lorentz–Berthelot mixing and
//! 1-2/1-3 exclusions, plus optional harmonic position restraints.
//!
//! All gradients are analytic; the tests pin them against central finite
//! differences.

use crate::error::{Error, Result};
use crate::mathcore::geometry::{vcross, vdot, vnorm, vscale, vsub, Vec3};
use crate::system::topology::Topology;

/// Minimum pair distance before a configuration is rejected as overlapping.
pub const MIN_PAIR_DISTANCE: f64 = 1e-6;

/// Harmonic position restraint ½k‖r − target‖² on one atom.
#[derive(Debug, Clone, Copy)]
pub struct Restraint {
    pub atom: usize,
    pub target: Vec3,
    /// kJ·mol⁻¹·nm⁻²
    pub k: f64,
}

/// Energy and forces of the bare force field.
pub fn aa_energy_forces(top: &Topology, coords: &[Vec3]) -> Result<(f64, Vec<Vec3>)> {
    aa_energy_forces_restrained(top, coords, &[])
}

/// Energy and forces with additional position restraints (used by the
/// backmapper's relaxation). Restraints are an external field: they break
/// the net-force/net-torque zero property of the bare force field.
pub fn aa_energy_forces_restrained(
    top: &Topology,
    coords: &[Vec3],
    restraints: &[Restraint],
) -> Result<(f64, Vec<Vec3>)> {
    if coords.len() != top.n_atoms() {
        return Err(Error::FrameSizeMismatch {
            got: coords.len(),
            expected: top.n_atoms(),
        });
    }
    let n = coords.len();
    let mut energy = 0.0;
    let mut forces = vec![[0.0f64; 3]; n];

    // Bonds: ½k(r − r0)².
    for b in &top.bonds {
        let [i, j] = b.atoms;
        let d = vsub(coords[i], coords[j]);
        let r = vnorm(d);
        if r < MIN_PAIR_DISTANCE {
            return Err(Error::OverlappingAtoms { i, j, dist: r });
        }
        let dr = r - b.r0;
        energy += 0.5 * b.k * dr * dr;
        let g = b.k * dr / r;
        for a in 0..3 {
            forces[i][a] -= g * d[a];
            forces[j][a] += g * d[a];
        }
    }

    // Angles: ½k(θ − θ0)², gradient via the standard arccos chain rule.
    for an in &top.angles {
        let [i, j, k] = an.atoms;
        let u = vsub(coords[i], coords[j]);
        let v = vsub(coords[k], coords[j]);
        let (nu, nv) = (vnorm(u), vnorm(v));
        if nu < MIN_PAIR_DISTANCE || nv < MIN_PAIR_DISTANCE {
            return Err(Error::OverlappingAtoms {
                i,
                j,
                dist: nu.min(nv),
            });
        }
        let uh = vscale(u, 1.0 / nu);
        let vh = vscale(v, 1.0 / nv);
        let cos_t = vdot(uh, vh).clamp(-1.0, 1.0);
        let theta = cos_t.acos();
        // sin θ floored: the toy never approaches collinearity, and a hard
        // zero would only produce NaN where the gradient is genuinely
        // undefined.
        let sin_t = (1.0 - cos_t * cos_t).sqrt().max(1e-10);
        let dv = an.k * (theta - an.theta0);
        energy += 0.5 * an.k * (theta - an.theta0) * (theta - an.theta0);

        for a in 0..3 {
            let gi = (cos_t * uh[a] - vh[a]) / (nu * sin_t);
            let gk = (cos_t * vh[a] - uh[a]) / (nv * sin_t);
            forces[i][a] -= dv * gi;
            forces[k][a] -= dv * gk;
            forces[j][a] += dv * (gi + gk);
        }
    }

    // Dihedrals: V(φ) with ∇φ from the Blondel–Karplus expressions.
    for d in &top.dihedrals {
        let [i, j, k, l] = d.atoms;
        let b1 = vsub(coords[j], coords[i]);
        let b2 = vsub(coords[k], coords[j]);
        let b3 = vsub(coords[l], coords[k]);
        let n1 = vcross(b1, b2);
        let n2 = vcross(b2, b3);
        let nb2 = vnorm(b2);
        let (n1sq, n2sq) = (vdot(n1, n1), vdot(n2, n2));
        if nb2 < MIN_PAIR_DISTANCE || n1sq < 1e-18 || n2sq < 1e-18 {
            return Err(Error::DegenerateGeometry {
                op: "dihedral_force",
                detail: format!("collinear atoms in dihedral {:?}", d.atoms),
            });
        }
        let m1 = vcross(n1, vscale(b2, 1.0 / nb2));
        let phi = vdot(m1, n2).atan2(vdot(n1, n2));

        energy += d.kind.energy(phi);
        let dv_dphi = d.kind.dv_dphi(phi);

        // Signs match the atan2 convention above (flipping the convention
        // flips every ∇φ together, so the j/k relations below still hold).
        let gi = vscale(n1, nb2 / n1sq);
        let gl = vscale(n2, -nb2 / n2sq);
        let s1 = vdot(b1, b2) / (nb2 * nb2);
        let s2 = vdot(b3, b2) / (nb2 * nb2);
        // Inner gradients from the chain rule through (b1, b2, b3); the
        // four gradients sum to zero by construction.
        let gj = [
            -(1.0 + s1) * gi[0] + s2 * gl[0],
            -(1.0 + s1) * gi[1] + s2 * gl[1],
            -(1.0 + s1) * gi[2] + s2 * gl[2],
        ];
        let gk = [
            s1 * gi[0] - (1.0 + s2) * gl[0],
            s1 * gi[1] - (1.0 + s2) * gl[1],
            s1 * gi[2] - (1.0 + s2) * gl[2],
        ];
        for a in 0..3 {
            forces[i][a] -= dv_dphi * gi[a];
            forces[j][a] -= dv_dphi * gj[a];
            forces[k][a] -= dv_dphi * gk[a];
            forces[l][a] -= dv_dphi * gl[a];
        }
    }

    // Lennard-Jones over non-excluded pairs, Lorentz–Berthelot mixing.
    for i in 0..n {
        for j in (i + 1)..n {
            if top.excluded(i, j) {
                continue;
            }
            let ti = &top.nonbonded[top.atoms[i].type_id];
            let tj = &top.nonbonded[top.atoms[j].type_id];
            let sigma = 0.5 * (ti.sigma + tj.sigma);
            let eps = (ti.epsilon * tj.epsilon).sqrt();
            if eps == 0.0 {
                continue;
            }
            let d = vsub(coords[i], coords[j]);
            let r2 = vdot(d, d);
            let r = r2.sqrt();
            if r < MIN_PAIR_DISTANCE {
                return Err(Error::OverlappingAtoms { i, j, dist: r });
            }
            let sr2 = sigma * sigma / r2;
            let sr6 = sr2 * sr2 * sr2;
            let sr12 = sr6 * sr6;
            energy += 4.0 * eps * (sr12 - sr6);
            // −dE/dr / r
            let g = 24.0 * eps * (2.0 * sr12 - sr6) / r2;
            for a in 0..3 {
                forces[i][a] += g * d[a];
                forces[j][a] -= g * d[a];
            }
        }
    }

    for r in restraints {
        let d = vsub(coords[r.atom], r.target);
        energy += 0.5 * r.k * vdot(d, d);
        for a in 0..3 {
            forces[r.atom][a] -= r.k * d[a];
        }
    }

    if !energy.is_finite() {
        return Err(Error::NonFinite {
            op: "aa_energy_forces",
            detail: Some("energy".to_string()),
        });
    }
    Ok((energy, forces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ToyParams;
    use crate::mathcore::geometry::vadd;
    use crate::system::topology::{
        build_toy_topology, ideal_toy_coords, Atom, AtomKind, Bond, LjType,
    };
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn bare_pair_topology(bond: Option<Bond>, lj: LjType, excluded: bool) -> Topology {
        let atom = |name: &str| Atom {
            name: name.to_string(),
            kind: AtomKind::Linker,
            mass: 10.0,
            bead_id: None,
            type_id: 0,
        };
        let mut exclusions = HashSet::new();
        if excluded {
            exclusions.insert((0, 1));
        }
        Topology {
            atoms: vec![atom("X0"), atom("X1")],
            bonds: bond.into_iter().collect(),
            angles: vec![],
            dihedrals: vec![],
            nonbonded: vec![lj],
            exclusions,
            nominal_bead_spacing: 1.0,
        }
    }

    #[test]
    fn single_bond_energy_and_force_by_hand() {
        let top = bare_pair_topology(
            Some(Bond {
                atoms: [0, 1],
                r0: 0.15,
                k: 1000.0,
            }),
            LjType {
                sigma: 0.3,
                epsilon: 0.0,
            },
            true,
        );
        let coords = vec![[0.0, 0.0, 0.0], [0.16, 0.0, 0.0]];
        let (e, f) = aa_energy_forces(&top, &coords).unwrap();
        assert!((e - 0.05).abs() < 1e-12, "E = {e}");
        assert!((vnorm(f[0]) - 10.0).abs() < 1e-9);
        assert!((vnorm(f[1]) - 10.0).abs() < 1e-9);
        // Restoring: atom 1 pulled back toward atom 0.
        assert!(f[1][0] < 0.0 && f[0][0] > 0.0);
    }

    #[test]
    fn lj_zeros() {
        let top = bare_pair_topology(
            None,
            LjType {
                sigma: 0.3,
                epsilon: 0.7,
            },
            false,
        );
        let (e, _) = aa_energy_forces(&top, &[[0.0; 3], [0.3, 0.0, 0.0]]).unwrap();
        assert!(e.abs() < 1e-12);
        let rmin = 0.3 * 2f64.powf(1.0 / 6.0);
        let (_, f) = aa_energy_forces(&top, &[[0.0; 3], [rmin, 0.0, 0.0]]).unwrap();
        assert!(vnorm(f[0]) < 1e-9 && vnorm(f[1]) < 1e-9);
    }

    fn perturbed_toy(n: usize, seed: u64) -> (Topology, Vec<Vec3>) {
        let p = ToyParams::default();
        let top = build_toy_topology(n, &p).unwrap();
        let mut coords = ideal_toy_coords(n, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in coords.iter_mut() {
            for x in c.iter_mut() {
                *x += rng.gen_range(-0.02..0.02);
            }
        }
        (top, coords)
    }

    /// Topology with exactly one interaction term and LJ disabled, for
    /// isolating each gradient.
    fn single_term_topology(
        n_atoms: usize,
        angles: Vec<crate::system::topology::Angle>,
        dihedrals: Vec<crate::system::topology::Dihedral>,
    ) -> Topology {
        let atoms = (0..n_atoms)
            .map(|i| Atom {
                name: format!("X{i}"),
                kind: AtomKind::Linker,
                mass: 10.0,
                bead_id: None,
                type_id: 0,
            })
            .collect();
        let mut exclusions = HashSet::new();
        for i in 0..n_atoms {
            for j in (i + 1)..n_atoms {
                exclusions.insert((i, j));
            }
        }
        Topology {
            atoms,
            bonds: vec![],
            angles,
            dihedrals,
            nonbonded: vec![LjType {
                sigma: 0.3,
                epsilon: 0.0,
            }],
            exclusions,
            nominal_bead_spacing: 1.0,
        }
    }

    fn fd_check(top: &Topology, coords: &[[f64; 3]], tol: f64) {
        let (_, f) = aa_energy_forces(top, coords).unwrap();
        let h = 1e-6;
        for i in 0..coords.len() {
            for a in 0..3 {
                let mut plus = coords.to_vec();
                plus[i][a] += h;
                let mut minus = coords.to_vec();
                minus[i][a] -= h;
                let (ep, _) = aa_energy_forces(top, &plus).unwrap();
                let (em, _) = aa_energy_forces(top, &minus).unwrap();
                let fd = -(ep - em) / (2.0 * h);
                assert!(
                    (fd - f[i][a]).abs() <= tol,
                    "atom {i} axis {a}: fd {fd} vs analytic {}",
                    f[i][a]
                );
            }
        }
    }

    #[test]
    fn isolated_angle_gradient_matches_fd() {
        use crate::system::topology::Angle;
        let top = single_term_topology(
            3,
            vec![Angle {
                atoms: [0, 1, 2],
                theta0: 2.0,
                k: 300.0,
            }],
            vec![],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let coords: Vec<[f64; 3]> = (0..3)
                .map(|_| std::array::from_fn(|_| rng.gen_range(-0.5..0.5)))
                .collect();
            fd_check(&top, &coords, 1e-4);
        }
    }

    #[test]
    fn isolated_dihedral_gradients_match_fd() {
        use crate::system::topology::{Dihedral, DihedralKind};
        let kinds = [
            DihedralKind::Periodic {
                k: 5.0,
                n: 3,
                phi0: 0.4,
            },
            DihedralKind::DoubleWell { k: 7.5, c: 0.0 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for kind in kinds {
            let top = single_term_topology(
                4,
                vec![],
                vec![Dihedral {
                    atoms: [0, 1, 2, 3],
                    kind,
                }],
            );
            for _ in 0..5 {
                let coords: Vec<[f64; 3]> = (0..4)
                    .map(|_| std::array::from_fn(|_| rng.gen_range(-0.5..0.5)))
                    .collect();
                fd_check(&top, &coords, 1e-4);
            }
        }
    }

    #[test]
    fn forces_match_central_finite_differences() {
        for seed in [1u64, 2, 3] {
            let (top, coords) = perturbed_toy(4, seed);
            let (_, f) = aa_energy_forces(&top, &coords).unwrap();
            let h = 1e-6;
            let scale = f
                .iter()
                .map(|v| vnorm(*v))
                .fold(f64::MIN, f64::max)
                .max(1.0);
            for i in 0..coords.len() {
                for a in 0..3 {
                    let mut plus = coords.clone();
                    plus[i][a] += h;
                    let mut minus = coords.clone();
                    minus[i][a] -= h;
                    let (ep, _) = aa_energy_forces(&top, &plus).unwrap();
                    let (em, _) = aa_energy_forces(&top, &minus).unwrap();
                    let fd = -(ep - em) / (2.0 * h);
                    assert!(
                        (fd - f[i][a]).abs() <= 1e-5 * scale,
                        "atom {i} axis {a}: fd {fd} vs analytic {}",
                        f[i][a]
                    );
                }
            }
        }
    }

    #[test]
    fn net_force_and_torque_vanish() {
        let (top, coords) = perturbed_toy(6, 11);
        let (_, f) = aa_energy_forces(&top, &coords).unwrap();
        let mut net = [0.0; 3];
        let mut torque = [0.0; 3];
        for (c, fi) in coords.iter().zip(f.iter()) {
            net = vadd(net, *fi);
            torque = vadd(torque, vcross(*c, *fi));
        }
        assert!(vnorm(net) < 1e-8, "net force {net:?}");
        assert!(vnorm(torque) < 1e-6, "net torque {torque:?}");
    }

    #[test]
    fn forces_are_translation_invariant_and_rotation_equivariant() {
        let (top, coords) = perturbed_toy(4, 21);
        let (e0, f0) = aa_energy_forces(&top, &coords).unwrap();

        let shifted: Vec<Vec3> = coords.iter().map(|c| vadd(*c, [1.0, -2.0, 0.5])).collect();
        let (e1, f1) = aa_energy_forces(&top, &shifted).unwrap();
        assert!((e0 - e1).abs() < 1e-9);
        for (a, b) in f0.iter().zip(f1.iter()) {
            assert!(vnorm(vsub(*a, *b)) < 1e-9);
        }

        // Rotation by 90° about z.
        let rot = |v: Vec3| [-v[1], v[0], v[2]];
        let rotated: Vec<Vec3> = coords.iter().map(|c| rot(*c)).collect();
        let (e2, f2) = aa_energy_forces(&top, &rotated).unwrap();
        assert!((e0 - e2).abs() < 1e-9);
        for (a, b) in f0.iter().zip(f2.iter()) {
            assert!(vnorm(vsub(rot(*a), *b)) < 1e-9);
        }
    }

    #[test]
    fn overlap_is_reported_with_the_pair() {
        let top = bare_pair_topology(
            None,
            LjType {
                sigma: 0.3,
                epsilon: 0.7,
            },
            false,
        );
        let r = aa_energy_forces(&top, &[[0.0; 3], [1e-9, 0.0, 0.0]]);
        assert!(matches!(r, Err(Error::OverlappingAtoms { i: 0, j: 1, .. })));
    }

    #[test]
    fn restraint_pulls_toward_target() {
        let top = bare_pair_topology(
            None,
            LjType {
                sigma: 0.3,
                epsilon: 0.0,
            },
            true,
        );
        let restraints = [Restraint {
            atom: 0,
            target: [1.0, 0.0, 0.0],
            k: 1000.0,
        }];
        let coords = vec![[0.0; 3], [5.0, 0.0, 0.0]];
        let (e, f) = aa_energy_forces_restrained(&top, &coords, &restraints).unwrap();
        assert!((e - 500.0).abs() < 1e-9);
        assert!((f[0][0] - 1000.0).abs() < 1e-9);
        assert!(vnorm(f[1]) < 1e-12);
    }
}

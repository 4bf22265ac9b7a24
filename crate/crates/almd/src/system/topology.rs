//! System topology and the built-in toy residue chain.
//!
//! The toy system replaces a real protein at desk scale. Each residue is
//! three atoms: a bead-site atom `B` on the backbone, a linker `L`
//! continuing the backbone, and a side atom `D`. The covalent backbone runs
//! B₀–L₀–B₁–L₁–…, so the double-well torsion on each junction
//! (Bᵢ, Lᵢ, Bᵢ₊₁, Lᵢ₊₁) swings all downstream beads: the metastable basins
//! are visible in CG (bead-only) coordinates.

use crate::constants::ToyParams;
use crate::error::{Error, Result};
use crate::mathcore::geometry::{vadd, vcross, vdot, vnorm, vscale, vsub, Vec3};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    /// Backbone atom tagged as the Cα-like bead site.
    BeadSite,
    /// Backbone linker between bead sites.
    Linker,
    /// Side-group satellite.
    Side,
}

#[derive(Debug, Clone)]
pub struct Atom {
    pub name: String,
    pub kind: AtomKind,
    /// amu
    pub mass: f64,
    /// Bead this atom belongs to, if any.
    pub bead_id: Option<usize>,
    /// Index into `Topology::nonbonded`.
    pub type_id: usize,
}

/// Harmonic bond ½k(r − r0)².
#[derive(Debug, Clone, Copy)]
pub struct Bond {
    pub atoms: [usize; 2],
    /// nm
    pub r0: f64,
    /// kJ·mol⁻¹·nm⁻²
    pub k: f64,
}

/// Harmonic angle ½k(θ − θ0)².
#[derive(Debug, Clone, Copy)]
pub struct Angle {
    pub atoms: [usize; 3],
    /// rad
    pub theta0: f64,
    /// kJ·mol⁻¹·rad⁻²
    pub k: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum DihedralKind {
    /// V(φ) = k(1 + cos(nφ − φ0))
    Periodic { k: f64, n: u32, phi0: f64 },
    /// V(φ) = k(cos φ − c)² — two minima at cos φ = c.
    DoubleWell { k: f64, c: f64 },
}

impl DihedralKind {
    /// Potential at torsion `phi`.
    pub fn energy(&self, phi: f64) -> f64 {
        match *self {
            DihedralKind::Periodic { k, n, phi0 } => k * (1.0 + (n as f64 * phi - phi0).cos()),
            DihedralKind::DoubleWell { k, c } => {
                let d = phi.cos() - c;
                k * d * d
            }
        }
    }

    /// dV/dφ at torsion `phi`.
    pub fn dv_dphi(&self, phi: f64) -> f64 {
        match *self {
            DihedralKind::Periodic { k, n, phi0 } => -k * n as f64 * (n as f64 * phi - phi0).sin(),
            DihedralKind::DoubleWell { k, c } => -2.0 * k * (phi.cos() - c) * phi.sin(),
        }
    }

    /// A torsion minimizing the potential (for DoubleWell, the positive
    /// branch of the two symmetric minima).
    pub fn preferred_phi(&self) -> f64 {
        match *self {
            DihedralKind::Periodic { n, phi0, .. } => (std::f64::consts::PI + phi0) / n as f64,
            DihedralKind::DoubleWell { c, .. } => c.clamp(-1.0, 1.0).acos(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dihedral {
    pub atoms: [usize; 4],
    pub kind: DihedralKind,
}

/// Lennard-Jones parameters for one atom type.
#[derive(Debug, Clone, Copy)]
pub struct LjType {
    /// nm
    pub sigma: f64,
    /// kJ·mol⁻¹
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub angles: Vec<Angle>,
    pub dihedrals: Vec<Dihedral>,
    /// Per-type LJ parameters; pairs mix by Lorentz–Berthelot.
    pub nonbonded: Vec<LjType>,
    /// Canonical (i < j) nonbonded exclusions (1-2 and 1-3 pairs).
    pub exclusions: HashSet<(usize, usize)>,
    /// Reference consecutive-bead distance (nm) used by anomaly checks.
    pub nominal_bead_spacing: f64,
}

impl Topology {
    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Number of beads (0 if no atom carries a bead id).
    pub fn n_beads(&self) -> usize {
        self.atoms
            .iter()
            .filter_map(|a| a.bead_id)
            .max()
            .map_or(0, |m| m + 1)
    }

    pub fn excluded(&self, i: usize, j: usize) -> bool {
        self.exclusions.contains(&(i.min(j), i.max(j)))
    }

    /// Atom indices belonging to bead `m`.
    pub fn bead_members(&self, m: usize) -> Vec<usize> {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.bead_id == Some(m))
            .map(|(i, _)| i)
            .collect()
    }

    /// The tagged bead-site atom of bead `m`, if present.
    pub fn bead_site(&self, m: usize) -> Option<usize> {
        self.atoms
            .iter()
            .position(|a| a.bead_id == Some(m) && a.kind == AtomKind::BeadSite)
    }

    /// Total mass of bead `m` in amu.
    pub fn bead_mass(&self, m: usize) -> f64 {
        self.bead_members(m)
            .iter()
            .map(|&i| self.atoms[i].mass)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.atoms.len();
        let fail = |msg: String| Err(Error::InvalidTopology(msg));
        if n == 0 {
            return fail("no atoms".into());
        }
        for (idx, a) in self.atoms.iter().enumerate() {
            if !(a.mass.is_finite() && a.mass > 0.0) {
                return fail(format!("atom {idx} has non-positive mass {}", a.mass));
            }
            if a.type_id >= self.nonbonded.len() {
                return fail(format!("atom {idx} type_id {} out of range", a.type_id));
            }
        }
        for t in &self.nonbonded {
            if !(t.sigma > 0.0 && t.epsilon >= 0.0) {
                return fail(format!("bad LJ parameters σ={} ε={}", t.sigma, t.epsilon));
            }
        }
        for b in &self.bonds {
            let [i, j] = b.atoms;
            if i >= n || j >= n {
                return fail(format!("bond ({i},{j}) out of range"));
            }
            if i == j {
                return fail(format!("bond with repeated atom {i}"));
            }
            if !(b.r0 > 0.0 && b.k >= 0.0) {
                return fail(format!("bond ({i},{j}) has r0={} k={}", b.r0, b.k));
            }
        }
        for a in &self.angles {
            let [i, j, k] = a.atoms;
            if i >= n || j >= n || k >= n {
                return fail(format!("angle ({i},{j},{k}) out of range"));
            }
            if i == j || j == k || i == k {
                return fail(format!("angle ({i},{j},{k}) repeats an atom"));
            }
        }
        for d in &self.dihedrals {
            let ats = d.atoms;
            if ats.iter().any(|&x| x >= n) {
                return fail(format!("dihedral {ats:?} out of range"));
            }
            for p in 0..4 {
                for q in (p + 1)..4 {
                    if ats[p] == ats[q] {
                        return fail(format!("dihedral {ats:?} repeats an atom"));
                    }
                }
            }
        }
        for &(i, j) in &self.exclusions {
            if i >= j || j >= n {
                return fail(format!("exclusion ({i},{j}) not canonical or out of range"));
            }
        }
        // Bead ids must cover 0..M−1 with no gaps.
        let m = self.n_beads();
        for bead in 0..m {
            if !self.atoms.iter().any(|a| a.bead_id == Some(bead)) {
                return fail(format!("bead {bead} owns no atoms"));
            }
        }
        if !(self.nominal_bead_spacing.is_finite() && self.nominal_bead_spacing > 0.0) {
            return fail(format!(
                "nominal bead spacing {} not positive",
                self.nominal_bead_spacing
            ));
        }
        Ok(())
    }
}

/// Indices of the three atoms of residue `i` in construction order.
fn residue_atoms(i: usize) -> (usize, usize, usize) {
    (3 * i, 3 * i + 1, 3 * i + 2)
}

/// Build the toy residue chain.
///
/// Per residue: bead site `B` (type 0), linker `L` (type 1), side atom `D`
/// (type 2); backbone B₀–L₀–B₁–L₁–…; one double-well dihedral per junction.
/// All constants come from `params`.
pub fn build_toy_topology(n_residues: usize, params: &ToyParams) -> Result<Topology> {
    if n_residues < 2 {
        return Err(Error::InvalidTopology(format!(
            "toy chain needs ≥ 2 residues, got {n_residues}"
        )));
    }
    let mut atoms = Vec::with_capacity(3 * n_residues);
    for i in 0..n_residues {
        atoms.push(Atom {
            name: format!("B{i}"),
            kind: AtomKind::BeadSite,
            mass: params.masses[0],
            bead_id: Some(i),
            type_id: 0,
        });
        atoms.push(Atom {
            name: format!("L{i}"),
            kind: AtomKind::Linker,
            mass: params.masses[1],
            bead_id: Some(i),
            type_id: 1,
        });
        atoms.push(Atom {
            name: format!("D{i}"),
            kind: AtomKind::Side,
            mass: params.masses[2],
            bead_id: Some(i),
            type_id: 2,
        });
    }

    let mut bonds = Vec::new();
    let mut angles = Vec::new();
    let mut dihedrals = Vec::new();
    for i in 0..n_residues {
        let (b, l, d) = residue_atoms(i);
        bonds.push(Bond {
            atoms: [b, l],
            r0: params.bond_bl_r0,
            k: params.bond_k,
        });
        bonds.push(Bond {
            atoms: [b, d],
            r0: params.bond_bd_r0,
            k: params.bond_k,
        });
        if i + 1 < n_residues {
            let (bn, ln, _) = residue_atoms(i + 1);
            bonds.push(Bond {
                atoms: [l, bn],
                r0: params.bond_bl_r0,
                k: params.bond_k,
            });
            // Backbone bend at the linker.
            angles.push(Angle {
                atoms: [b, l, bn],
                theta0: params.angle_backbone_theta0,
                k: params.angle_k,
            });
            // Backbone bend at the next bead site.
            angles.push(Angle {
                atoms: [l, bn, ln],
                theta0: params.angle_backbone_theta0,
                k: params.angle_k,
            });
            // Junction torsion: the double well that creates the basins.
            dihedrals.push(Dihedral {
                atoms: [b, l, bn, ln],
                kind: DihedralKind::DoubleWell {
                    k: params.dihedral_kw,
                    c: params.dihedral_c,
                },
            });
        }
        // Side-atom bends at the bead site.
        angles.push(Angle {
            atoms: [d, b, l],
            theta0: params.angle_side_theta0,
            k: params.angle_k,
        });
        if i > 0 {
            let (_, lp, _) = residue_atoms(i - 1);
            angles.push(Angle {
                atoms: [d, b, lp],
                theta0: params.angle_side_theta0,
                k: params.angle_k,
            });
        }
    }

    // 1-2 and 1-3 exclusions from the bond graph.
    let n = atoms.len();
    let mut adjacency = vec![Vec::new(); n];
    for bo in &bonds {
        adjacency[bo.atoms[0]].push(bo.atoms[1]);
        adjacency[bo.atoms[1]].push(bo.atoms[0]);
    }
    let mut exclusions = HashSet::new();
    for i in 0..n {
        for &j in &adjacency[i] {
            if i < j {
                exclusions.insert((i, j));
            }
            for &k in &adjacency[j] {
                if i < k {
                    exclusions.insert((i, k));
                }
            }
        }
    }

    // Consecutive bead sites sit two bonds apart with the backbone bend
    // between them: law of cosines gives the reference spacing.
    let r = params.bond_bl_r0;
    let spacing = (2.0 * r * r * (1.0 - params.angle_backbone_theta0.cos())).sqrt();

    let top = Topology {
        atoms,
        bonds,
        angles,
        dihedrals,
        nonbonded: params
            .lj
            .iter()
            .map(|&(sigma, epsilon)| LjType { sigma, epsilon })
            .collect(),
        exclusions,
        nominal_bead_spacing: spacing,
    };
    top.validate()?;
    Ok(top)
}

/// Reference consecutive-bead distance of a topology (nm).
pub fn nominal_bead_spacing(top: &Topology) -> f64 {
    top.nominal_bead_spacing
}

/// Place atom `d` bonded to `c` with bond length `r`, angle(b,c,d) = `theta`
/// and torsion(a,b,c,d) = `phi` (natural-extension reference frame).
pub(crate) fn place_atom(a: Vec3, b: Vec3, c: Vec3, r: f64, theta: f64, phi: f64) -> Vec3 {
    let bc = vsub(c, b);
    let bc = vscale(bc, 1.0 / vnorm(bc));
    let ab = vsub(b, a);
    // Frame handedness chosen so the placed torsion matches the signed
    // dihedral convention of `mathcore::geometry::dihedral`.
    let n = vcross(bc, ab);
    let nn = vnorm(n);
    assert!(nn > 1e-12, "collinear reference frame in place_atom");
    let n = vscale(n, 1.0 / nn);
    let m = vcross(n, bc);
    let local = [
        -r * theta.cos(),
        r * theta.sin() * phi.cos(),
        r * theta.sin() * phi.sin(),
    ];
    vadd(
        c,
        vadd(
            vscale(bc, local[0]),
            vadd(vscale(m, local[1]), vscale(n, local[2])),
        ),
    )
}

/// Ideal starting coordinates for the toy chain: equilibrium bonds and
/// angles, every junction torsion at +90° (one basin), free backbone
/// torsions extended, side atoms at +120°.
pub fn ideal_toy_coords(n_residues: usize, params: &ToyParams) -> Result<Vec<Vec3>> {
    if n_residues < 2 {
        return Err(Error::InvalidTopology(format!(
            "toy chain needs ≥ 2 residues, got {n_residues}"
        )));
    }
    let r_bl = params.bond_bl_r0;
    let r_bd = params.bond_bd_r0;
    let th_bb = params.angle_backbone_theta0;
    let th_side = params.angle_side_theta0;
    let junction = std::f64::consts::FRAC_PI_2;
    let side_phi = 2.0 * std::f64::consts::FRAC_PI_3;

    let mut coords = vec![[0.0; 3]; 3 * n_residues];
    let (b0, l0, _) = residue_atoms(0);
    coords[b0] = [0.0, 0.0, 0.0];
    coords[l0] = [r_bl, 0.0, 0.0];
    // First bend placed in the xy-plane by hand.
    let (b1, _, _) = residue_atoms(1);
    coords[b1] = vadd(
        coords[l0],
        [
            -r_bl * th_bb.cos(),
            r_bl * th_bb.sin(),
            0.0,
        ],
    );
    for i in 1..n_residues {
        let (bp, lp, _) = residue_atoms(i - 1);
        let (bi, li, _) = residue_atoms(i);
        coords[li] = place_atom(
            coords[bp], coords[lp], coords[bi], r_bl, th_bb, junction,
        );
        if i + 1 < n_residues {
            let (bn, _, _) = residue_atoms(i + 1);
            coords[bn] = place_atom(
                coords[lp],
                coords[bi],
                coords[li],
                r_bl,
                th_bb,
                std::f64::consts::PI,
            );
        }
    }
    for i in 0..n_residues {
        let (bi, li, di) = residue_atoms(i);
        if i == 0 {
            // Only one side-angle term exists for the first residue; any
            // torsion satisfies it.
            let (b1_, _, _) = residue_atoms(1);
            coords[di] =
                place_atom(coords[b1_], coords[li], coords[bi], r_bd, th_side, side_phi);
        } else {
            // Interior/last residues carry side angles to both adjacent
            // linkers; the unique direction (up to mirror) meeting both
            // lies against the linker bisector with an out-of-plane lift.
            let (_, lp, _) = residue_atoms(i - 1);
            let unit = |v: Vec3| vscale(v, 1.0 / vnorm(v));
            let u = unit(vsub(coords[lp], coords[bi]));
            let v = unit(vsub(coords[li], coords[bi]));
            let s = unit(vadd(u, v));
            let n = unit(vcross(u, v));
            let half = 0.5 * vdot(u, v).acos();
            let a = th_side.cos() / half.cos();
            let b = (1.0 - a * a).sqrt();
            let w = vadd(vscale(s, a), vscale(n, b));
            coords[di] = vadd(coords[bi], vscale(w, r_bd));
        }
    }
    Ok(coords)
}

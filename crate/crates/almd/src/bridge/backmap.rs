//! Geometric CG→AA reconstruction.
//!
//! Bead-site atoms are copied from the bead positions exactly; satellite
//! atoms are rebuilt at their equilibrium internal coordinates in a local
//! frame derived from (bead m−1, bead m, bead m+1). End of chain borrows
//! the nearest interior frame; exactly collinear neighbors fall back to a
//! fixed perpendicular axis and the affected residue is flagged.

use crate::error::{Error, Result};
use crate::mathcore::geometry::{vadd, vcross, vdot, vnorm, vscale, vsub, Vec3};
use crate::oracle::forcefield::Restraint;
use crate::oracle::minimize::minimize_restrained;
use crate::system::frame::{AaFrame, CgFrame};
use crate::system::topology::Topology;
use std::collections::HashMap;

/// Restraint constant holding bead sites at bead positions during
/// relaxation, kJ·mol⁻¹·nm⁻².
pub const RESTRAINT_K: f64 = 1000.0;
/// Minimizer iteration cap for the relaxation pass.
pub const RELAX_ITERATIONS: usize = 200;
/// Smallest linker-circle radius (nm): keeps overstretched linkers a
/// hair off the bead–bead axis so every torsion stays well-defined.
const MIN_CIRCLE_H: f64 = 1e-3;

/// A reconstructed frame plus reconstruction diagnostics.
#[derive(Debug, Clone)]
pub struct BackmapOutcome {
    pub frame: AaFrame,
    /// Residues whose local frame was degenerate (collinear neighboring
    /// beads) and used the fallback axis.
    pub fallback_residues: Vec<usize>,
    pub relaxed: bool,
}

/// Deterministic unit vector perpendicular to `u`: orthogonalize the
/// coordinate axis least aligned with `u`.
fn perpendicular_axis(u: Vec3) -> Vec3 {
    let abs = [u[0].abs(), u[1].abs(), u[2].abs()];
    let mut k = 0;
    if abs[1] < abs[k] {
        k = 1;
    }
    if abs[2] < abs[k] {
        k = 2;
    }
    let mut axis = [0.0; 3];
    axis[k] = 1.0;
    let p = vsub(axis, vscale(u, vdot(axis, u)));
    vscale(p, 1.0 / vnorm(p))
}

/// Equilibrium constants looked up from the topology.
struct Equilibria {
    /// (i, j) min/max ordered -> r0
    bond_r0: HashMap<(usize, usize), f64>,
    /// (outer min, center, outer max) -> (theta0, k)
    angles: HashMap<(usize, usize, usize), (f64, f64)>,
}

impl Equilibria {
    fn from_topology(top: &Topology) -> Self {
        let mut bond_r0 = HashMap::new();
        for b in &top.bonds {
            let key = (b.atoms[0].min(b.atoms[1]), b.atoms[0].max(b.atoms[1]));
            bond_r0.insert(key, b.r0);
        }
        let mut angles = HashMap::new();
        for a in &top.angles {
            let [i, j, k] = a.atoms;
            angles.insert((i.min(k), j, i.max(k)), (a.theta0, a.k));
        }
        Equilibria { bond_r0, angles }
    }

    fn r0(&self, i: usize, j: usize) -> Result<f64> {
        self.bond_r0
            .get(&(i.min(j), i.max(j)))
            .copied()
            .ok_or_else(|| Error::InvalidTopology(format!("no bond between atoms {i} and {j}")))
    }

    fn angle(&self, i: usize, j: usize, k: usize) -> Result<(f64, f64)> {
        self.angles
            .get(&(i.min(k), j, i.max(k)))
            .copied()
            .ok_or_else(|| {
                Error::InvalidTopology(format!("no angle centered on atom {j} for {i}-{j}-{k}"))
            })
    }

    fn theta0(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        Ok(self.angle(i, j, k)?.0)
    }
}

/// Reconstruct AA coordinates from bead positions.
pub fn backmap(top: &Topology, beads: &[Vec3], relax: bool) -> Result<BackmapOutcome> {
    let n = top.n_beads();
    if beads.len() != n {
        return Err(Error::FrameSizeMismatch {
            got: beads.len(),
            expected: n,
        });
    }
    if n < 2 {
        return Err(Error::InvalidTopology(
            "backmap needs at least two beads".into(),
        ));
    }
    for (m, b) in beads.iter().enumerate() {
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                op: "backmap",
                detail: Some(format!("bead {m}")),
            });
        }
    }
    // Consecutive-bead distance window: far beyond nominal spacing means an
    // exploded frame slipped through upstream filters; coincident beads
    // leave no direction to build frames from.
    let max_sep = 3.0 * top.nominal_bead_spacing;
    for m in 0..n - 1 {
        let d = vnorm(vsub(beads[m + 1], beads[m]));
        if d > max_sep {
            return Err(Error::DegenerateGeometry {
                op: "backmap",
                detail: format!(
                    "beads {m} and {} are {d:.3} nm apart (limit {max_sep:.3})",
                    m + 1
                ),
            });
        }
        if d < 1e-6 {
            return Err(Error::DegenerateGeometry {
                op: "backmap",
                detail: format!("beads {m} and {} coincide", m + 1),
            });
        }
    }

    let eq = Equilibria::from_topology(top);
    let mut coords = vec![[0.0; 3]; top.n_atoms()];
    let mut fallback_residues = Vec::new();

    // Residue m's atoms in the toy layout.
    let site = |m: usize| 3 * m;
    let linker = |m: usize| 3 * m + 1;
    let side = |m: usize| 3 * m + 2;

    // Bead sites verbatim.
    for m in 0..n {
        coords[site(m)] = beads[m];
    }

    // Per-residue bend normal e2: the component of the previous backbone
    // step perpendicular to the next one. Interior residues use both
    // neighbors; ends borrow the adjacent interior frame; collinear
    // neighbors take the fallback axis.
    let mut bend = vec![[0.0; 3]; n];
    let mut interior_ok = vec![false; n];
    for m in 1..n - 1 {
        let u = vsub(beads[m + 1], beads[m]);
        let uh = vscale(u, 1.0 / vnorm(u));
        let w = vsub(beads[m - 1], beads[m]);
        let p = vsub(w, vscale(uh, vdot(w, uh)));
        let pn = vnorm(p);
        if pn < 1e-8 * vnorm(w).max(1.0) {
            bend[m] = perpendicular_axis(uh);
            fallback_residues.push(m);
        } else {
            bend[m] = vscale(p, 1.0 / pn);
            interior_ok[m] = true;
        }
    }
    // End residues: borrow the nearest interior bend, else (short or fully
    // collinear chains) the fallback axis relative to the chain direction.
    let u0 = {
        let d = vsub(beads[1], beads[0]);
        vscale(d, 1.0 / vnorm(d))
    };
    bend[0] = if n > 2 && interior_ok[1] {
        let p = vsub(bend[1], vscale(u0, vdot(bend[1], u0)));
        let pn = vnorm(p);
        if pn > 1e-8 {
            vscale(p, 1.0 / pn)
        } else {
            perpendicular_axis(u0)
        }
    } else {
        perpendicular_axis(u0)
    };
    let ulast = {
        let d = vsub(beads[n - 1], beads[n - 2]);
        vscale(d, 1.0 / vnorm(d))
    };
    bend[n - 1] = if n > 2 && interior_ok[n - 2] {
        bend[n - 2]
    } else {
        perpendicular_axis(ulast)
    };

    // Junction torsion potentials, keyed by the linker that closes them.
    let junction_kind: HashMap<usize, crate::system::topology::DihedralKind> = top
        .dihedrals
        .iter()
        .map(|d| (d.atoms[3], d.kind))
        .collect();

    // Linkers. Linker m (m < n−1) sits at the bond distance from beads m
    // and m+1, which leaves one angular degree of freedom: its position on
    // a circle around the bead–bead axis (if the beads are stretched past
    // twice the bond length the circle keeps a hair of radius instead of
    // collapsing onto the axis — a collinear B–L–B makes every torsion
    // through the linker degenerate — and the relaxation pass resolves
    // the strain). Each linker after the first is
    // chosen by scanning its circle for the point minimizing the junction
    // torsion and backbone angle energy it closes; the first linker's free
    // orientation is picked by multi-start over that whole chain, so
    // reconstructed junctions land in torsional basins instead of on the
    // barrier.
    struct Circle {
        mid: Vec3,
        e2: Vec3,
        e3: Vec3,
        h: f64,
    }
    impl Circle {
        fn at(&self, chi: f64) -> Vec3 {
            vadd(
                self.mid,
                vadd(
                    vscale(self.e2, self.h * chi.cos()),
                    vscale(self.e3, self.h * chi.sin()),
                ),
            )
        }
    }
    let mut circles = Vec::with_capacity(n - 1);
    for m in 0..n - 1 {
        let r0 = eq.r0(site(m), linker(m))?;
        let span = vsub(beads[m + 1], beads[m]);
        let s = vnorm(span);
        let uh = vscale(span, 1.0 / s);
        let e2 = vsub(bend[m], vscale(uh, vdot(bend[m], uh)));
        let e2n = vnorm(e2);
        let e2 = if e2n > 1e-8 {
            vscale(e2, 1.0 / e2n)
        } else {
            perpendicular_axis(uh)
        };
        circles.push(Circle {
            mid: vadd(beads[m], vscale(uh, 0.5 * s)),
            e2,
            e3: vcross(uh, e2),
            h: (r0 * r0 - 0.25 * s * s).max(MIN_CIRCLE_H * MIN_CIRCLE_H).sqrt(),
        });
    }

    // Junction + backbone-angle strain of linker m placed at `pos`, with
    // linker m−1 at `prev`.
    let junction_score = |m: usize, prev: Vec3, pos: Vec3| -> f64 {
        let mut v = 0.0;
        if let Some(kind) = junction_kind.get(&linker(m)) {
            match crate::mathcore::geometry::dihedral(beads[m - 1], prev, beads[m], pos) {
                Ok(phi) => v += kind.energy(phi),
                Err(_) => v += 1e6,
            }
        }
        if let Ok((theta0, k)) = eq.angle(linker(m - 1), site(m), linker(m)) {
            match crate::mathcore::geometry::angle(prev, beads[m], pos) {
                Ok(theta) => v += 0.5 * k * (theta - theta0) * (theta - theta0),
                Err(_) => v += 1e6,
            }
        }
        v
    };

    const SCAN: usize = 256;
    const STARTS: usize = 32;
    let tau = std::f64::consts::TAU;
    let mut best_chain: Option<(f64, Vec<Vec3>)> = None;
    for s0 in 0..STARTS {
        let chi0 = s0 as f64 * tau / STARTS as f64;
        let mut chain = vec![circles[0].at(chi0)];
        let mut total = 0.0;
        for m in 1..n - 1 {
            let prev = chain[m - 1];
            let mut best = circles[m].at(0.0);
            let mut best_score = f64::INFINITY;
            for step in 0..SCAN {
                let cand = circles[m].at(step as f64 * tau / SCAN as f64);
                let sc = junction_score(m, prev, cand);
                if sc < best_score {
                    best_score = sc;
                    best = cand;
                }
            }
            total += best_score;
            chain.push(best);
        }
        if best_chain.as_ref().is_none_or(|(t, _)| total < *t) {
            best_chain = Some((total, chain));
        }
    }
    let (_, chain) = best_chain.expect("n >= 2 guarantees at least one linker");
    for (m, l) in chain.iter().enumerate() {
        coords[linker(m)] = *l;
    }
    // Terminal linker: only one bond pins it, so bond length, backbone
    // angle, and junction torsion fully determine the position.
    {
        let m = n - 1;
        let r0 = eq.r0(site(m), linker(m))?;
        let theta = eq.theta0(linker(m - 1), site(m), linker(m))?;
        let phi = junction_kind
            .get(&linker(m))
            .map(|k| k.preferred_phi())
            .unwrap_or(std::f64::consts::FRAC_PI_2);
        let (a, b, c) = (beads[m - 1], coords[linker(m - 1)], beads[m]);
        let frame_normal = vcross(vsub(c, b), vsub(b, a));
        coords[linker(m)] = if vnorm(frame_normal) > 1e-9 {
            crate::system::topology::place_atom(a, b, c, r0, theta, phi)
        } else {
            // Collinear reference frame: fall back to an arbitrary
            // perpendicular at the equilibrium angle.
            fallback_residues.push(m);
            let uin = {
                let d = vsub(b, c);
                vscale(d, 1.0 / vnorm(d))
            };
            let q = perpendicular_axis(uin);
            let dir = vadd(vscale(uin, theta.cos()), vscale(q, theta.sin()));
            vadd(c, vscale(dir, r0))
        };
    }

    // Side atoms. Residue 0 has a single D–B–L angle; later residues have
    // angle terms to both adjacent linkers, so the direction bisects them
    // with an out-of-plane component matching the equilibrium angle.
    for m in 0..n {
        let b = beads[m];
        let r0 = eq.r0(site(m), side(m))?;
        if m == 0 {
            let theta = eq.theta0(side(0), site(0), linker(0))?;
            let ul = {
                let d = vsub(coords[linker(0)], b);
                vscale(d, 1.0 / vnorm(d))
            };
            let e3 = vcross(u0, bend[0]);
            let q = vsub(e3, vscale(ul, vdot(e3, ul)));
            let qn = vnorm(q);
            let q = if qn > 1e-8 {
                vscale(q, 1.0 / qn)
            } else {
                perpendicular_axis(ul)
            };
            let dir = vadd(vscale(ul, theta.cos()), vscale(q, theta.sin()));
            coords[side(0)] = vadd(b, vscale(dir, r0));
            continue;
        }
        let theta = eq.theta0(side(m), site(m), linker(m))?;
        let u = {
            let d = vsub(coords[linker(m - 1)], b);
            vscale(d, 1.0 / vnorm(d))
        };
        let v = {
            let d = vsub(coords[linker(m)], b);
            vscale(d, 1.0 / vnorm(d))
        };
        let sum = vadd(u, v);
        let cr = vcross(u, v);
        let (sn, cn) = (vnorm(sum), vnorm(cr));
        if sn < 1e-8 || cn < 1e-8 {
            // Linker directions opposite or parallel: no bisector frame.
            let dir = perpendicular_axis(v);
            coords[side(m)] = vadd(b, vscale(dir, r0));
            if !fallback_residues.contains(&m) {
                fallback_residues.push(m);
            }
            continue;
        }
        let sh = vscale(sum, 1.0 / sn);
        let nh = vscale(cr, 1.0 / cn);
        // cos(angle to each linker) = a·cos(half-angle between linkers).
        let half_cos = vdot(u, sh);
        let a = (theta.cos() / half_cos).clamp(-1.0, 1.0);
        let out = (1.0 - a * a).sqrt();
        let dir = vadd(vscale(sh, a), vscale(nh, out));
        coords[side(m)] = vadd(b, vscale(dir, r0));
    }

    fallback_residues.sort_unstable();
    fallback_residues.dedup();

    if !relax {
        return Ok(BackmapOutcome {
            frame: AaFrame::new(0.0, coords),
            fallback_residues,
            relaxed: false,
        });
    }

    let restraints: Vec<Restraint> = (0..n)
        .map(|m| Restraint {
            atom: site(m),
            target: beads[m],
            k: RESTRAINT_K,
        })
        .collect();
    let report = minimize_restrained(top, &coords, &restraints, RELAX_ITERATIONS, 1.0)?;
    Ok(BackmapOutcome {
        frame: AaFrame::new(0.0, report.coords),
        fallback_residues,
        relaxed: true,
    })
}

/// Backmap a CG frame, preserving its timestamp.
pub fn backmap_frame(top: &Topology, frame: &CgFrame, relax: bool) -> Result<BackmapOutcome> {
    let mut out = backmap(top, &frame.coords, relax)?;
    out.frame.time = frame.time;
    Ok(out)
}

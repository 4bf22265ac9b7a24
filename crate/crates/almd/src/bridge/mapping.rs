//! Linear AA→CG mapping operator and its force projection.
//!
//! Coordinates map through the sparse row matrix `Xi` (`R = Xi r`, applied
//! per axis); forces project through `XiF = (Xi Xiᵀ)⁻¹ Xi`. Rows are stored
//! sparse; only the M×M Gram matrix is dense (M is small at desk scale).

use crate::error::{Error, Result};
use crate::mathcore::eigen::{cholesky, solve_lower, solve_lower_t, SquareMat};
use crate::mathcore::geometry::Vec3;
use crate::system::frame::{AaFrame, CgFrame};
use crate::system::topology::Topology;
use serde::{Deserialize, Serialize};

/// How beads are defined over atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingScheme {
    /// One-hot rows on each residue's tagged bead-site atom.
    CarbonAlpha,
    /// Mass-weighted rows over each bead's member atoms.
    CenterOfMass,
}

impl std::fmt::Display for MappingScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MappingScheme::CarbonAlpha => write!(f, "calpha"),
            MappingScheme::CenterOfMass => write!(f, "center-of-mass"),
        }
    }
}

/// Sparse AA→CG map with a precomputed Gram factorization for force
/// projection. Immutable after construction.
#[derive(Debug, Clone)]
pub struct MappingOperator {
    n_atoms: usize,
    /// Row m lists (atom index, weight) pairs of bead m.
    rows: Vec<Vec<(usize, f64)>>,
    /// Cholesky factor of Xi·Xiᵀ.
    gram_l: SquareMat,
    scheme: MappingScheme,
}

impl MappingOperator {
    /// Build an operator from explicit sparse rows.
    pub fn from_rows(
        n_atoms: usize,
        rows: Vec<Vec<(usize, f64)>>,
        scheme: MappingScheme,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidTopology("mapping with zero beads".into()));
        }
        for (m, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidTopology(format!("bead {m} maps no atoms")));
            }
            let mut sum = 0.0;
            for &(a, w) in row {
                if a >= n_atoms {
                    return Err(Error::InvalidTopology(format!(
                        "bead {m} references atom {a} of {n_atoms}"
                    )));
                }
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidTopology(format!(
                        "bead {m} has weight {w} on atom {a}"
                    )));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidTopology(format!(
                    "bead {m} weights sum to {sum}, expected 1"
                )));
            }
        }

        // Gram matrix G = Xi·Xiᵀ via an atom → (bead, weight) scatter.
        let m = rows.len();
        let mut gram = SquareMat::zeros(m);
        let mut by_atom: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_atoms];
        for (bead, row) in rows.iter().enumerate() {
            for &(a, w) in row {
                by_atom[a].push((bead, w));
            }
        }
        for hits in &by_atom {
            for &(bi, wi) in hits {
                for &(bj, wj) in hits {
                    gram[(bi, bj)] += wi * wj;
                }
            }
        }
        let gram_l = cholesky(&gram).ok_or(Error::NotPositiveDefinite)?;

        Ok(MappingOperator {
            n_atoms,
            rows,
            gram_l,
            scheme,
        })
    }

    /// Build the operator a topology implies under the given scheme.
    pub fn from_topology(top: &Topology, scheme: MappingScheme) -> Result<Self> {
        let n_beads = top.n_beads();
        let mut rows = vec![Vec::new(); n_beads];
        match scheme {
            MappingScheme::CarbonAlpha => {
                for (bead, row) in rows.iter_mut().enumerate() {
                    let site = top
                        .bead_site(bead)
                        .ok_or(Error::MissingBeadSite { residue: bead })?;
                    *row = vec![(site, 1.0)];
                }
            }
            MappingScheme::CenterOfMass => {
                for (bead, row) in rows.iter_mut().enumerate() {
                    let members = top.bead_members(bead);
                    if members.is_empty() {
                        return Err(Error::MissingBeadSite { residue: bead });
                    }
                    let total: f64 = members.iter().map(|&a| top.atoms[a].mass).sum();
                    *row = members
                        .iter()
                        .map(|&a| (a, top.atoms[a].mass / total))
                        .collect();
                }
            }
        }
        Self::from_rows(top.n_atoms(), rows, scheme)
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_beads(&self) -> usize {
        self.rows.len()
    }

    pub fn scheme(&self) -> MappingScheme {
        self.scheme
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.n_atoms {
            return Err(Error::FrameSizeMismatch {
                got,
                expected: self.n_atoms,
            });
        }
        Ok(())
    }

    /// R = Xi r.
    pub fn map_coords(&self, aa: &[Vec3]) -> Result<Vec<Vec3>> {
        self.check_len(aa.len())?;
        Ok(self
            .rows
            .iter()
            .map(|row| {
                let mut out = [0.0; 3];
                for &(a, w) in row {
                    for k in 0..3 {
                        out[k] += w * aa[a][k];
                    }
                }
                out
            })
            .collect())
    }

    /// F_CG = (Xi Xiᵀ)⁻¹ Xi f, per axis.
    pub fn project_forces(&self, aa_forces: &[Vec3]) -> Result<Vec<Vec3>> {
        self.check_len(aa_forces.len())?;
        let y = self.map_coords_unnormalized(aa_forces);
        // Solve G z = y columnwise through the Cholesky factor.
        let m = self.n_beads();
        let mut out = vec![[0.0; 3]; m];
        for axis in 0..3 {
            let col: Vec<f64> = y.iter().map(|v| v[axis]).collect();
            let z = solve_lower_t(&self.gram_l, &solve_lower(&self.gram_l, &col));
            for (o, zi) in out.iter_mut().zip(z.iter()) {
                o[axis] = *zi;
            }
        }
        Ok(out)
    }

    /// Xi v without the Gram solve (shared by coords and forces paths).
    fn map_coords_unnormalized(&self, v: &[Vec3]) -> Vec<Vec3> {
        self.rows
            .iter()
            .map(|row| {
                let mut out = [0.0; 3];
                for &(a, w) in row {
                    for k in 0..3 {
                        out[k] += w * v[a][k];
                    }
                }
                out
            })
            .collect()
    }

    /// Map an AA frame to a CG frame, projecting forces when present.
    pub fn map_frame(&self, frame: &AaFrame) -> Result<CgFrame> {
        let coords = self.map_coords(&frame.coords)?;
        Ok(match &frame.forces {
            Some(f) => CgFrame::with_forces(frame.time, coords, self.project_forces(f)?),
            None => CgFrame::new(frame.time, coords),
        })
    }

    /// Dense Xi, row-major (n_beads × n_atoms).
    pub fn mapping_matrix(&self) -> Vec<Vec<f64>> {
        let mut xi = vec![vec![0.0; self.n_atoms]; self.n_beads()];
        for (m, row) in self.rows.iter().enumerate() {
            for &(a, w) in row {
                xi[m][a] += w;
            }
        }
        xi
    }

    /// Dense XiF = (Xi Xiᵀ)⁻¹ Xi (n_beads × n_atoms).
    pub fn force_projection_matrix(&self) -> Vec<Vec<f64>> {
        let xi = self.mapping_matrix();
        let m = self.n_beads();
        let mut xif = vec![vec![0.0; self.n_atoms]; m];
        for a in 0..self.n_atoms {
            let col: Vec<f64> = (0..m).map(|i| xi[i][a]).collect();
            let z = solve_lower_t(&self.gram_l, &solve_lower(&self.gram_l, &col));
            for (i, zi) in z.iter().enumerate() {
                xif[i][a] = *zi;
            }
        }
        xif
    }

    /// Gram matrix Xi·Xiᵀ, reconstructed from its factor.
    pub fn gram_matrix(&self) -> SquareMat {
        let m = self.n_beads();
        let mut g = SquareMat::zeros(m);
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += self.gram_l[(i, k)] * self.gram_l[(j, k)];
                }
                g[(i, j)] = s;
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ToyParams;
    use crate::system::topology::build_toy_topology;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_vecs(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
        (0..n)
            .map(|_| std::array::from_fn(|_| rng.gen_range(-2.0..2.0)))
            .collect()
    }

    #[test]
    fn calpha_rows_are_one_hot_and_projection_equals_mapping() {
        let p = ToyParams::default();
        let top = build_toy_topology(4, &p).unwrap();
        let op = MappingOperator::from_topology(&top, MappingScheme::CarbonAlpha).unwrap();
        assert_eq!(op.n_beads(), 4);
        for (m, row) in op.rows().iter().enumerate() {
            assert_eq!(row.len(), 1);
            assert_eq!(row[0], (3 * m, 1.0));
        }
        // Gram is the identity, so XiF equals Xi entry for entry.
        let xi = op.mapping_matrix();
        let xif = op.force_projection_matrix();
        assert_eq!(xi, xif);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let forces = random_vecs(top.n_atoms(), &mut rng);
        let proj = op.project_forces(&forces).unwrap();
        for (m, p) in proj.iter().enumerate() {
            // Bitwise: the one-hot path multiplies and divides by exact 1.0.
            assert_eq!(*p, forces[3 * m]);
        }
    }

    #[test]
    fn gram_times_projection_recovers_xi() {
        let p = ToyParams::default();
        let top = build_toy_topology(5, &p).unwrap();
        for scheme in [MappingScheme::CarbonAlpha, MappingScheme::CenterOfMass] {
            let op = MappingOperator::from_topology(&top, scheme).unwrap();
            let xi = op.mapping_matrix();
            let xif = op.force_projection_matrix();
            let g = op.gram_matrix();
            let m = op.n_beads();
            for i in 0..m {
                for a in 0..op.n_atoms() {
                    let mut s = 0.0;
                    for k in 0..m {
                        s += g[(i, k)] * xif[k][a];
                    }
                    assert!(
                        (s - xi[i][a]).abs() <= 1e-12,
                        "(G·XiF)[{i}][{a}] = {s} vs Xi = {}",
                        xi[i][a]
                    );
                }
            }
        }
    }

    #[test]
    fn uniform_averaging_bead_sums_atom_forces() {
        let row = vec![vec![(0usize, 1.0 / 3.0), (1, 1.0 / 3.0), (2, 1.0 / 3.0)]];
        let op = MappingOperator::from_rows(3, row, MappingScheme::CenterOfMass).unwrap();
        let xif = op.force_projection_matrix();
        for a in 0..3 {
            assert!((xif[0][a] - 1.0).abs() <= 1e-12);
        }
        // (1,0,0) + (0,1,0) + (−1,−1,0) = 0.
        let f = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, -1.0, 0.0]];
        let proj = op.project_forces(&f).unwrap();
        for k in 0..3 {
            assert!(proj[0][k].abs() <= 1e-12);
        }
    }

    #[test]
    fn com_scheme_maps_unit_mass_pair_to_centroid() {
        let rows = vec![vec![(0usize, 0.5), (1, 0.5)]];
        let op = MappingOperator::from_rows(2, rows, MappingScheme::CenterOfMass).unwrap();
        let mapped = op
            .map_coords(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
            .unwrap();
        assert_eq!(mapped, vec![[1.0, 0.0, 0.0]]);
    }

    #[test]
    fn map_coords_is_linear() {
        let p = ToyParams::default();
        let top = build_toy_topology(3, &p).unwrap();
        let op = MappingOperator::from_topology(&top, MappingScheme::CenterOfMass).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r1 = random_vecs(top.n_atoms(), &mut rng);
        let r2 = random_vecs(top.n_atoms(), &mut rng);
        let (alpha, beta) = (0.7, -1.3);
        let combo: Vec<Vec3> = r1
            .iter()
            .zip(r2.iter())
            .map(|(a, b)| std::array::from_fn(|k| alpha * a[k] + beta * b[k]))
            .collect();
        let lhs = op.map_coords(&combo).unwrap();
        let m1 = op.map_coords(&r1).unwrap();
        let m2 = op.map_coords(&r2).unwrap();
        for (l, (a, b)) in lhs.iter().zip(m1.iter().zip(m2.iter())) {
            for k in 0..3 {
                assert!((l[k] - (alpha * a[k] + beta * b[k])).abs() <= 1e-12);
            }
        }
        // Zero maps to zero.
        let z = op.map_coords(&vec![[0.0; 3]; top.n_atoms()]).unwrap();
        assert!(z.iter().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn force_projection_commutes_with_rotation() {
        let p = ToyParams::default();
        let top = build_toy_topology(4, &p).unwrap();
        let op = MappingOperator::from_topology(&top, MappingScheme::CenterOfMass).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let forces = random_vecs(top.n_atoms(), &mut rng);
        let rot = |v: Vec3| [-v[1], v[0], v[2]];
        let rotated: Vec<Vec3> = forces.iter().map(|f| rot(*f)).collect();
        let a = op.project_forces(&rotated).unwrap();
        let b: Vec<Vec3> = op
            .project_forces(&forces)
            .unwrap()
            .iter()
            .map(|f| rot(*f))
            .collect();
        for (x, y) in a.iter().zip(b.iter()) {
            for k in 0..3 {
                assert!((x[k] - y[k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn invalid_rows_are_rejected() {
        assert!(MappingOperator::from_rows(3, vec![], MappingScheme::CenterOfMass).is_err());
        assert!(
            MappingOperator::from_rows(3, vec![vec![]], MappingScheme::CenterOfMass).is_err()
        );
        assert!(MappingOperator::from_rows(
            3,
            vec![vec![(5, 1.0)]],
            MappingScheme::CenterOfMass
        )
        .is_err());
        assert!(MappingOperator::from_rows(
            3,
            vec![vec![(0, 0.5)]],
            MappingScheme::CenterOfMass
        )
        .is_err());
        // Identical rows make the Gram matrix singular.
        let dup = vec![vec![(0, 1.0)], vec![(0, 1.0)]];
        assert!(matches!(
            MappingOperator::from_rows(3, dup, MappingScheme::CenterOfMass),
            Err(Error::NotPositiveDefinite)
        ));
        // Dimension mismatch surfaces on use.
        let op = MappingOperator::from_rows(2, vec![vec![(0, 1.0)]], MappingScheme::CarbonAlpha)
            .unwrap();
        assert!(op.map_coords(&[[0.0; 3]]).is_err());
    }
}

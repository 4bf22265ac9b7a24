//! 3-D geometry: vector helpers, bond/torsion angles, and optimal rigid
//! superposition (Kabsch alignment) computed through the quaternion key
//! matrix, which stays well-behaved on rank-deficient point clouds.

use crate::error::{Error, Result};
use crate::mathcore::eigen::{sym_eig, SquareMat};

pub type Vec3 = [f64; 3];

#[inline]
pub fn vadd(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn vsub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn vscale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn vdot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn vcross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn vnorm(a: Vec3) -> f64 {
    vdot(a, a).sqrt()
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        c = vadd(c, *p);
    }
    vscale(c, 1.0 / n)
}

/// Angle at `b` spanned by `a` and `c`, in radians ∈ [0, π].
pub fn angle(a: Vec3, b: Vec3, c: Vec3) -> Result<f64> {
    let u = vsub(a, b);
    let v = vsub(c, b);
    let (nu, nv) = (vnorm(u), vnorm(v));
    if nu < 1e-12 || nv < 1e-12 {
        return Err(Error::DegenerateGeometry {
            op: "angle",
            detail: format!("arm lengths {nu:.3e}, {nv:.3e}"),
        });
    }
    // atan2 form is stable near 0 and π where acos loses digits.
    Ok(vnorm(vcross(u, v)).atan2(vdot(u, v)))
}

/// Signed torsion angle of the chain a–b–c–d, in radians ∈ (−π, π].
///
/// Looking down the b→c axis, a positive angle means d is rotated
/// counter-clockwise from a; the planar trans arrangement gives +π and cis
/// gives 0. Collinear arms are rejected.
pub fn dihedral(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> Result<f64> {
    let b1 = vsub(b, a);
    let b2 = vsub(c, b);
    let b3 = vsub(d, c);
    let n1 = vcross(b1, b2);
    let n2 = vcross(b2, b3);
    let nb2 = vnorm(b2);
    if nb2 < 1e-12 || vnorm(n1) < 1e-12 || vnorm(n2) < 1e-12 {
        return Err(Error::DegenerateGeometry {
            op: "dihedral",
            detail: "collinear or coincident atoms".to_string(),
        });
    }
    let m1 = vcross(n1, vscale(b2, 1.0 / nb2));
    let x = vdot(n1, n2);
    let y = vdot(m1, n2);
    Ok(y.atan2(x))
}

/// Result of optimally superposing a mobile point cloud onto a reference.
#[derive(Debug, Clone)]
pub struct Alignment {
    /// Proper rotation (det = +1) applied to centered mobile coordinates.
    pub rotation: [[f64; 3]; 3],
    /// Centroid of the mobile cloud.
    pub mobile_centroid: Vec3,
    /// Centroid of the reference cloud.
    pub reference_centroid: Vec3,
    /// Root-mean-square deviation after alignment.
    pub rmsd: f64,
}

impl Alignment {
    /// Map a mobile-frame point into the reference frame.
    pub fn apply(&self, p: Vec3) -> Vec3 {
        let q = vsub(p, self.mobile_centroid);
        let r = &self.rotation;
        vadd(
            [
                r[0][0] * q[0] + r[0][1] * q[1] + r[0][2] * q[2],
                r[1][0] * q[0] + r[1][1] * q[1] + r[1][2] * q[2],
                r[2][0] * q[0] + r[2][1] * q[1] + r[2][2] * q[2],
            ],
            self.reference_centroid,
        )
    }
}

fn quat_to_matrix(q: [f64; 4]) -> [[f64; 3]; 3] {
    let [w, x, y, z] = q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Optimal rigid superposition of `mobile` onto `reference` (least-squares
/// over proper rotations and translations).
///
/// The rotation is recovered from the largest eigenvector of the 4×4
/// quaternion key matrix, so rank-deficient clouds (collinear, planar, or
/// fewer than three points) degrade gracefully: any optimal rotation is
/// returned and the RMSD is still the true minimum. A vanishing key matrix
/// yields the identity rotation.
pub fn kabsch_align(mobile: &[Vec3], reference: &[Vec3]) -> Result<Alignment> {
    if mobile.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: mobile.len(),
            right: reference.len(),
        });
    }
    if mobile.is_empty() {
        return Err(Error::EmptySample { op: "kabsch_align" });
    }
    let pc = centroid(mobile);
    let qc = centroid(reference);

    // Covariance S_ab = Σ p'_a q'_b over centered pairs.
    let mut s = [[0.0f64; 3]; 3];
    for (p, q) in mobile.iter().zip(reference.iter()) {
        let pp = vsub(*p, pc);
        let qq = vsub(*q, qc);
        for a in 0..3 {
            for b in 0..3 {
                s[a][b] += pp[a] * qq[b];
            }
        }
    }

    let key = SquareMat::from_rows(&[
        vec![
            s[0][0] + s[1][1] + s[2][2],
            s[1][2] - s[2][1],
            s[2][0] - s[0][2],
            s[0][1] - s[1][0],
        ],
        vec![
            s[1][2] - s[2][1],
            s[0][0] - s[1][1] - s[2][2],
            s[0][1] + s[1][0],
            s[2][0] + s[0][2],
        ],
        vec![
            s[2][0] - s[0][2],
            s[0][1] + s[1][0],
            -s[0][0] + s[1][1] - s[2][2],
            s[1][2] + s[2][1],
        ],
        vec![
            s[0][1] - s[1][0],
            s[2][0] + s[0][2],
            s[1][2] + s[2][1],
            -s[0][0] - s[1][1] + s[2][2],
        ],
    ]);
    let (_, vecs) = sym_eig(&key);
    let mut q = [vecs[(0, 0)], vecs[(1, 0)], vecs[(2, 0)], vecs[(3, 0)]];
    let qn = (q.iter().map(|x| x * x).sum::<f64>()).sqrt();
    if qn < 1e-12 {
        q = [1.0, 0.0, 0.0, 0.0];
    } else {
        for v in q.iter_mut() {
            *v /= qn;
        }
    }
    let rotation = quat_to_matrix(q);

    // The identity min Σ‖Rp'−q'‖² = Σ(|p'|²+|q'|²) − 2λ_max cancels badly
    // near zero, so the residual is evaluated directly instead.
    let align = Alignment {
        rotation,
        mobile_centroid: pc,
        reference_centroid: qc,
        rmsd: 0.0,
    };
    let ssd: f64 = mobile
        .iter()
        .zip(reference.iter())
        .map(|(p, q)| {
            let d = vsub(align.apply(*p), *q);
            vdot(d, d)
        })
        .sum();
    Ok(Alignment {
        rmsd: (ssd / mobile.len() as f64).sqrt(),
        ..align
    })
}

/// RMSD between two point clouds after optimal rigid superposition.
pub fn rmsd_after_alignment(mobile: &[Vec3], reference: &[Vec3]) -> Result<f64> {
    Ok(kabsch_align(mobile, reference)?.rmsd)
}

//! Trajectory benchmark suite: pair-distance featurization, TICA, and
//! Wasserstein-1 comparison of a model trajectory against a reference over
//! five observables (TICA-space KDE, reaction coordinate, bond lengths,
//! bond angles, dihedrals).
//!
//! TICA is always fit on the reference trajectory and applied to both —
//! fitting on the model would make successive rounds incomparable. TICA is
//! also the one observable that needs frames in time order; the other four
//! pool per-frame samples and are order-free.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::eigen::{generalized_sym_eig, SquareMat};
use crate::mathcore::geometry::{angle, dihedral, vdot, vsub};
use crate::mathcore::stats::{histogram, wasserstein1_1d, GaussianKde};
use crate::system::CgFrame;

/// Number of pair-distance features for `n_beads` beads.
pub fn feature_count(n_beads: usize) -> usize {
    n_beads * (n_beads - 1) / 2
}

/// All pairwise bead distances per frame, (i, j) with i < j in
/// lexicographic order. Rotation- and translation-invariant by
/// construction.
pub fn featurize(frames: &[CgFrame]) -> Result<Vec<Vec<f64>>> {
    if frames.is_empty() {
        return Err(Error::EmptySample { op: "featurize" });
    }
    let m = frames[0].coords.len();
    if m < 2 {
        return Err(Error::DimensionMismatch {
            op: "featurize",
            detail: format!("{m} beads, need at least 2"),
        });
    }
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        if f.coords.len() != m {
            return Err(Error::FrameSizeMismatch {
                got: f.coords.len(),
                expected: m,
            });
        }
        let mut row = Vec::with_capacity(feature_count(m));
        for i in 0..m {
            for j in (i + 1)..m {
                let d = vsub(f.coords[i], f.coords[j]);
                row.push(vdot(d, d).sqrt());
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// Linear model of the slowest collective modes of a feature series.
#[derive(Debug, Clone)]
pub struct TicaModel {
    pub mean: Vec<f64>,
    pub c0: SquareMat,
    pub ct: SquareMat,
    /// Lag in frames.
    pub lag: usize,
    /// All generalized eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Top-d eigenvector columns, C0-orthonormal; `projection[c]` is the
    /// c-th component's feature-space direction.
    pub projection: Vec<Vec<f64>>,
}

/// Fit TICA on a feature series: solve C_τ v = λ C0 v with the symmetric
/// (reversible) estimator over lag-windowed pairs (x_t, x_{t+τ}). The
/// symmetrization bounds every eigenvalue by 1 in magnitude up to
/// roundoff.
pub fn tica_fit(features: &[Vec<f64>], lag: usize, dims: usize) -> Result<TicaModel> {
    let t = features.len();
    if lag == 0 {
        return Err(Error::Config("tica lag must be at least 1".into()));
    }
    let n = features.first().map_or(0, Vec::len);
    if n == 0 || dims == 0 || dims > n {
        return Err(Error::Config(format!(
            "tica dims {dims} incompatible with {n} features"
        )));
    }
    if t <= lag + dims {
        return Err(Error::SeriesTooShort { len: t, lag });
    }
    if let Some(bad) = features.iter().find(|row| row.len() != n) {
        return Err(Error::DimensionMismatch {
            op: "tica_fit",
            detail: format!("ragged feature rows: {} vs {n}", bad.len()),
        });
    }

    let pairs = t - lag;
    let norm = 1.0 / (2 * pairs) as f64;

    // Mean over both lag windows, so centering is exactly symmetric.
    let mut mean = vec![0.0; n];
    for t0 in 0..pairs {
        for f in 0..n {
            mean[f] += features[t0][f] + features[t0 + lag][f];
        }
    }
    mean.iter_mut().for_each(|m| *m *= norm);

    let mut c0 = SquareMat::zeros(n);
    let mut ct = SquareMat::zeros(n);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for t0 in 0..pairs {
        for f in 0..n {
            a[f] = features[t0][f] - mean[f];
            b[f] = features[t0 + lag][f] - mean[f];
        }
        for i in 0..n {
            for j in i..n {
                c0[(i, j)] += a[i] * a[j] + b[i] * b[j];
                ct[(i, j)] += a[i] * b[j] + b[i] * a[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v0 = c0[(i, j)] * norm;
            let vt = ct[(i, j)] * norm;
            c0[(i, j)] = v0;
            c0[(j, i)] = v0;
            ct[(i, j)] = vt;
            ct[(j, i)] = vt;
        }
    }

    let (eigenvalues, vectors) = generalized_sym_eig(&ct, &c0)?;
    let projection = (0..dims)
        .map(|c| (0..n).map(|f| vectors[(f, c)]).collect())
        .collect();
    Ok(TicaModel {
        mean,
        c0,
        ct,
        lag,
        eigenvalues,
        projection,
    })
}

/// Project a feature series onto the model's components: one row per
/// frame, one column per kept component.
pub fn tica_project(model: &TicaModel, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = model.mean.len();
    let mut out = Vec::with_capacity(features.len());
    for row in features {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                op: "tica_project",
                detail: format!("{} features, model has {n}", row.len()),
            });
        }
        let y: Vec<f64> = model
            .projection
            .iter()
            .map(|p| (0..n).map(|f| p[f] * (row[f] - model.mean[f])).sum())
            .collect();
        out.push(y);
    }
    Ok(out)
}

/// Density polylines of one observable for the two trajectories.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurvePair {
    pub model: Vec<(f64, f64)>,
    pub reference: Vec<(f64, f64)>,
}

/// Gaussian-KDE curves of two sample sets on a shared grid; empty when a
/// set is degenerate (too small or zero variance).
fn kde_pair(model: &[f64], reference: &[f64], grid: usize) -> CurvePair {
    let curve = |samples: &[f64], lo: f64, hi: f64| {
        GaussianKde::with_scott_bandwidth(samples)
            .and_then(|kde| kde.evaluate_grid(lo, hi, grid))
            .unwrap_or_default()
    };
    let all = model.iter().chain(reference);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) {
        return CurvePair::default();
    }
    let pad = 0.05 * (hi - lo);
    CurvePair {
        model: curve(model, lo - pad, hi + pad),
        reference: curve(reference, lo - pad, hi + pad),
    }
}

/// TICA-space comparison: both trajectories on the top (≤ 2) components,
/// one 1-D W1 per marginal, averaged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TicaKdeComparison {
    /// Average of the per-component marginal W1 values.
    pub w1: f64,
    pub per_component: Vec<f64>,
    /// KDE curves per component (plot data).
    pub curves: Vec<CurvePair>,
}

/// Compare two feature series in the TICA space of `model` (fit on the
/// reference). W1 is computed exactly on the projected samples per
/// marginal and averaged; the KDE curves are attached for plotting.
pub fn tica_kde_w1(
    model_features: &[Vec<f64>],
    ref_features: &[Vec<f64>],
    tica: &TicaModel,
    grid: usize,
) -> Result<TicaKdeComparison> {
    let ym = tica_project(tica, model_features)?;
    let yr = tica_project(tica, ref_features)?;
    if ym.is_empty() || yr.is_empty() {
        return Err(Error::EmptySample { op: "tica_kde_w1" });
    }
    let dims = tica.projection.len().min(2);
    let mut per_component = Vec::with_capacity(dims);
    let mut curves = Vec::with_capacity(dims);
    for c in 0..dims {
        let a: Vec<f64> = ym.iter().map(|y| y[c]).collect();
        let b: Vec<f64> = yr.iter().map(|y| y[c]).collect();
        per_component.push(wasserstein1_1d(&a, &b)?);
        curves.push(kde_pair(&a, &b, grid));
    }
    let w1 = per_component.iter().sum::<f64>() / dims as f64;
    Ok(TicaKdeComparison {
        w1,
        per_component,
        curves,
    })
}

/// Sliced W1 between two d-dimensional sample sets: average 1-D W1 of the
/// projections onto `n_directions` seeded random unit directions.
pub fn sliced_w1(a: &[Vec<f64>], b: &[Vec<f64>], n_directions: usize, seed: u64) -> Result<f64> {
    if a.is_empty() || b.is_empty() || n_directions == 0 {
        return Err(Error::EmptySample { op: "sliced_w1" });
    }
    let d = a[0].len();
    if d == 0 || b[0].len() != d {
        return Err(Error::DimensionMismatch {
            op: "sliced_w1",
            detail: format!("{d} vs {}", b[0].len()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..n_directions {
        // Gaussian direction, normalized.
        let u: Vec<f64> = loop {
            let v: Vec<f64> = (0..d)
                .map(|_| {
                    let (a, b): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen_range(0.0..1.0));
                    (-2.0 * a.ln()).sqrt() * (2.0 * std::f64::consts::PI * b).cos()
                })
                .collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                break v.into_iter().map(|x| x / n).collect();
            }
        };
        let pa: Vec<f64> = a.iter().map(|x| x.iter().zip(&u).map(|(v, w)| v * w).sum()).collect();
        let pb: Vec<f64> = b.iter().map(|x| x.iter().zip(&u).map(|(v, w)| v * w).sum()).collect();
        acc += wasserstein1_1d(&pa, &pb)?;
    }
    Ok(acc / n_directions as f64)
}

/// Per-frame fraction of the listed bead pairs closer than `r_contact`.
pub fn reaction_coordinate(
    frames: &[CgFrame],
    pairs: &[(usize, usize)],
    r_contact: f64,
) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::EmptySample {
            op: "reaction_coordinate",
        });
    }
    if !(r_contact > 0.0 && r_contact.is_finite()) {
        return Err(Error::Config(format!(
            "contact radius must be positive, got {r_contact}"
        )));
    }
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let m = f.coords.len();
        let mut hits = 0usize;
        for &(i, j) in pairs {
            if i >= m || j >= m || i == j {
                return Err(Error::DimensionMismatch {
                    op: "reaction_coordinate",
                    detail: format!("pair ({i}, {j}) invalid for {m} beads"),
                });
            }
            let d = vsub(f.coords[i], f.coords[j]);
            if vdot(d, d).sqrt() < r_contact {
                hits += 1;
            }
        }
        out.push(hits as f64 / pairs.len() as f64);
    }
    Ok(out)
}

/// Pooled internal-coordinate samples over a trajectory: consecutive-bead
/// bond lengths (nm), bond angles (rad), dihedrals (rad, (−π, π]).
/// Classes the chain is too short to define come back empty with their
/// flag cleared rather than as errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InternalCoordinates {
    pub bond_lengths: Vec<f64>,
    pub bond_angles: Vec<f64>,
    pub dihedrals: Vec<f64>,
    pub bonds_defined: bool,
    pub angles_defined: bool,
    pub dihedrals_defined: bool,
}

pub fn internal_coordinate_distributions(frames: &[CgFrame]) -> Result<InternalCoordinates> {
    if frames.is_empty() {
        return Err(Error::EmptySample {
            op: "internal_coordinate_distributions",
        });
    }
    let m = frames[0].coords.len();
    let t = frames.len();
    let mut out = InternalCoordinates {
        bond_lengths: Vec::with_capacity(m.saturating_sub(1) * t),
        bond_angles: Vec::with_capacity(m.saturating_sub(2) * t),
        dihedrals: Vec::with_capacity(m.saturating_sub(3) * t),
        bonds_defined: m >= 2,
        angles_defined: m >= 3,
        dihedrals_defined: m >= 4,
    };
    for f in frames {
        let c = &f.coords;
        if c.len() != m {
            return Err(Error::FrameSizeMismatch {
                got: c.len(),
                expected: m,
            });
        }
        for i in 0..m.saturating_sub(1) {
            let d = vsub(c[i], c[i + 1]);
            out.bond_lengths.push(vdot(d, d).sqrt());
        }
        for i in 0..m.saturating_sub(2) {
            out.bond_angles.push(angle(c[i], c[i + 1], c[i + 2])?);
        }
        for i in 0..m.saturating_sub(3) {
            out.dihedrals.push(dihedral(c[i], c[i + 1], c[i + 2], c[i + 3])?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// TICA lag in saved frames.
    pub tica_lag: usize,
    pub tica_dims: usize,
    /// Bead pairs defining the reaction coordinate.
    pub contact_pairs: Vec<(usize, usize)>,
    /// Contact radius (nm).
    pub r_contact: f64,
    /// Points per plot curve.
    pub kde_grid: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            tica_lag: 10,
            tica_dims: 2,
            contact_pairs: Vec::new(),
            r_contact: 0.6,
            kde_grid: 200,
        }
    }
}

impl BenchConfig {
    /// Defaults for a linear chain of `n_beads`: the reaction coordinate
    /// watches the two outermost 1–4 contacts, whose distances separate
    /// the torsional basins.
    pub fn for_chain(n_beads: usize) -> Self {
        let contact_pairs = if n_beads >= 4 {
            let a = (0, 3);
            let b = (n_beads - 4, n_beads - 1);
            if a == b {
                vec![a]
            } else {
                vec![a, b]
            }
        } else if n_beads >= 2 {
            vec![(0, n_beads - 1)]
        } else {
            Vec::new()
        };
        BenchConfig {
            contact_pairs,
            ..BenchConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tica_lag == 0 || self.tica_dims == 0 {
            return Err(Error::Config(
                "tica lag and dims must be at least 1".into(),
            ));
        }
        if self.contact_pairs.is_empty() {
            return Err(Error::Config("no contact pairs configured".into()));
        }
        if !(self.r_contact > 0.0) {
            return Err(Error::Config(format!(
                "contact radius must be positive, got {}",
                self.r_contact
            )));
        }
        if self.kde_grid < 2 {
            return Err(Error::Config("kde grid needs at least 2 points".into()));
        }
        Ok(())
    }
}

/// One observable's W1 between model and reference. `defined` is false
/// when the chain cannot express the observable (then `w1` is 0 and the
/// counts are 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W1Row {
    pub observable: String,
    pub w1: f64,
    pub n_model: usize,
    pub n_ref: usize,
    pub defined: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BenchmarkPlots {
    /// One KDE curve pair per TICA component.
    pub tica: Vec<CurvePair>,
    /// Reaction-coordinate density polyline (histogram-derived: the
    /// coordinate is discrete on [0, 1]).
    pub reaction: CurvePair,
    pub bond_length: CurvePair,
    pub bond_angle: CurvePair,
    pub dihedral: CurvePair,
}

/// The five-row W1 comparison plus plot-ready curves and the config echo.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<W1Row>,
    /// Per-TICA-component marginal W1, before averaging.
    pub tica_marginals: Vec<f64>,
    pub config: BenchConfig,
    pub plots: BenchmarkPlots,
}

impl BenchmarkReport {
    pub fn w1(&self, observable: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.observable == observable)
            .map(|r| r.w1)
    }
}

fn labeled(name: &'static str, e: Error) -> Error {
    Error::Observable {
        name,
        source: Box::new(e),
    }
}

/// Density polyline from a fixed-range histogram.
fn density_polyline(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<(f64, f64)>> {
    let h = histogram(samples, lo, hi, bins)?;
    let d = h.density();
    Ok((0..bins).map(|i| (h.bin_center(i), d[i])).collect())
}

/// Run the full benchmark of a model trajectory against a reference:
/// TICA-space KDE W1 (fit on the reference), reaction-coordinate W1, and
/// bond/angle/dihedral W1.
pub fn benchmark(
    model_frames: &[CgFrame],
    ref_frames: &[CgFrame],
    cfg: &BenchConfig,
) -> Result<BenchmarkReport> {
    cfg.validate()?;
    if model_frames.is_empty() || ref_frames.is_empty() {
        return Err(Error::EmptySample { op: "benchmark" });
    }
    if model_frames[0].coords.len() != ref_frames[0].coords.len() {
        return Err(Error::FrameSizeMismatch {
            got: model_frames[0].coords.len(),
            expected: ref_frames[0].coords.len(),
        });
    }

    let fm = featurize(model_frames).map_err(|e| labeled("tica_kde", e))?;
    let fr = featurize(ref_frames).map_err(|e| labeled("tica_kde", e))?;
    let tica = tica_fit(&fr, cfg.tica_lag, cfg.tica_dims).map_err(|e| labeled("tica_kde", e))?;
    let tica_cmp =
        tica_kde_w1(&fm, &fr, &tica, cfg.kde_grid).map_err(|e| labeled("tica_kde", e))?;

    let rc_model = reaction_coordinate(model_frames, &cfg.contact_pairs, cfg.r_contact)
        .map_err(|e| labeled("reaction_coordinate", e))?;
    let rc_ref = reaction_coordinate(ref_frames, &cfg.contact_pairs, cfg.r_contact)
        .map_err(|e| labeled("reaction_coordinate", e))?;
    let rc_w1 =
        wasserstein1_1d(&rc_model, &rc_ref).map_err(|e| labeled("reaction_coordinate", e))?;

    let ic_model = internal_coordinate_distributions(model_frames)
        .map_err(|e| labeled("internal_coordinates", e))?;
    let ic_ref = internal_coordinate_distributions(ref_frames)
        .map_err(|e| labeled("internal_coordinates", e))?;

    let mut rows = vec![
        W1Row {
            observable: "tica_kde".into(),
            w1: tica_cmp.w1,
            n_model: model_frames.len(),
            n_ref: ref_frames.len(),
            defined: true,
        },
        W1Row {
            observable: "reaction_coordinate".into(),
            w1: rc_w1,
            n_model: rc_model.len(),
            n_ref: rc_ref.len(),
            defined: true,
        },
    ];
    let mut plots = BenchmarkPlots {
        tica: tica_cmp.curves.clone(),
        // Pad the unit interval so the boundary fractions 0 and 1 fall
        // inside the histogram range.
        reaction: CurvePair {
            model: density_polyline(&rc_model, -0.05, 1.05, 23)
                .map_err(|e| labeled("reaction_coordinate", e))?,
            reference: density_polyline(&rc_ref, -0.05, 1.05, 23)
                .map_err(|e| labeled("reaction_coordinate", e))?,
        },
        ..BenchmarkPlots::default()
    };

    let internals: [(&'static str, &Vec<f64>, &Vec<f64>, bool); 3] = [
        (
            "bond_length",
            &ic_model.bond_lengths,
            &ic_ref.bond_lengths,
            ic_model.bonds_defined,
        ),
        (
            "bond_angle",
            &ic_model.bond_angles,
            &ic_ref.bond_angles,
            ic_model.angles_defined,
        ),
        (
            "dihedral",
            &ic_model.dihedrals,
            &ic_ref.dihedrals,
            ic_model.dihedrals_defined,
        ),
    ];
    for (name, a, b, defined) in internals {
        let (w1, curves) = if defined {
            let w1 = wasserstein1_1d(a, b).map_err(|e| labeled(name, e))?;
            (w1, kde_pair(a, b, cfg.kde_grid))
        } else {
            (0.0, CurvePair::default())
        };
        rows.push(W1Row {
            observable: name.into(),
            w1,
            n_model: a.len(),
            n_ref: b.len(),
            defined,
        });
        match name {
            "bond_length" => plots.bond_length = curves,
            "bond_angle" => plots.bond_angle = curves,
            _ => plots.dihedral = curves,
        }
    }

    debug_assert!(rows.iter().all(|r| r.w1 >= 0.0));
    Ok(BenchmarkReport {
        rows,
        tica_marginals: tica_cmp.per_component,
        config: cfg.clone(),
        plots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::geometry::{vadd, Vec3};
    use crate::system::Frame;
    use rand::seq::SliceRandom;

    fn frames_of(coords: Vec<Vec<Vec3>>) -> Vec<CgFrame> {
        coords
            .into_iter()
            .enumerate()
            .map(|(t, c)| Frame::new(t as f64, c))
            .collect()
    }

    fn rotate_z(coords: &[Vec3], angle: f64, shift: Vec3) -> Vec<Vec3> {
        let (s, c) = angle.sin_cos();
        coords
            .iter()
            .map(|&[x, y, z]| vadd([c * x - s * y, s * x + c * y, z], shift))
            .collect()
    }

    /// Unit-variance OU series with correlation time `t_c` (frame units).
    fn ou_series(n: usize, t_c: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (-1.0 / t_c).exp();
        let s = (1.0 - a * a).sqrt();
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                let (u1, u2): (f64, f64) =
                    (rng.gen_range(1e-12..1.0f64), rng.gen_range(0.0..1.0f64));
                let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                x = a * x + s * z;
                x
            })
            .collect()
    }

    fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
        let n = xs.len() - lag;
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for t in 0..n {
            num += (xs[t] - mean) * (xs[t + lag] - mean);
        }
        for x in xs {
            den += (x - mean) * (x - mean);
        }
        (num / n as f64) / (den / xs.len() as f64)
    }

    /// Noisy zig-zag chain trajectory (every internal coordinate class
    /// defined, nothing degenerate).
    fn wiggly_chain(n_beads: usize, n_frames: usize, seed: u64) -> Vec<CgFrame> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Vec<Vec3> = (0..n_beads)
            .map(|i| [i as f64 * 0.35, 0.12 * ((i % 2) as f64), 0.03 * i as f64])
            .collect();
        frames_of(
            (0..n_frames)
                .map(|_| {
                    base.iter()
                        .map(|&p| {
                            [
                                p[0] + rng.gen_range(-0.04..0.04),
                                p[1] + rng.gen_range(-0.04..0.04),
                                p[2] + rng.gen_range(-0.04..0.04),
                            ]
                        })
                        .collect()
                })
                .collect(),
        )
    }

    #[test]
    fn featurize_counts_pairs_and_is_rigid_invariant() {
        // Equilateral triangle, side 0.5.
        let h = 0.5 * 3.0f64.sqrt() / 2.0;
        let tri = vec![[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.25, h, 0.0]];
        let moved = rotate_z(&tri, 0.8, [2.0, -1.0, 3.0]);
        let f = featurize(&frames_of(vec![tri, moved])).unwrap();
        assert_eq!(f[0].len(), 3);
        for &d in &f[0] {
            assert!((d - 0.5).abs() < 1e-12);
        }
        for (a, b) in f[0].iter().zip(&f[1]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(feature_count(10), 45);
    }

    #[test]
    fn ou_top_eigenvalue_matches_analytic_autocorrelation() {
        let lag = 10;
        let t_c = 20.0;
        let xs: Vec<Vec<f64>> = ou_series(200_000, t_c, 1).into_iter().map(|x| vec![x]).collect();
        let model = tica_fit(&xs, lag, 1).unwrap();
        let expected = (-(lag as f64) / t_c).exp();
        assert!(
            (model.eigenvalues[0] - expected).abs() <= 0.05,
            "λ₁ = {}, analytic {expected}",
            model.eigenvalues[0]
        );
        assert!(model.eigenvalues.iter().all(|l| l.abs() <= 1.0 + 1e-6));
    }

    #[test]
    fn white_noise_eigenvalues_are_small() {
        let a = ou_series(50_000, 1e-6, 2); // t_c → 0 is iid noise
        let b = ou_series(50_000, 1e-6, 3);
        let xs: Vec<Vec<f64>> = a.into_iter().zip(b).map(|(x, y)| vec![x, y]).collect();
        let model = tica_fit(&xs, 5, 2).unwrap();
        assert!(model.eigenvalues.iter().all(|l| l.abs() <= 0.1));
    }

    #[test]
    fn slow_direction_is_recovered_from_a_mixture() {
        // x = Q·(slow, fast) with Q a rotation; the top TICA direction
        // must align with the slow axis q1.
        let slow = ou_series(120_000, 100.0, 4);
        let fast = ou_series(120_000, 0.5, 5);
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let xs: Vec<Vec<f64>> = slow
            .iter()
            .zip(&fast)
            .map(|(&sl, &fa)| vec![c * sl - s * fa, s * sl + c * fa])
            .collect();
        let model = tica_fit(&xs, 10, 2).unwrap();
        let v = &model.projection[0];
        let q1 = [c, s];
        let cos = (v[0] * q1[0] + v[1] * q1[1]).abs()
            / (v[0] * v[0] + v[1] * v[1]).sqrt();
        assert!(cos >= 0.99, "cosine with slow axis: {cos}");
        // Projection columns are C0-orthonormal.
        for a in 0..2 {
            for b in 0..2 {
                let va = &model.projection[a];
                let vb = &model.projection[b];
                let mut q = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        q += va[i] * model.c0[(i, j)] * vb[j];
                    }
                }
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((q - want).abs() < 1e-8, "C0 inner product [{a},{b}] = {q}");
            }
        }
    }

    #[test]
    fn projected_autocorrelation_at_lag_equals_top_eigenvalue() {
        let lag = 10;
        let xs: Vec<Vec<f64>> = ou_series(150_000, 30.0, 6)
            .into_iter()
            .zip(ou_series(150_000, 2.0, 7))
            .map(|(x, y)| vec![x + 0.3 * y, y])
            .collect();
        let model = tica_fit(&xs, lag, 2).unwrap();
        let y = tica_project(&model, &xs).unwrap();
        let tic1: Vec<f64> = y.iter().map(|r| r[0]).collect();
        let ac = autocorrelation(&tic1, lag);
        assert!(
            (ac - model.eigenvalues[0]).abs() <= 0.05,
            "autocorr {ac} vs λ₁ {}",
            model.eigenvalues[0]
        );
    }

    #[test]
    fn tica_input_validation() {
        let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        assert!(matches!(
            tica_fit(&xs[..8], 10, 1),
            Err(Error::SeriesTooShort { len: 8, lag: 10 })
        ));
        assert!(tica_fit(&xs, 0, 1).is_err());
        assert!(tica_fit(&xs, 5, 2).is_err()); // dims > features
        let mut ragged = xs.clone();
        ragged[3] = vec![1.0, 2.0];
        assert!(matches!(
            tica_fit(&ragged, 5, 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn identical_trajectories_give_zero_tica_w1() {
        let frames = wiggly_chain(5, 400, 8);
        let f = featurize(&frames).unwrap();
        let tica = tica_fit(&f, 10, 2).unwrap();
        let cmp = tica_kde_w1(&f, &f, &tica, 50).unwrap();
        assert!(cmp.w1.abs() <= 1e-12);
        assert!(cmp.per_component.iter().all(|w| w.abs() <= 1e-12));
    }

    #[test]
    fn unit_shift_along_tic1_gives_w1_half() {
        let frames = wiggly_chain(4, 500, 9);
        let f = featurize(&frames).unwrap();
        let tica = tica_fit(&f, 10, 2).unwrap();
        // Shift features by C0·p1: C0-orthonormality turns that into a
        // +1 shift of TIC1 and exactly 0 on TIC2.
        let n = tica.mean.len();
        let p1 = &tica.projection[0];
        let shift: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| tica.c0[(i, j)] * p1[j]).sum())
            .collect();
        let shifted: Vec<Vec<f64>> = f
            .iter()
            .map(|row| row.iter().zip(&shift).map(|(x, s)| x + s).collect())
            .collect();
        // TIC2 sees a ~1e-9 leak of the shift: eigenvectors are
        // orthonormal under the solver's regularized C0, not C0 itself.
        let cmp = tica_kde_w1(&shifted, &f, &tica, 50).unwrap();
        assert!((cmp.per_component[0] - 1.0).abs() <= 1e-7, "tic1 {}", cmp.per_component[0]);
        assert!(cmp.per_component[1].abs() <= 1e-7, "tic2 {}", cmp.per_component[1]);
        assert!((cmp.w1 - 0.5).abs() <= 1e-7);
    }

    #[test]
    fn half_subsample_stays_within_the_bootstrap_noise_floor() {
        let frames = wiggly_chain(4, 2000, 10);
        let f = featurize(&frames).unwrap();
        let tica = tica_fit(&f, 10, 2).unwrap();
        let half: Vec<Vec<f64>> = f.iter().step_by(2).cloned().collect();
        let observed = tica_kde_w1(&half, &f, &tica, 50).unwrap().w1;
        // Noise floor: seeded bootstrap halves of the reference itself.
        let mut floor = 0.0;
        let n_boot = 8;
        for b in 0..n_boot {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + b);
            let mut idx: Vec<usize> = (0..f.len()).collect();
            idx.shuffle(&mut rng);
            idx.truncate(f.len() / 2);
            let boot: Vec<Vec<f64>> = idx.iter().map(|&i| f[i].clone()).collect();
            floor += tica_kde_w1(&boot, &f, &tica, 50).unwrap().w1;
        }
        floor /= n_boot as f64;
        assert!(
            observed <= 3.0 * floor,
            "subsample W1 {observed} above 3× bootstrap floor {floor}"
        );
    }

    #[test]
    fn sliced_w1_matches_translation_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<Vec<f64>> = (0..4000)
            .map(|_| {
                (0..2)
                    .map(|_| {
                        let (u1, u2): (f64, f64) =
                            (rng.gen_range(1e-12..1.0f64), rng.gen_range(0.0..1.0f64));
                        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                    })
                    .collect()
            })
            .collect();
        let b: Vec<Vec<f64>> = a.iter().map(|r| vec![r[0] + 1.0, r[1]]).collect();
        assert!(sliced_w1(&a, &a, 16, 0).unwrap().abs() < 1e-12);
        // For a pure translation t, E_θ|t·θ| = |t|·2/π in 2-D.
        let w = sliced_w1(&a, &b, 400, 0).unwrap();
        let expected = 2.0 / std::f64::consts::PI;
        assert!(
            (w - expected).abs() < 0.1 * expected,
            "sliced W1 {w} vs {expected}"
        );
    }

    #[test]
    fn reaction_coordinate_fractions() {
        // Compact square: all listed pairs in contact.
        let square = vec![
            [0.0, 0.0, 0.0],
            [0.3, 0.0, 0.0],
            [0.3, 0.3, 0.0],
            [0.0, 0.3, 0.0],
        ];
        let pairs = [(0usize, 1usize), (1, 2), (2, 3), (0, 3)];
        let rc = reaction_coordinate(&frames_of(vec![square.clone()]), &pairs, 0.6).unwrap();
        assert_eq!(rc, vec![1.0]);

        // Fully extended chain with far-apart pair list.
        let extended: Vec<Vec3> = (0..4).map(|i| [i as f64, 0.0, 0.0]).collect();
        let rc =
            reaction_coordinate(&frames_of(vec![extended]), &[(0, 3), (0, 2)], 0.6).unwrap();
        assert_eq!(rc, vec![0.0]);

        // Exactly 2 of 4 pairs in contact.
        let mixed = vec![
            [0.0, 0.0, 0.0],
            [0.2, 0.0, 0.0],
            [5.0, 0.0, 0.0],
            [5.2, 0.0, 0.0],
        ];
        let rc = reaction_coordinate(
            &frames_of(vec![mixed]),
            &[(0, 1), (2, 3), (0, 2), (1, 3)],
            0.6,
        )
        .unwrap();
        assert_eq!(rc, vec![0.5]);

        assert!(reaction_coordinate(&frames_of(vec![square]), &[], 0.6).is_err());
    }

    #[test]
    fn internal_coordinates_on_fixtures() {
        // Right angle at bead 1, bonds of length 1 and 0.5.
        let l = vec![[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.5, 0.0, 0.0]];
        let ic = internal_coordinate_distributions(&frames_of(vec![l.clone(), l])).unwrap();
        assert_eq!(ic.bond_lengths.len(), 4);
        assert!((ic.bond_lengths[0] - 1.0).abs() < 1e-12);
        assert!((ic.bond_lengths[1] - 0.5).abs() < 1e-12);
        assert_eq!(ic.bond_angles.len(), 2);
        for a in &ic.bond_angles {
            assert!((a - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        }
        assert!(!ic.dihedrals_defined);
        assert!(ic.dihedrals.is_empty());

        // Rigid chain replicated: bond sample = T copies, W1 to itself 0.
        let chain = wiggly_chain(5, 1, 12);
        let t_copies: Vec<CgFrame> = (0..7).map(|_| chain[0].clone()).collect();
        let ic = internal_coordinate_distributions(&t_copies).unwrap();
        assert_eq!(ic.bond_lengths.len(), 7 * 4);
        assert!(ic.dihedrals_defined);
        assert_eq!(wasserstein1_1d(&ic.bond_lengths, &ic.bond_lengths).unwrap(), 0.0);
    }

    #[test]
    fn dihedrals_live_on_the_half_open_interval() {
        let frames = wiggly_chain(6, 200, 13);
        let ic = internal_coordinate_distributions(&frames).unwrap();
        assert!(!ic.dihedrals.is_empty());
        assert!(ic
            .dihedrals
            .iter()
            .all(|&d| d > -std::f64::consts::PI && d <= std::f64::consts::PI));
    }

    #[test]
    fn benchmark_of_identical_trajectories_is_all_zero() {
        let frames = wiggly_chain(5, 300, 14);
        let cfg = BenchConfig::for_chain(5);
        let report = benchmark(&frames, &frames, &cfg).unwrap();
        assert_eq!(report.rows.len(), 5);
        for row in &report.rows {
            assert!(row.defined, "{} undefined", row.observable);
            assert!(row.w1.abs() <= 1e-12, "{}: {}", row.observable, row.w1);
        }
        for name in [
            "tica_kde",
            "reaction_coordinate",
            "bond_length",
            "bond_angle",
            "dihedral",
        ] {
            assert!(report.w1(name).is_some());
        }
    }

    #[test]
    fn benchmark_is_invariant_to_rigid_motion_of_either_trajectory() {
        let reference = wiggly_chain(5, 300, 15);
        let model = wiggly_chain(5, 250, 16);
        let cfg = BenchConfig::for_chain(5);
        let base = benchmark(&model, &reference, &cfg).unwrap();
        let moved: Vec<CgFrame> = model
            .iter()
            .map(|f| Frame::new(f.time, rotate_z(&f.coords, 1.3, [4.0, 5.0, -6.0])))
            .collect();
        let turned = benchmark(&moved, &reference, &cfg).unwrap();
        for (a, b) in base.rows.iter().zip(&turned.rows) {
            assert!(
                (a.w1 - b.w1).abs() <= 1e-9,
                "{}: {} vs {}",
                a.observable,
                a.w1,
                b.w1
            );
        }
    }

    #[test]
    fn order_free_observables_ignore_frame_shuffling() {
        let reference = wiggly_chain(5, 300, 17);
        let model = wiggly_chain(5, 260, 18);
        let cfg = BenchConfig::for_chain(5);
        let base = benchmark(&model, &reference, &cfg).unwrap();
        let mut shuffled = model.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(19));
        let after = benchmark(&shuffled, &reference, &cfg).unwrap();
        // TICA needs time order and is exempt; the other four pool
        // per-frame samples and must not move at all.
        for name in ["reaction_coordinate", "bond_length", "bond_angle", "dihedral"] {
            assert_eq!(base.w1(name).unwrap(), after.w1(name).unwrap(), "{name}");
        }
    }

    #[test]
    fn disjoint_basins_exceed_the_noise_floor() {
        // Reference wiggles around a compact shape, model around an
        // extended one; the TICA row must clear the self-noise level.
        let reference = wiggly_chain(5, 800, 20);
        let model: Vec<CgFrame> = wiggly_chain(5, 800, 21)
            .into_iter()
            .map(|f| {
                let stretched: Vec<Vec3> =
                    f.coords.iter().map(|&[x, y, z]| [1.8 * x, y, z]).collect();
                Frame::new(f.time, stretched)
            })
            .collect();
        let cfg = BenchConfig::for_chain(5);
        let between = benchmark(&model, &reference, &cfg).unwrap();
        let half: Vec<CgFrame> = reference.iter().step_by(2).cloned().collect();
        let floor = benchmark(&half, &reference, &cfg).unwrap();
        assert!(
            between.w1("tica_kde").unwrap() > 3.0 * floor.w1("tica_kde").unwrap(),
            "basin separation {} vs floor {}",
            between.w1("tica_kde").unwrap(),
            floor.w1("tica_kde").unwrap()
        );
    }

    #[test]
    fn benchmark_errors_carry_the_observable_label() {
        let frames = wiggly_chain(5, 60, 22);
        let cfg = BenchConfig {
            contact_pairs: vec![(0, 99)],
            ..BenchConfig::for_chain(5)
        };
        let err = benchmark(&frames, &frames, &cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::Observable {
                name: "reaction_coordinate",
                ..
            }
        ));
        // Too short for the TICA lag → labeled tica_kde.
        let cfg = BenchConfig::for_chain(5);
        let err = benchmark(&frames[..8], &frames[..8], &cfg).unwrap_err();
        assert!(matches!(err, Error::Observable { name: "tica_kde", .. }));
    }

    #[test]
    fn short_chain_flags_dihedrals_instead_of_failing() {
        let frames = wiggly_chain(3, 200, 23);
        let cfg = BenchConfig::for_chain(3);
        let report = benchmark(&frames, &frames, &cfg).unwrap();
        let row = report
            .rows
            .iter()
            .find(|r| r.observable == "dihedral")
            .unwrap();
        assert!(!row.defined);
        assert_eq!(row.w1, 0.0);
        assert_eq!(row.n_model, 0);
    }

    #[test]
    fn config_validation() {
        assert!(BenchConfig::for_chain(5).validate().is_ok());
        let mut cfg = BenchConfig::for_chain(5);
        cfg.tica_lag = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::for_chain(5);
        cfg.contact_pairs.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::for_chain(5);
        cfg.r_contact = -0.1;
        assert!(cfg.validate().is_err());
    }
}

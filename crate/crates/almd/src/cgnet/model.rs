//! The coarse-grained potential: per-bead type embeddings refined by
//! continuous-filter message passing over radial-basis pair features,
//! summed through a per-bead readout, plus an optional physics prior.
//!
//! Positions enter only through pair distances, so rigid-motion invariance
//! of the energy (and equivariance of the forces) holds by construction;
//! the tests below still verify both numerically.
//!
//! # Flat parameter layout
//!
//! `theta` is a single `Vec<f64>`; tensors appear in this order (row-major,
//! `F` = n_features, `G` = n_rbf, `H = max(F/2, 1)`):
//!
//! 1. embeddings: n_types × F
//! 2. per interaction block, in block order:
//!    w_in (F×F), b_in (F), w_f1 (F×G), b_f1 (F), w_f2 (F×F), b_f2 (F),
//!    w_out (F×F), b_out (F)
//! 3. readout: w_r1 (H×F), b_r1 (H), w_r2 (1×H), b_r2 (1)
//!
//! # Initialization
//!
//! One `ChaCha8Rng::seed_from_u64(seed)` stream, drawn in layout order:
//! embedding entries ~ U(−1, 1); each weight matrix ~ U(−1/√fan_in,
//! 1/√fan_in) with fan_in its column count; biases zero (drawn as no-ops,
//! not skipped, so the stream layout is self-evident).
//!
//! # Interaction block
//!
//! With e_ij the radial basis expansion of r_ij and ∘ elementwise:
//!
//! ```text
//! w_ij = w_f2·ssp(w_f1·e_ij + b_f1) + b_f2          (filter MLP)
//! m_i  = Σ_{j≠i, r_ij<r_cut} (w_in·x_j + b_in) ∘ w_ij
//! x_i ← x_i + w_out·ssp(m_i) + b_out
//! ```
//!
//! Beads with no neighbors inside the cutoff pass through unchanged, so an
//! isolated bead feels exactly zero network force.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cgnet::prior::Prior;
use crate::cgnet::tape::{NodeId, RbfSpec, Tape};
use crate::error::{Error, Result};
use crate::mathcore::geometry::{vscale, vsub, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Number of distinct bead types the embedding table covers.
    pub n_types: usize,
    /// Interaction (message-passing) blocks.
    pub n_blocks: usize,
    /// Per-bead feature width F.
    pub n_features: usize,
    /// Radial basis functions G.
    pub n_rbf: usize,
    /// Interaction cutoff radius in nm.
    pub r_cut: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            n_types: 1,
            n_blocks: 2,
            n_features: 32,
            n_rbf: 24,
            r_cut: 1.2,
        }
    }
}

impl HyperParams {
    /// Named presets trading accuracy against cost.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "small" => Ok(HyperParams {
                n_types: 1,
                n_blocks: 1,
                n_features: 16,
                n_rbf: 12,
                r_cut: 1.0,
            }),
            "default" => Ok(HyperParams::default()),
            "wide" => Ok(HyperParams {
                n_types: 1,
                n_blocks: 3,
                n_features: 48,
                n_rbf: 32,
                r_cut: 1.4,
            }),
            other => Err(Error::Config(format!(
                "unknown model preset `{other}` (expected small, default, or wide)"
            ))),
        }
    }

    pub fn preset_names() -> [&'static str; 3] {
        ["small", "default", "wide"]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_types == 0
            || self.n_blocks == 0
            || self.n_features == 0
            || self.n_rbf < 2
            || !(self.r_cut > 0.0)
        {
            return Err(Error::Config(format!("invalid hyperparameters: {self:?}")));
        }
        Ok(())
    }

    pub fn rbf_spec(&self) -> RbfSpec {
        RbfSpec::even(self.n_rbf, self.r_cut)
    }

    fn readout_hidden(&self) -> usize {
        (self.n_features / 2).max(1)
    }

    /// Total parameter count for the layout documented above.
    pub fn n_params(&self) -> usize {
        let (f, g, h) = (self.n_features, self.n_rbf, self.readout_hidden());
        let per_block = (f * f + f) + (f * g + f) + (f * f + f) + (f * f + f);
        self.n_types * f + self.n_blocks * per_block + (h * f + h) + (h + 1)
    }
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct BlockOffsets {
    pub w_in: usize,
    pub b_in: usize,
    pub w_f1: usize,
    pub b_f1: usize,
    pub w_f2: usize,
    pub b_f2: usize,
    pub w_out: usize,
    pub b_out: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct ThetaLayout {
    pub emb: usize,
    pub blocks: Vec<BlockOffsets>,
    pub w_r1: usize,
    pub b_r1: usize,
    pub w_r2: usize,
    pub b_r2: usize,
    pub total: usize,
}

impl ThetaLayout {
    pub fn of(h: &HyperParams) -> Self {
        let (f, g, hid) = (h.n_features, h.n_rbf, h.readout_hidden());
        let mut off = h.n_types * f;
        let emb = 0;
        let mut blocks = Vec::with_capacity(h.n_blocks);
        for _ in 0..h.n_blocks {
            let w_in = off;
            off += f * f;
            let b_in = off;
            off += f;
            let w_f1 = off;
            off += f * g;
            let b_f1 = off;
            off += f;
            let w_f2 = off;
            off += f * f;
            let b_f2 = off;
            off += f;
            let w_out = off;
            off += f * f;
            let b_out = off;
            off += f;
            blocks.push(BlockOffsets {
                w_in,
                b_in,
                w_f1,
                b_f1,
                w_f2,
                b_f2,
                w_out,
                b_out,
            });
        }
        let w_r1 = off;
        off += hid * f;
        let b_r1 = off;
        off += hid;
        let w_r2 = off;
        off += hid;
        let b_r2 = off;
        off += 1;
        ThetaLayout {
            emb,
            blocks,
            w_r1,
            b_r1,
            w_r2,
            b_r2,
            total: off,
        }
    }
}

/// Radial basis expansion of a single distance, exposed for inspection and
/// plotting. Zero (with zero slope) at and beyond the cutoff.
pub fn rbf_expand(hyper: &HyperParams, r: f64) -> Vec<f64> {
    hyper.rbf_spec().expand(r)
}

#[derive(Debug, Clone)]
pub struct CgModel {
    pub hyper: HyperParams,
    pub theta: Vec<f64>,
    /// Physics prior added to the network energy; `None` disables it.
    pub prior: Option<Prior>,
}

/// Geometry of one within-cutoff pair, kept alongside its tape node so
/// forces can be assembled from distance adjoints.
#[derive(Debug, Clone)]
pub(crate) struct PairGeom {
    pub i: usize,
    pub j: usize,
    /// Unit vector (R_i − R_j)/r: dr/dR_i = u, dr/dR_j = −u.
    pub u: Vec3,
    pub node: NodeId,
}

pub(crate) struct EnergyTape {
    pub tape: Tape,
    pub u_net: NodeId,
    pub pairs: Vec<PairGeom>,
}

impl CgModel {
    /// Fresh model with seeded parameters (see the layout/init notes in the
    /// module docs) and no prior.
    pub fn init(hyper: HyperParams, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let layout = ThetaLayout::of(&hyper);
        let mut theta = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, g, hid) = (hyper.n_features, hyper.n_rbf, hyper.readout_hidden());

        let mut fill = |theta: &mut [f64], off: usize, len: usize, bound: f64| {
            for slot in &mut theta[off..off + len] {
                *slot = rng.gen_range(-bound..bound);
            }
        };
        fill(&mut theta, layout.emb, hyper.n_types * f, 1.0);
        for b in &layout.blocks {
            fill(&mut theta, b.w_in, f * f, 1.0 / (f as f64).sqrt());
            fill(&mut theta, b.w_f1, f * g, 1.0 / (g as f64).sqrt());
            fill(&mut theta, b.w_f2, f * f, 1.0 / (f as f64).sqrt());
            fill(&mut theta, b.w_out, f * f, 1.0 / (f as f64).sqrt());
        }
        fill(&mut theta, layout.w_r1, hid * f, 1.0 / (f as f64).sqrt());
        fill(&mut theta, layout.w_r2, hid, 1.0 / (hid as f64).sqrt());

        Ok(CgModel {
            hyper,
            theta,
            prior: None,
        })
    }

    pub(crate) fn layout(&self) -> ThetaLayout {
        ThetaLayout::of(&self.hyper)
    }

    fn check_frame(&self, coords: &[Vec3], types: &[usize]) -> Result<()> {
        if coords.len() != types.len() {
            return Err(Error::DimensionMismatch {
                op: "cg_energy",
                detail: format!("{} coordinates vs {} types", coords.len(), types.len()),
            });
        }
        if let Some(&t) = types.iter().find(|&&t| t >= self.hyper.n_types) {
            return Err(Error::Config(format!(
                "bead type {t} out of range (model has {} types)",
                self.hyper.n_types
            )));
        }
        if coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                op: "cg_energy",
                detail: Some("input coordinates".into()),
            });
        }
        Ok(())
    }

    /// All i<j pairs within the cutoff (brute force; bead counts here are
    /// software far below where cell lists would pay off).
    fn neighbor_pairs(&self, coords: &[Vec3]) -> Result<Vec<(usize, usize, f64, Vec3)>> {
        let mut pairs = Vec::new();
        for i in 0..coords.len() {
            for j in (i + 1)..coords.len() {
                let d = vsub(coords[i], coords[j]);
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if r < 1e-10 {
                    return Err(Error::DegenerateGeometry {
                        op: "neighbor_pairs",
                        detail: format!("beads {i} and {j} coincide"),
                    });
                }
                if r < self.hyper.r_cut {
                    pairs.push((i, j, r, vscale(d, 1.0 / r)));
                }
            }
        }
        Ok(pairs)
    }

    /// Build the network energy graph for one frame. Shared by inference
    /// (numeric backward) and training (recorded backward).
    pub(crate) fn build_energy_tape(&self, coords: &[Vec3], types: &[usize]) -> Result<EnergyTape> {
        self.check_frame(coords, types)?;
        let n = coords.len();
        let layout = self.layout();
        let (f, g, hid) = (
            self.hyper.n_features,
            self.hyper.n_rbf,
            self.hyper.readout_hidden(),
        );
        let mut tape = Tape::new(self.hyper.rbf_spec());

        let raw = self.neighbor_pairs(coords)?;
        let mut pairs = Vec::with_capacity(raw.len());
        let mut features = Vec::with_capacity(raw.len());
        for (i, j, r, u) in raw {
            let node = tape.input(vec![r]);
            features.push(tape.rbf(node));
            pairs.push(PairGeom { i, j, u, node });
        }

        // Initial per-bead features from the embedding table.
        let mut x: Vec<NodeId> = types
            .iter()
            .map(|&t| {
                let off = layout.emb + t * f;
                tape.param(off, &self.theta[off..off + f])
            })
            .collect();

        for b in &layout.blocks {
            let th = |o: usize, l: usize| &self.theta[o..o + l];
            let w_in = tape.param(b.w_in, th(b.w_in, f * f));
            let b_in = tape.param(b.b_in, th(b.b_in, f));
            let w_f1 = tape.param(b.w_f1, th(b.w_f1, f * g));
            let b_f1 = tape.param(b.b_f1, th(b.b_f1, f));
            let w_f2 = tape.param(b.w_f2, th(b.w_f2, f * f));
            let b_f2 = tape.param(b.b_f2, th(b.b_f2, f));
            let w_out = tape.param(b.w_out, th(b.w_out, f * f));
            let b_out = tape.param(b.b_out, th(b.b_out, f));

            let h: Vec<NodeId> = x.iter().map(|&xi| tape.affine(w_in, xi, Some(b_in))).collect();

            let mut messages: Vec<Vec<NodeId>> = vec![Vec::new(); n];
            for (p, &e) in pairs.iter().zip(features.iter()) {
                let pre = tape.affine(w_f1, e, Some(b_f1));
                let act = tape.ssp(pre);
                let filt = tape.affine(w_f2, act, Some(b_f2));
                let to_i = tape.mul(h[p.j], filt);
                messages[p.i].push(to_i);
                let to_j = tape.mul(h[p.i], filt);
                messages[p.j].push(to_j);
            }

            for (i, msgs) in messages.into_iter().enumerate() {
                if msgs.is_empty() {
                    continue;
                }
                let m = tape.add_n(msgs);
                let act = tape.ssp(m);
                let upd = tape.affine(w_out, act, Some(b_out));
                x[i] = tape.add(x[i], upd);
            }
        }

        let w_r1 = tape.param(layout.w_r1, &self.theta[layout.w_r1..layout.w_r1 + hid * f]);
        let b_r1 = tape.param(layout.b_r1, &self.theta[layout.b_r1..layout.b_r1 + hid]);
        let w_r2 = tape.param(layout.w_r2, &self.theta[layout.w_r2..layout.w_r2 + hid]);
        let b_r2 = tape.param(layout.b_r2, &self.theta[layout.b_r2..layout.b_r2 + 1]);
        let energies: Vec<NodeId> = x
            .iter()
            .map(|&xi| {
                let p = tape.affine(w_r1, xi, Some(b_r1));
                let a = tape.ssp(p);
                tape.affine(w_r2, a, Some(b_r2))
            })
            .collect();
        let u_net = tape.add_n(energies);
        tape.check_finite("cg_energy")?;
        Ok(EnergyTape { tape, u_net, pairs })
    }

    /// Potential energy (network + prior when enabled).
    pub fn cg_energy(&self, coords: &[Vec3], types: &[usize]) -> Result<f64> {
        let built = self.build_energy_tape(coords, types)?;
        let mut e = built.tape.scalar(built.u_net);
        if let Some(prior) = &self.prior {
            e += prior.energy_forces(coords)?.0;
        }
        Ok(e)
    }

    /// Energy and forces F = −∇U. Network forces come from distance
    /// adjoints; the prior contributes analytically.
    pub fn cg_forces(&self, coords: &[Vec3], types: &[usize]) -> Result<(f64, Vec<Vec3>)> {
        let built = self.build_energy_tape(coords, types)?;
        let mut energy = built.tape.scalar(built.u_net);
        let mut forces = vec![[0.0; 3]; coords.len()];
        let adj = built.tape.backward(built.u_net);
        for p in &built.pairs {
            if adj[p.node].is_empty() {
                continue;
            }
            let g = adj[p.node][0]; // dU/dr for this pair
            for a in 0..3 {
                forces[p.i][a] -= g * p.u[a];
                forces[p.j][a] += g * p.u[a];
            }
        }
        if let Some(prior) = &self.prior {
            let (pe, pf) = prior.energy_forces(coords)?;
            energy += pe;
            for (fi, pi) in forces.iter_mut().zip(pf) {
                for a in 0..3 {
                    fi[a] += pi[a];
                }
            }
        }
        if forces.iter().flatten().any(|f| !f.is_finite()) {
            return Err(Error::NonFinite {
                op: "cg_forces",
                detail: Some("assembled forces".into()),
            });
        }
        Ok((energy, forces))
    }
}

/// Network energy recomputed with plain nested loops straight from the
/// documented layout — no tape, no shared code paths beyond the RBF spec.
/// Kept outside `#[cfg(test)]` so integration tests can cross-check too.
pub fn reference_network_energy(model: &CgModel, coords: &[Vec3], types: &[usize]) -> f64 {
    let h = &model.hyper;
    let layout = ThetaLayout::of(h);
    let (f, g, hid) = (h.n_features, h.n_rbf, h.readout_hidden());
    let th = &model.theta;
    let spec = h.rbf_spec();
    let n = coords.len();

    let matvec = |w: &[f64], x: &[f64], b: &[f64]| -> Vec<f64> {
        let rows = b.len();
        let cols = x.len();
        (0..rows)
            .map(|i| {
                let mut acc = b[i];
                for k in 0..cols {
                    acc += w[i * cols + k] * x[k];
                }
                acc
            })
            .collect()
    };
    let ssp = |v: Vec<f64>| -> Vec<f64> {
        v.into_iter()
            .map(|x| x.max(0.0) + (-x.abs()).exp().ln_1p() - std::f64::consts::LN_2)
            .collect()
    };

    let mut x: Vec<Vec<f64>> = types
        .iter()
        .map(|&t| th[layout.emb + t * f..layout.emb + (t + 1) * f].to_vec())
        .collect();

    for b in &layout.blocks {
        let w_in = &th[b.w_in..b.w_in + f * f];
        let b_in = &th[b.b_in..b.b_in + f];
        let w_f1 = &th[b.w_f1..b.w_f1 + f * g];
        let b_f1 = &th[b.b_f1..b.b_f1 + f];
        let w_f2 = &th[b.w_f2..b.w_f2 + f * f];
        let b_f2 = &th[b.b_f2..b.b_f2 + f];
        let w_out = &th[b.w_out..b.w_out + f * f];
        let b_out = &th[b.b_out..b.b_out + f];

        let hproj: Vec<Vec<f64>> = x.iter().map(|xi| matvec(w_in, xi, b_in)).collect();
        let mut msg = vec![vec![0.0; f]; n];
        let mut seen = vec![false; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = vsub(coords[i], coords[j]);
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if r >= h.r_cut {
                    continue;
                }
                let e = spec.expand(r);
                let filt = matvec(w_f2, &ssp(matvec(w_f1, &e, b_f1)), b_f2);
                for k in 0..f {
                    msg[i][k] += hproj[j][k] * filt[k];
                    msg[j][k] += hproj[i][k] * filt[k];
                }
                seen[i] = true;
                seen[j] = true;
            }
        }
        for i in 0..n {
            if !seen[i] {
                continue;
            }
            let upd = matvec(w_out, &ssp(msg[i].clone()), b_out);
            for k in 0..f {
                x[i][k] += upd[k];
            }
        }
    }

    let w_r1 = &th[layout.w_r1..layout.w_r1 + hid * f];
    let b_r1 = &th[layout.b_r1..layout.b_r1 + hid];
    let w_r2 = &th[layout.w_r2..layout.w_r2 + hid];
    let b_r2 = &th[layout.b_r2..layout.b_r2 + 1];
    let mut u = 0.0;
    for xi in &x {
        let hdn = ssp(matvec(w_r1, xi, b_r1));
        u += matvec(w_r2, &hdn, b_r2)[0];
    }
    u
}

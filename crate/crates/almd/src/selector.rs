//! Selection of simulated CG frames for oracle labeling: each frame is
//! scored by its nearest-neighbor Kabsch RMSD to the training set, and the
//! least-covered frames win.
//!
//! Frames whose nearest training neighbor is farther than `rmsd_cutoff`
//! are excluded — far-out geometry usually means the model extrapolated
//! into junk, not that it found new physics. Anomaly-flagged frames are
//! excluded unconditionally. An optional lower bound can additionally
//! drop frames that are already well covered.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgsim::SimTrajectory;
use crate::error::{Error, Result};
use crate::mathcore::geometry::rmsd_after_alignment;
use crate::mathcore::stats::{histogram, Histogram};
use crate::system::{CgFrame, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Frames to select per round.
    pub k: usize,
    /// Upper bound on nearest-training RMSD (nm); farther frames are
    /// treated as untrustworthy and excluded.
    pub rmsd_cutoff: f64,
    /// Optional novelty floor (nm): frames closer than this to the
    /// training set are skipped as already covered.
    pub rmsd_floor: f64,
    /// Cap on training frames scanned per query; `None` scans all.
    pub training_subsample: Option<usize>,
    pub rng_seed: u64,
    /// Bin count for the report histogram.
    pub histogram_bins: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            k: 16,
            rmsd_cutoff: 0.8,
            rmsd_floor: 0.0,
            training_subsample: Some(512),
            rng_seed: 0,
            histogram_bins: 50,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("selection k must be at least 1".into()));
        }
        if !(self.rmsd_cutoff > 0.0 && self.rmsd_cutoff.is_finite()) {
            return Err(Error::Config(format!(
                "rmsd cutoff must be positive, got {}",
                self.rmsd_cutoff
            )));
        }
        if !(self.rmsd_floor >= 0.0) || self.rmsd_floor >= self.rmsd_cutoff {
            return Err(Error::Config(format!(
                "rmsd floor {} must sit in [0, cutoff)",
                self.rmsd_floor
            )));
        }
        if self.histogram_bins == 0 {
            return Err(Error::NoBins);
        }
        Ok(())
    }
}

/// Uniform seeded draw of training-frame indices; all of them when the
/// subsample is `None` or not smaller than the set.
fn subsample_indices(n: usize, subsample: Option<usize>, seed: u64) -> Vec<usize> {
    match subsample {
        Some(s) if s < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            idx.truncate(s);
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    }
}

/// Smallest Kabsch-aligned RMSD from `frame` to the (sub)sampled training
/// set. Deterministic for a fixed seed.
pub fn min_rmsd_to_set(
    frame: &CgFrame,
    training: &Dataset,
    subsample: Option<usize>,
    rng_seed: u64,
) -> Result<f64> {
    if training.is_empty() {
        return Err(Error::EmptySample { op: "min_rmsd_to_set" });
    }
    let idx = subsample_indices(training.len(), subsample, rng_seed);
    let mut best = f64::INFINITY;
    for i in idx {
        let r = rmsd_after_alignment(&frame.coords, &training.frames()[i].coords)?;
        if r < best {
            best = r;
        }
    }
    Ok(best)
}

/// Why a frame was not a selection candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exclusion {
    Anomalous,
    AboveCutoff,
    BelowFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFrame {
    /// Index into the simulated trajectory's saved frames.
    pub frame_index: usize,
    pub time: f64,
    pub min_rmsd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Nearest-training RMSD of every frame, by frame index.
    pub min_rmsds: Vec<f64>,
    /// Distribution of those distances over [0, cutoff·1.5].
    pub rmsd_histogram: Histogram,
    pub n_frames: usize,
    pub n_candidates: usize,
    pub n_excluded_anomalous: usize,
    pub n_excluded_above_cutoff: usize,
    pub n_excluded_below_floor: usize,
    pub selected: Vec<SelectedFrame>,
}

/// Selection result: either the chosen frames or an explicit empty
/// outcome (every frame filtered). Both carry the full report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SelectionOutcome {
    Selected(SelectionReport),
    /// All frames were anomalous or outside the RMSD bounds.
    NothingToSelect(SelectionReport),
}

impl SelectionOutcome {
    pub fn report(&self) -> &SelectionReport {
        match self {
            SelectionOutcome::Selected(r) | SelectionOutcome::NothingToSelect(r) => r,
        }
    }

    pub fn selected(&self) -> &[SelectedFrame] {
        &self.report().selected
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, SelectionOutcome::NothingToSelect(_))
    }
}

/// Rank the trajectory's frames by descending nearest-training RMSD and
/// take the top k among candidates (non-anomalous, floor < d ≤ cutoff).
/// Ties go to the earlier frame time.
pub fn select_frames(
    sim: &SimTrajectory,
    training: &Dataset,
    cfg: &SelectionConfig,
) -> Result<SelectionOutcome> {
    cfg.validate()?;
    if sim.frames.is_empty() {
        return Err(Error::EmptySample { op: "select_frames" });
    }
    if training.is_empty() {
        return Err(Error::EmptySample { op: "select_frames" });
    }
    debug_assert_eq!(sim.frames.len(), sim.anomalous.len());

    let idx = subsample_indices(training.len(), cfg.training_subsample, cfg.rng_seed);
    let pool: Vec<&CgFrame> = idx.iter().map(|&i| &training.frames()[i]).collect();

    // Parallel over frames; the collect keeps frame order, so the
    // reduction below is deterministic.
    let min_rmsds: Vec<f64> = sim
        .frames
        .par_iter()
        .map(|f| {
            let mut best = f64::INFINITY;
            for t in &pool {
                let r = rmsd_after_alignment(&f.coords, &t.coords)?;
                if r < best {
                    best = r;
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;

    let mut n_anom = 0;
    let mut n_above = 0;
    let mut n_below = 0;
    let mut candidates: Vec<usize> = Vec::new();
    for (i, &d) in min_rmsds.iter().enumerate() {
        if sim.anomalous[i] {
            n_anom += 1;
        } else if d > cfg.rmsd_cutoff {
            n_above += 1;
        } else if d < cfg.rmsd_floor {
            n_below += 1;
        } else {
            candidates.push(i);
        }
    }

    // Descending distance, earlier time first on ties. Frame index is a
    // final tiebreak so the order is total.
    candidates.sort_by(|&a, &b| {
        min_rmsds[b]
            .partial_cmp(&min_rmsds[a])
            .unwrap()
            .then(sim.frames[a].time.partial_cmp(&sim.frames[b].time).unwrap())
            .then(a.cmp(&b))
    });
    candidates.truncate(cfg.k);

    let selected: Vec<SelectedFrame> = candidates
        .iter()
        .map(|&i| SelectedFrame {
            frame_index: i,
            time: sim.frames[i].time,
            min_rmsd: min_rmsds[i],
        })
        .collect();

    let finite: Vec<f64> = min_rmsds.iter().copied().filter(|d| d.is_finite()).collect();
    let rmsd_histogram = histogram(&finite, 0.0, cfg.rmsd_cutoff * 1.5, cfg.histogram_bins)?;

    let report = SelectionReport {
        n_frames: sim.frames.len(),
        n_candidates: sim.frames.len() - n_anom - n_above - n_below,
        n_excluded_anomalous: n_anom,
        n_excluded_above_cutoff: n_above,
        n_excluded_below_floor: n_below,
        min_rmsds,
        rmsd_histogram,
        selected,
    };
    Ok(if report.selected.is_empty() {
        SelectionOutcome::NothingToSelect(report)
    } else {
        SelectionOutcome::Selected(report)
    })
}

/// Histogram of each frame's Kabsch RMSD to one fixed reference
/// structure (coverage diagnostics, emitted as plot data).
pub fn rmsd_histogram_vs_reference(
    frames: &[CgFrame],
    reference: &CgFrame,
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<(Vec<f64>, Histogram)> {
    let rmsds: Vec<f64> = frames
        .par_iter()
        .map(|f| rmsd_after_alignment(&f.coords, &reference.coords))
        .collect::<Result<_>>()?;
    let h = histogram(&rmsds, lo, hi, bins)?;
    Ok((rmsds, h))
}

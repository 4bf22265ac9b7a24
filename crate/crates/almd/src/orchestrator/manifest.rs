//! Run manifest: the durable record of an active-learning run.
//!
//! Rewritten after every completed round, so a run can resume from the
//! last record. All paths inside are relative to the run directory;
//! two runs with the same config and seeds produce identical manifests
//! once wall-clock times are normalized away.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::W1Row;
use crate::cgsim::SimStatus;
use crate::error::{Error, Result};

/// Wall-clock seconds spent in one stage of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

/// Everything recorded about one completed round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Dataset sizes on entry and exit; equal except when frames landed.
    pub dataset_before: usize,
    pub dataset_after: usize,
    /// Trajectory frame indices sent to the oracle (empty in round 0).
    pub selected_frames: Vec<usize>,
    pub sim_status: SimStatus,
    pub n_sim_frames: usize,
    pub n_anomalous: usize,
    /// W1 rows from the benchmark against the reference.
    pub benchmark: Vec<W1Row>,
    /// Model checkpoint path, relative to the run directory.
    pub checkpoint: String,
    /// CG trajectory path, relative to the run directory.
    pub trajectory: String,
    pub stages: Vec<StageTime>,
}

impl RoundRecord {
    /// W1 value for a named benchmark observable.
    pub fn w1(&self, observable: &str) -> Option<f64> {
        self.benchmark
            .iter()
            .find(|row| row.observable == observable)
            .map(|row| row.w1)
    }

    /// Fraction of saved frames flagged anomalous.
    pub fn anomaly_rate(&self) -> f64 {
        if self.n_sim_frames == 0 {
            0.0
        } else {
            self.n_anomalous as f64 / self.n_sim_frames as f64
        }
    }
}

/// Terminal (or current) state of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LoopStatus {
    /// Rounds still pending; the run can be resumed.
    InProgress,
    Completed,
    /// Selection found no eligible frame; the loop ended early.
    NothingToSelect { round: usize },
    Failed {
        round: usize,
        stage: String,
        message: String,
    },
}

/// RMSD-to-reference histogram comparison between the round-0 model and
/// the last trained model, written alongside a plot CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsdSpread {
    /// CSV path relative to the run directory.
    pub csv: String,
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    /// Non-empty bin span (last occupied − first occupied + 1).
    pub round0_support_bins: usize,
    pub final_support_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Hash of the driving config; guards resumes and dataset reuse.
    pub config_hash: String,
    /// Cached reference trajectory, relative to the run directory.
    pub reference: String,
    pub status: LoopStatus,
    pub rounds: Vec<RoundRecord>,
    /// Present once at least two rounds finished.
    pub rmsd_spread: Option<RmsdSpread>,
}

impl RunManifest {
    pub fn new(config_hash: String) -> Self {
        RunManifest {
            config_hash,
            reference: String::new(),
            status: LoopStatus::InProgress,
            rounds: Vec::new(),
            rmsd_spread: None,
        }
    }

    /// Copy with wall-clock times zeroed, for determinism comparisons.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for round in &mut out.rounds {
            for stage in &mut round.stages {
                stage.seconds = 0.0;
            }
        }
        out
    }

    /// W1 per round for one observable, in round order.
    pub fn w1_by_round(&self, observable: &str) -> Vec<f64> {
        self.rounds
            .iter()
            .filter_map(|r| r.w1(observable))
            .collect()
    }

    /// Structural invariants: contiguous round numbers, a monotone
    /// dataset, and one checkpoint per round.
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| Error::InvalidDataset(format!("manifest: {detail}"));
        let mut prev_after = 0;
        for (i, round) in self.rounds.iter().enumerate() {
            if round.round != i {
                return Err(bad(format!("round {} recorded at position {i}", round.round)));
            }
            if round.dataset_after < round.dataset_before {
                return Err(bad(format!("round {i} shrank the dataset")));
            }
            if i > 0 && round.dataset_before != prev_after {
                return Err(bad(format!(
                    "round {i} started from {} frames but round {} ended with {prev_after}",
                    round.dataset_before,
                    i - 1
                )));
            }
            prev_after = round.dataset_after;
            if round.checkpoint.is_empty() {
                return Err(bad(format!("round {i} has no checkpoint")));
            }
            if self.rounds[..i].iter().any(|r| r.checkpoint == round.checkpoint) {
                return Err(bad(format!("round {i} reuses a checkpoint path")));
            }
            if round.n_anomalous > round.n_sim_frames {
                return Err(bad(format!("round {i} flags more frames than it saved")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Corrupt {
            path: path.display().to_string(),
            detail: format!("manifest serialization: {e}"),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path: path.display().to_string(),
            detail: format!("manifest parse: {e}"),
        })?;
        manifest.validate()?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(round: usize, before: usize, after: usize) -> RoundRecord {
        RoundRecord {
            round,
            dataset_before: before,
            dataset_after: after,
            selected_frames: vec![],
            sim_status: SimStatus::Completed,
            n_sim_frames: 10,
            n_anomalous: 0,
            benchmark: vec![],
            checkpoint: format!("round-{round}/model.ckpt"),
            trajectory: format!("round-{round}/cg.trj"),
            stages: vec![StageTime {
                stage: "train".into(),
                seconds: 1.5,
            }],
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("abc".into());
        m.reference = "reference-0123456789ab.trj".into();
        m.rounds.push(record(0, 0, 100));
        m.rounds.push(record(1, 100, 116));
        m.status = LoopStatus::Completed;
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn normalized_zeroes_only_times() {
        let mut m = RunManifest::new("abc".into());
        m.rounds.push(record(0, 0, 100));
        let n = m.normalized();
        assert_eq!(n.rounds[0].stages[0].seconds, 0.0);
        assert_eq!(n.rounds[0].dataset_after, 100);
        assert_ne!(m, n);
        assert_eq!(n, n.normalized());
    }

    #[test]
    fn validate_rejects_shrinking_dataset() {
        let mut m = RunManifest::new("abc".into());
        m.rounds.push(record(0, 0, 100));
        m.rounds.push(record(1, 100, 90));
        assert!(m.validate().is_err());
    }

    #[test]
    fn validate_rejects_discontinuous_sizes_and_rounds() {
        let mut m = RunManifest::new("abc".into());
        m.rounds.push(record(0, 0, 100));
        m.rounds.push(record(1, 101, 120));
        assert!(m.validate().is_err());

        let mut m = RunManifest::new("abc".into());
        m.rounds.push(record(1, 0, 100));
        assert!(m.validate().is_err());
    }

    #[test]
    fn validate_rejects_duplicate_checkpoints() {
        let mut m = RunManifest::new("abc".into());
        m.rounds.push(record(0, 0, 100));
        let mut dup = record(1, 100, 110);
        dup.checkpoint = "round-0/model.ckpt".into();
        m.rounds.push(dup);
        assert!(m.validate().is_err());
    }

    #[test]
    fn status_serializes_with_kind_tag() {
        let status = LoopStatus::NothingToSelect { round: 3 };
        let json = serde_json::to_string(&status).unwrap();
        assert!(json.contains("nothing-to-select"), "{json}");
        let failed = LoopStatus::Failed {
            round: 2,
            stage: "simulate".into(),
            message: "boom".into(),
        };
        let json = serde_json::to_string(&failed).unwrap();
        assert!(json.contains("\"kind\":\"failed\""), "{json}");
    }
}

//! Loop configuration: a single TOML file with deep-merged defaults.
//!
//! [`DEFAULT_TOML`] carries every default; user files are merged over it
//! key by key, so a config file only states what it changes. Unknown
//! keys are rejected rather than silently ignored.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::BenchConfig;
use crate::bridge::MappingScheme;
use crate::cgnet::{HyperParams, TrainConfig};
use crate::cgsim::SimConfig;
use crate::error::{Error, Result};
use crate::oracle::OracleConfig;
use crate::selector::SelectionConfig;

/// The built-in defaults, verbatim.
pub const DEFAULT_TOML: &str = include_str!("default.toml");

/// Everything one active-learning run needs. Scalar knobs first, then
/// one table per stage (serialization order matters to TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    /// Residues in the toy system; one CG bead each.
    pub n_residues: usize,
    /// Active-learning rounds after the initial model (round 0).
    pub n_rounds: usize,
    /// Master seed; per-stage seeds are derived from it.
    pub global_seed: u64,
    pub mapping: MappingScheme,
    /// Re-initialize the network each round instead of warm-starting.
    pub cold_start: bool,
    /// Relax backmapped structures before the oracle sees them.
    pub backmap_relax: bool,
    /// Run directory; excluded from the config hash so identical runs
    /// in different directories compare equal.
    pub out_dir: String,
    pub model: HyperParams,
    pub initial: OracleConfig,
    pub reference: OracleConfig,
    pub oracle: OracleConfig,
    pub train: TrainConfig,
    pub simulate: SimConfig,
    pub select: SelectionConfig,
    pub bench: BenchConfig,
}

impl Default for LoopConfig {
    fn default() -> Self {
        toml::from_str(DEFAULT_TOML).expect("built-in defaults parse")
    }
}

impl LoopConfig {
    /// Parse a user config, filling everything absent from the defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Value = toml::from_str(text)
            .map_err(|e| Error::Config(format!("config parse: {e}")))?;
        let mut merged: toml::Value =
            toml::from_str(DEFAULT_TOML).expect("built-in defaults parse");
        merge(&mut merged, user);
        let cfg: LoopConfig = merged
            .try_into()
            .map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, `out_dir` blanked so the
    /// same run in a different directory hashes identically.
    pub fn config_hash(&self) -> String {
        let mut canon = self.clone();
        canon.out_dir = String::new();
        let mut hasher = Sha256::new();
        hasher.update(canon.to_toml_string().as_bytes());
        format!("{:x}", hasher.finalize())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_residues < 2 {
            return Err(Error::Config(format!(
                "n_residues must be at least 2, got {}",
                self.n_residues
            )));
        }
        if self.n_rounds == 0 {
            return Err(Error::Config("n_rounds must be at least 1".into()));
        }
        self.model.validate()?;
        self.initial.validate()?;
        self.reference.validate()?;
        self.oracle.validate()?;
        self.train.validate()?;
        self.simulate.validate()?;
        self.select.validate()?;
        self.bench.validate()?;
        for &(i, j) in &self.bench.contact_pairs {
            if i >= self.n_residues || j >= self.n_residues {
                return Err(Error::Config(format!(
                    "bench contact pair ({i}, {j}) out of range for {} beads",
                    self.n_residues
                )));
            }
        }
        Ok(())
    }
}

/// Recursive table merge: `over` wins, missing keys keep the base value.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (key, value) in o {
                match b.get_mut(&key) {
                    Some(slot) => merge(slot, value),
                    None => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let cfg = LoopConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_residues, 10);
        assert_eq!(cfg.n_rounds, 4);
        assert_eq!(cfg.mapping, MappingScheme::CarbonAlpha);
        assert_eq!(cfg.select.k, 16);
        assert_eq!(cfg.initial.n_steps / cfg.initial.save_interval, 100);
        assert_eq!(cfg.bench.contact_pairs, vec![(0, 3), (6, 9)]);
    }

    #[test]
    fn empty_user_config_equals_defaults() {
        let cfg = LoopConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, LoopConfig::default());
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let cfg = LoopConfig::from_toml_str(
            "n_rounds = 2\n[train]\nepochs = 7\n[simulate.thresholds]\nmin_pair_distance = 0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.n_rounds, 2);
        assert_eq!(cfg.train.epochs, 7);
        // Sibling keys of the overridden ones keep their defaults.
        assert_eq!(cfg.train.batch_size, 16);
        assert_eq!(cfg.simulate.thresholds.min_pair_distance, 0.1);
        assert_eq!(cfg.simulate.thresholds.max_displacement, 1.0);
        assert_eq!(cfg.n_residues, 10);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = LoopConfig::from_toml_str("n_round = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)), "got {err:?}");
    }

    #[test]
    fn invalid_value_rejected() {
        let err = LoopConfig::from_toml_str("n_rounds = 0\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = LoopConfig::from_toml_str("[select]\nrmsd_cutoff = -1.0\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn hash_ignores_out_dir_but_not_substance() {
        let a = LoopConfig::default();
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        assert_eq!(a.config_hash(), b.config_hash());
        let mut c = a.clone();
        c.global_seed = 1;
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = LoopConfig::default();
        let text = cfg.to_toml_string();
        let back = LoopConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}

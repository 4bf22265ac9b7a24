//! The growing force-matching training store: CG frames with forces plus
//! per-batch provenance, persisted as a directory of trajectory files under
//! a key-value manifest.

use crate::error::{Error, Result};
use crate::system::frame::CgFrame;
use crate::system::trajectory::{read_trajectory, write_trajectory};
use std::fmt;
use std::path::Path;

const MANIFEST_NAME: &str = "manifest.txt";
const MANIFEST_FORMAT: &str = "almd-dataset";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Frames from the initial (round-0) oracle run.
    Initial,
    /// Frames added by an active-learning round.
    Active,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Initial => "initial",
            Source::Active => "active",
        })
    }
}

impl std::str::FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "initial" => Ok(Source::Initial),
            "active" => Ok(Source::Active),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    /// Active-learning round that produced the batch.
    pub iteration: u32,
    pub source: Source,
}

#[derive(Debug, Clone, Copy)]
struct Batch {
    provenance: Provenance,
    offset: usize,
    len: usize,
}

/// Ordered, append-only collection of CG frames with forces.
#[derive(Debug, Clone)]
pub struct Dataset {
    n_beads: usize,
    frames: Vec<CgFrame>,
    batches: Vec<Batch>,
}

impl Dataset {
    pub fn new(n_beads: usize) -> Self {
        Dataset {
            n_beads,
            frames: Vec::new(),
            batches: Vec::new(),
        }
    }

    pub fn n_beads(&self) -> usize {
        self.n_beads
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[CgFrame] {
        &self.frames
    }

    pub fn n_batches(&self) -> usize {
        self.batches.len()
    }

    /// Provenance of frame `i`.
    pub fn provenance(&self, i: usize) -> Provenance {
        let b = self
            .batches
            .iter()
            .find(|b| i >= b.offset && i < b.offset + b.len)
            .expect("frame index within dataset");
        b.provenance
    }

    /// Append a batch; earlier frames are never touched. Iterations must be
    /// non-decreasing in append order and every frame must carry forces.
    pub fn append_batch(&mut self, frames: Vec<CgFrame>, provenance: Provenance) -> Result<()> {
        if frames.is_empty() {
            return Err(Error::InvalidDataset("empty batch".to_string()));
        }
        if let Some(last) = self.batches.last() {
            if provenance.iteration < last.provenance.iteration {
                return Err(Error::InvalidDataset(format!(
                    "iteration {} appended after iteration {}",
                    provenance.iteration, last.provenance.iteration
                )));
            }
        }
        for (i, f) in frames.iter().enumerate() {
            f.validate(self.n_beads)?;
            if f.forces.is_none() {
                return Err(Error::InvalidDataset(format!(
                    "frame {i} of batch has no forces"
                )));
            }
        }
        self.batches.push(Batch {
            provenance,
            offset: self.frames.len(),
            len: frames.len(),
        });
        self.frames.extend(frames);
        Ok(())
    }

    /// Write the dataset under `dir`: one ALMDTRJ1 file per batch plus a
    /// key-value manifest carrying counts and the configuration hash.
    pub fn save(&self, dir: &Path, config_hash: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let mut manifest = String::new();
        manifest.push_str(&format!("format = {MANIFEST_FORMAT}\n"));
        manifest.push_str(&format!("version = {MANIFEST_VERSION}\n"));
        manifest.push_str(&format!("config_hash = {config_hash}\n"));
        manifest.push_str(&format!("n_beads = {}\n", self.n_beads));
        manifest.push_str(&format!("n_batches = {}\n", self.batches.len()));
        for (idx, b) in self.batches.iter().enumerate() {
            let file = format!("batch_{idx:04}.trj");
            write_trajectory(
                &dir.join(&file),
                &self.frames[b.offset..b.offset + b.len],
            )?;
            manifest.push_str(&format!(
                "batch_{idx:04} = iteration={} source={} frames={} file={}\n",
                b.provenance.iteration, b.provenance.source, b.len, file
            ));
        }
        let manifest_path = dir.join(MANIFEST_NAME);
        std::fs::write(&manifest_path, manifest)
            .map_err(|e| Error::io(manifest_path.display().to_string(), e))
    }

    /// Load a dataset directory; returns the dataset and the stored
    /// configuration hash. Frame order is exactly the order saved.
    pub fn load(dir: &Path) -> Result<(Dataset, String)> {
        let manifest_path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&manifest_path)
            .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
        let corrupt = |detail: String| Error::Corrupt {
            path: manifest_path.display().to_string(),
            detail,
        };

        let mut pairs = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| corrupt(format!("malformed line `{line}`")))?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        let lookup = |key: &str| -> Result<String> {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| corrupt(format!("missing key `{key}`")))
        };

        if lookup("format")? != MANIFEST_FORMAT {
            return Err(Error::BadMagic {
                path: manifest_path.display().to_string(),
                expected: MANIFEST_FORMAT,
            });
        }
        let version: u32 = lookup("version")?
            .parse()
            .map_err(|_| corrupt("unparseable version".to_string()))?;
        if version != MANIFEST_VERSION {
            return Err(Error::UnsupportedVersion {
                path: manifest_path.display().to_string(),
                got: version,
                supported: MANIFEST_VERSION,
            });
        }
        let config_hash = lookup("config_hash")?;
        let n_beads: usize = lookup("n_beads")?
            .parse()
            .map_err(|_| corrupt("unparseable n_beads".to_string()))?;
        let n_batches: usize = lookup("n_batches")?
            .parse()
            .map_err(|_| corrupt("unparseable n_batches".to_string()))?;

        let mut ds = Dataset::new(n_beads);
        for idx in 0..n_batches {
            let entry = lookup(&format!("batch_{idx:04}"))?;
            let mut iteration = None;
            let mut source = None;
            let mut expected_frames = None;
            let mut file = None;
            for field in entry.split_whitespace() {
                let (k, v) = field
                    .split_once('=')
                    .ok_or_else(|| corrupt(format!("malformed batch field `{field}`")))?;
                match k {
                    "iteration" => iteration = v.parse::<u32>().ok(),
                    "source" => source = v.parse::<Source>().ok(),
                    "frames" => expected_frames = v.parse::<usize>().ok(),
                    "file" => file = Some(v.to_string()),
                    other => return Err(corrupt(format!("unknown batch field `{other}`"))),
                }
            }
            let provenance = Provenance {
                iteration: iteration
                    .ok_or_else(|| corrupt(format!("batch {idx} missing iteration")))?,
                source: source.ok_or_else(|| corrupt(format!("batch {idx} missing source")))?,
            };
            let expected =
                expected_frames.ok_or_else(|| corrupt(format!("batch {idx} missing frames")))?;
            let file = file.ok_or_else(|| corrupt(format!("batch {idx} missing file")))?;
            let frames = read_trajectory(&dir.join(&file))?;
            if frames.len() != expected {
                return Err(corrupt(format!(
                    "batch {idx} holds {} frames, manifest says {expected}",
                    frames.len()
                )));
            }
            ds.append_batch(frames, provenance)?;
        }
        Ok((ds, config_hash))
    }
}

//! ALMDTRJ1 binary trajectory files.
//!
//! Layout (all little-endian):
//! ```text
//! magic   8 bytes  "ALMDTRJ1"
//! version u32      1
//! n_sites u32
//! n_frames u64
//! has_forces u8    0 or 1
//! per frame: time f64, coords 3·n_sites f64, [forces 3·n_sites f64]
//! ```
//! Round-trips are bit-exact; nothing is rescaled or validated beyond the
//! structural fields. The extended-XYZ writer is a debugging aid only.

use crate::error::{Error, Result};
use crate::system::frame::Frame;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const TRJ_MAGIC: &[u8; 8] = b"ALMDTRJ1";
pub const TRJ_VERSION: u32 = 1;

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

pub fn write_trajectory(path: &Path, frames: &[Frame]) -> Result<()> {
    let n_sites = frames.first().map_or(0, |f| f.n_sites());
    let has_forces = frames.first().is_some_and(|f| f.forces.is_some());
    for (i, f) in frames.iter().enumerate() {
        if f.n_sites() != n_sites {
            return Err(Error::InvalidDataset(format!(
                "frame {i} has {} sites, first frame has {n_sites}",
                f.n_sites()
            )));
        }
        if f.forces.is_some() != has_forces {
            return Err(Error::InvalidDataset(format!(
                "frame {i} disagrees with the first frame on force presence"
            )));
        }
        if let Some(forces) = &f.forces {
            if forces.len() != n_sites {
                return Err(Error::FrameSizeMismatch {
                    got: forces.len(),
                    expected: n_sites,
                });
            }
        }
    }

    let file = File::create(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path_str(path), e);
    w.write_all(TRJ_MAGIC).map_err(io_err)?;
    w.write_all(&TRJ_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(n_sites as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(frames.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    w.write_all(&[u8::from(has_forces)]).map_err(io_err)?;
    for f in frames {
        w.write_all(&f.time.to_le_bytes()).map_err(io_err)?;
        for c in &f.coords {
            for x in c {
                w.write_all(&x.to_le_bytes()).map_err(io_err)?;
            }
        }
        if let Some(forces) = &f.forces {
            for c in forces {
                for x in c {
                    w.write_all(&x.to_le_bytes()).map_err(io_err)?;
                }
            }
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<Frame>> {
    let file = File::open(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut r = BufReader::new(file);

    let mut read_exact = |buf: &mut [u8], what: &str| -> Result<()> {
        r.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Truncated {
                    path: path_str(path),
                    detail: format!("ran out of bytes reading {what}"),
                }
            } else {
                Error::io(path_str(path), e)
            }
        })
    };

    let mut magic = [0u8; 8];
    read_exact(&mut magic, "magic")?;
    if &magic != TRJ_MAGIC {
        return Err(Error::BadMagic {
            path: path_str(path),
            expected: "ALMDTRJ1",
        });
    }
    let mut b4 = [0u8; 4];
    read_exact(&mut b4, "version")?;
    let version = u32::from_le_bytes(b4);
    if version != TRJ_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path_str(path),
            got: version,
            supported: TRJ_VERSION,
        });
    }
    read_exact(&mut b4, "site count")?;
    let n_sites = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    read_exact(&mut b8, "frame count")?;
    let n_frames = u64::from_le_bytes(b8) as usize;
    let mut b1 = [0u8; 1];
    read_exact(&mut b1, "force flag")?;
    let has_forces = match b1[0] {
        0 => false,
        1 => true,
        other => {
            return Err(Error::Corrupt {
                path: path_str(path),
                detail: format!("force flag must be 0 or 1, got {other}"),
            })
        }
    };

    let mut frames = Vec::with_capacity(n_frames);
    for idx in 0..n_frames {
        read_exact(&mut b8, &format!("time of frame {idx}"))?;
        let time = f64::from_le_bytes(b8);
        let read_vecs = |what: &str,
                             read_exact: &mut dyn FnMut(&mut [u8], &str) -> Result<()>|
         -> Result<Vec<[f64; 3]>> {
            let mut out = Vec::with_capacity(n_sites);
            let mut buf = [0u8; 8];
            for _ in 0..n_sites {
                let mut v = [0.0; 3];
                for x in &mut v {
                    read_exact(&mut buf, what)?;
                    *x = f64::from_le_bytes(buf);
                }
                out.push(v);
            }
            Ok(out)
        };
        let coords = read_vecs(&format!("coords of frame {idx}"), &mut read_exact)?;
        let forces = if has_forces {
            Some(read_vecs(&format!("forces of frame {idx}"), &mut read_exact)?)
        } else {
            None
        };
        frames.push(Frame {
            time,
            coords,
            forces,
        });
    }
    Ok(frames)
}

/// Extended-XYZ-style text dump for eyeballing trajectories. Not a
/// round-trip format.
pub fn write_xyz_debug(path: &Path, frames: &[Frame], names: Option<&[String]>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path_str(path), e);
    for f in frames {
        writeln!(w, "{}", f.n_sites()).map_err(io_err)?;
        writeln!(w, "time={} ps", f.time).map_err(io_err)?;
        for (i, c) in f.coords.iter().enumerate() {
            let name = names
                .and_then(|ns| ns.get(i).map(String::as_str))
                .unwrap_or("S");
            writeln!(w, "{name} {:.6} {:.6} {:.6}", c[0], c[1], c[2]).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_frames(n_frames: usize, n_sites: usize, forces: bool, seed: u64) -> Vec<Frame> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_frames)
            .map(|i| {
                let coords = (0..n_sites)
                    .map(|_| {
                        [
                            rng.gen_range(-10.0..10.0),
                            rng.gen_range(-10.0..10.0),
                            rng.gen_range(-10.0..10.0),
                        ]
                    })
                    .collect();
                let f = forces.then(|| {
                    (0..n_sites)
                        .map(|_| {
                            [
                                rng.gen_range(-100.0..100.0),
                                rng.gen_range(-100.0..100.0),
                                rng.gen_range(-100.0..100.0),
                            ]
                        })
                        .collect()
                });
                Frame {
                    time: i as f64 * 0.002,
                    coords,
                    forces: f,
                }
            })
            .collect()
    }

    fn bits_equal(a: &[Frame], b: &[Frame]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b.iter()).all(|(x, y)| {
                x.time.to_bits() == y.time.to_bits()
                    && x.coords.len() == y.coords.len()
                    && x.coords
                        .iter()
                        .flatten()
                        .zip(y.coords.iter().flatten())
                        .all(|(p, q)| p.to_bits() == q.to_bits())
                    && match (&x.forces, &y.forces) {
                        (None, None) => true,
                        (Some(fx), Some(fy)) => fx
                            .iter()
                            .flatten()
                            .zip(fy.iter().flatten())
                            .all(|(p, q)| p.to_bits() == q.to_bits()),
                        _ => false,
                    }
            })
    }

    #[test]
    fn round_trip_is_bitwise_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trj");
        let frames = random_frames(100, 7, true, 42);
        write_trajectory(&path, &frames).unwrap();
        let back = read_trajectory(&path).unwrap();
        assert!(bits_equal(&frames, &back));
    }

    #[test]
    fn round_trip_without_forces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trj");
        let frames = random_frames(5, 3, false, 1);
        write_trajectory(&path, &frames).unwrap();
        let back = read_trajectory(&path).unwrap();
        assert!(bits_equal(&frames, &back));
    }

    #[test]
    fn empty_trajectory_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.trj");
        write_trajectory(&path, &[]).unwrap();
        assert!(read_trajectory(&path).unwrap().is_empty());
    }

    #[test]
    fn corrupt_magic_is_a_clean_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trj");
        write_trajectory(&path, &random_frames(2, 2, true, 3)).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xFF;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_trajectory(&path),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn unsupported_version_is_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trj");
        write_trajectory(&path, &random_frames(1, 2, false, 4)).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 9; // version field
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_trajectory(&path),
            Err(Error::UnsupportedVersion { got: 9, .. })
        ));
    }

    #[test]
    fn truncation_is_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trj");
        write_trajectory(&path, &random_frames(3, 4, true, 5)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 11]).unwrap();
        assert!(matches!(
            read_trajectory(&path),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn bad_force_flag_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trj");
        write_trajectory(&path, &random_frames(1, 1, false, 6)).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[24] = 7; // has_forces byte: 8 magic + 4 version + 4 sites + 8 frames
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_trajectory(&path), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn heterogeneous_frames_are_rejected_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trj");
        let mut frames = random_frames(2, 3, true, 7);
        frames[1].coords.pop();
        frames[1].forces.as_mut().unwrap().pop();
        assert!(write_trajectory(&path, &frames).is_err());

        let mut frames = random_frames(2, 3, true, 8);
        frames[1].forces = None;
        assert!(write_trajectory(&path, &frames).is_err());
    }

    #[test]
    fn xyz_debug_writes_expected_line_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.xyz");
        let frames = random_frames(4, 3, false, 9);
        write_xyz_debug(&path, &frames, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4 * (2 + 3));
    }
}

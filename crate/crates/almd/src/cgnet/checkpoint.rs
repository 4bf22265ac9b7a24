//! ALMDNET1 binary model checkpoints.
//!
//! Layout (all little-endian):
//! ```text
//! magic      8 bytes  "ALMDNET1"
//! version    u32      1
//! n_types    u32
//! n_blocks   u32
//! n_features u32
//! n_rbf      u32
//! r_cut      f64
//! has_prior  u8       0 or 1
//! k_bond     f64      (zero when has_prior = 0)
//! r0         f64
//! c12        f64
//! theta_len  u64      must equal the layout's parameter count
//! theta      f64 × theta_len, in the documented flat layout order
//! ```
//! Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cgnet::model::{CgModel, HyperParams};
use crate::cgnet::prior::Prior;
use crate::error::{Error, Result};

pub const NET_MAGIC: &[u8; 8] = b"ALMDNET1";
pub const NET_VERSION: u32 = 1;

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

pub fn save_checkpoint(path: &Path, model: &CgModel) -> Result<()> {
    let expected = model.hyper.n_params();
    if model.theta.len() != expected {
        return Err(Error::Corrupt {
            path: path_str(path),
            detail: format!(
                "model has {} parameters but the layout wants {expected}",
                model.theta.len()
            ),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path_str(path), e);
    w.write_all(NET_MAGIC).map_err(io_err)?;
    w.write_all(&NET_VERSION.to_le_bytes()).map_err(io_err)?;
    for v in [
        model.hyper.n_types,
        model.hyper.n_blocks,
        model.hyper.n_features,
        model.hyper.n_rbf,
    ] {
        w.write_all(&(v as u32).to_le_bytes()).map_err(io_err)?;
    }
    w.write_all(&model.hyper.r_cut.to_le_bytes()).map_err(io_err)?;
    let (flag, k_bond, r0, c12) = match &model.prior {
        Some(p) => (1u8, p.k_bond, p.r0, p.c12),
        None => (0u8, 0.0, 0.0, 0.0),
    };
    w.write_all(&[flag]).map_err(io_err)?;
    for v in [k_bond, r0, c12] {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    w.write_all(&(model.theta.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    for v in &model.theta {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn load_checkpoint(path: &Path) -> Result<CgModel> {
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
    if &magic != NET_MAGIC {
        return Err(Error::BadMagic {
            path: path_str(path),
            expected: "ALMDNET1",
        });
    }
    let mut b4 = [0u8; 4];
    read_exact(&mut b4, "version")?;
    let version = u32::from_le_bytes(b4);
    if version != NET_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path_str(path),
            got: version,
            supported: NET_VERSION,
        });
    }
    let mut dims = [0usize; 4];
    for (d, what) in dims
        .iter_mut()
        .zip(["type count", "block count", "feature width", "rbf count"])
    {
        read_exact(&mut b4, what)?;
        *d = u32::from_le_bytes(b4) as usize;
    }
    let mut b8 = [0u8; 8];
    read_exact(&mut b8, "cutoff")?;
    let r_cut = f64::from_le_bytes(b8);
    let hyper = HyperParams {
        n_types: dims[0],
        n_blocks: dims[1],
        n_features: dims[2],
        n_rbf: dims[3],
        r_cut,
    };
    hyper.validate().map_err(|e| Error::Corrupt {
        path: path_str(path),
        detail: format!("bad hyperparameters: {e}"),
    })?;

    let mut b1 = [0u8; 1];
    read_exact(&mut b1, "prior flag")?;
    let has_prior = match b1[0] {
        0 => false,
        1 => true,
        other => {
            return Err(Error::Corrupt {
                path: path_str(path),
                detail: format!("prior flag must be 0 or 1, got {other}"),
            })
        }
    };
    let mut pv = [0.0; 3];
    for (v, what) in pv.iter_mut().zip(["bond stiffness", "rest length", "c12"]) {
        read_exact(&mut b8, what)?;
        *v = f64::from_le_bytes(b8);
    }
    let prior = has_prior.then_some(Prior {
        k_bond: pv[0],
        r0: pv[1],
        c12: pv[2],
    });

    read_exact(&mut b8, "parameter count")?;
    let theta_len = u64::from_le_bytes(b8) as usize;
    if theta_len != hyper.n_params() {
        return Err(Error::Corrupt {
            path: path_str(path),
            detail: format!(
                "parameter count {theta_len} does not match the layout ({})",
                hyper.n_params()
            ),
        });
    }
    let mut theta = Vec::with_capacity(theta_len);
    for i in 0..theta_len {
        read_exact(&mut b8, &format!("parameter {i}"))?;
        theta.push(f64::from_le_bytes(b8));
    }
    // Trailing garbage means the file is not what it claims to be.
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::Corrupt {
                path: path_str(path),
                detail: "trailing bytes after the parameter payload".into(),
            })
        }
        Err(e) => return Err(Error::io(path_str(path), e)),
    }

    Ok(CgModel {
        hyper,
        theta,
        prior,
    })
}

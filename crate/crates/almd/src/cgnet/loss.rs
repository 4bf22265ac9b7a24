//! Force-matching loss: mean over frames of the squared force residual,
//! normalized per frame by 3M so systems of different size are comparable.
//!
//! L = (1/T) Σ_t (1/(3·M_t)) ‖F_model(R_t) − F_target,t‖²_F

use crate::cgnet::model::CgModel;
use crate::error::{Error, Result};
use crate::mathcore::geometry::Vec3;
use crate::mathcore::sum::pairwise_sum;
use crate::system::CgFrame;

/// Loss from already-computed forces. Deterministic: per-frame residuals
/// and the over-frames mean both use pairwise summation.
pub fn force_mse(pred: &[Vec<Vec3>], target: &[Vec<Vec3>]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptySample { op: "force_mse" });
    }
    let mut per_frame = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(target.iter()) {
        if p.len() != t.len() {
            return Err(Error::LengthMismatch {
                left: p.len(),
                right: t.len(),
            });
        }
        if p.is_empty() {
            return Err(Error::EmptySample { op: "force_mse" });
        }
        let sq: Vec<f64> = p
            .iter()
            .zip(t.iter())
            .flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]) * (a[k] - b[k])))
            .collect();
        per_frame.push(pairwise_sum(&sq) / (3.0 * p.len() as f64));
    }
    Ok(pairwise_sum(&per_frame) / per_frame.len() as f64)
}

/// Force-matching loss of a model against frames carrying target forces
/// (projected all-atom forces in the usual pipeline).
pub fn fm_loss(model: &CgModel, frames: &[CgFrame], types: &[usize]) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::EmptySample { op: "fm_loss" });
    }
    let mut pred = Vec::with_capacity(frames.len());
    let mut tgt = Vec::with_capacity(frames.len());
    for frame in frames {
        let target = frame.forces.as_ref().ok_or_else(|| {
            Error::InvalidDataset("force matching needs frames with forces".into())
        })?;
        let (_, forces) = model.cg_forces(&frame.coords, types)?;
        pred.push(forces);
        tgt.push(target.clone());
    }
    force_mse(&pred, &tgt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgnet::model::HyperParams;
    use crate::system::Frame;

    #[test]
    fn single_bead_unit_residual_gives_one_third() {
        // One frame, one bead, residual (1,0,0): L = 1²/(3·1) = 1/3.
        let pred = vec![vec![[1.0, 0.0, 0.0]]];
        let tgt = vec![vec![[0.0, 0.0, 0.0]]];
        let l = force_mse(&pred, &tgt).unwrap();
        assert_eq!(l, 1.0 / 3.0);
    }

    #[test]
    fn duplicating_a_frame_leaves_the_loss_unchanged() {
        let pred1 = vec![vec![[1.0, -2.0, 0.5], [0.3, 0.0, -1.0]]];
        let tgt1 = vec![vec![[0.9, -1.5, 0.0], [0.0, 0.2, -1.1]]];
        let l1 = force_mse(&pred1, &tgt1).unwrap();
        let pred2 = vec![pred1[0].clone(), pred1[0].clone()];
        let tgt2 = vec![tgt1[0].clone(), tgt1[0].clone()];
        let l2 = force_mse(&pred2, &tgt2).unwrap();
        assert_eq!(l1, l2);
    }

    #[test]
    fn perfect_predictions_give_zero() {
        let f = vec![vec![[1.0, 2.0, 3.0], [-1.0, 0.0, 4.0]]];
        assert_eq!(force_mse(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn frame_count_normalization() {
        // Two frames with per-frame losses 1/3 and 4/3 average to 5/6.
        let pred = vec![vec![[1.0, 0.0, 0.0]], vec![[2.0, 0.0, 0.0]]];
        let tgt = vec![vec![[0.0; 3]], vec![[0.0; 3]]];
        let l = force_mse(&pred, &tgt).unwrap();
        assert!((l - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let a = vec![vec![[0.0; 3]]];
        let b = vec![vec![[0.0; 3], [0.0; 3]]];
        assert!(force_mse(&a, &b).is_err());
        let empty: Vec<Vec<Vec3>> = Vec::new();
        assert!(force_mse(&empty, &empty).is_err());
    }

    #[test]
    fn model_loss_requires_forces_and_vanishes_on_self_targets() {
        let model = crate::cgnet::model::CgModel::init(HyperParams::preset("small").unwrap(), 3)
            .unwrap();
        let types = vec![0, 0];
        let coords = vec![[0.0, 0.0, 0.0], [0.4, 0.0, 0.0]];
        let bare = Frame::new(0.0, coords.clone());
        assert!(fm_loss(&model, &[bare], &types).is_err());

        let (_, f) = model.cg_forces(&coords, &types).unwrap();
        let frame = Frame::with_forces(0.0, coords, f);
        let l = fm_loss(&model, &[frame], &types).unwrap();
        assert_eq!(l, 0.0);
    }
}

//! Force-matching training loop: Adam on minibatches, seeded shuffling,
//! best-validation parameter selection, and hard divergence detection.
//!
//! Per-frame gradients run through the recorded (differentiable) backward
//! sweep of the energy tape: the loss is built on the model *forces*, so
//! its parameter gradient needs second derivatives of the energy, which is
//! exactly what [`Tape::record_grad`] provides.
//!
//! When a prior is attached, its forces are subtracted from the targets
//! once up front and the network trains on the residual; the prior itself
//! has no trainable parameters.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgnet::model::CgModel;
use crate::cgnet::tape::NodeId;
use crate::error::{Error, Result};
use crate::mathcore::geometry::Vec3;
use crate::system::CgFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Adam first/second moment decay.
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay (applied directly to the parameters).
    pub weight_decay: f64,
    /// Fraction of frames held out for validation, 0 ≤ f < 1.
    pub val_fraction: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-3,
            batch_size: 16,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            val_fraction: 0.2,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = !(self.learning_rate > 0.0 && self.learning_rate.is_finite())
            || self.batch_size == 0
            || self.epochs == 0
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.eps > 0.0)
            || !(self.weight_decay >= 0.0)
            || !(0.0..1.0).contains(&self.val_fraction);
        if bad {
            return Err(Error::Config(format!("invalid training config: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_loss: f64,
}

/// Adam with bias correction and decoupled weight decay. Update size is
/// gradient-scale invariant, so divergence shows up as non-finite values
/// in the loss/gradient rather than runaway steps.
pub(crate) struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            theta[i] -= self.lr * (mh / (vh.sqrt() + self.eps) + self.weight_decay * theta[i]);
        }
    }
}

/// Shuffle 0..t with the given rng; the last floor(frac·t) indices become
/// the validation set (so t = 10, frac = 0.2 splits 8/2).
pub(crate) fn split_indices(
    t: usize,
    frac: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..t).collect();
    idx.shuffle(rng);
    let n_val = (frac * t as f64).floor() as usize;
    let val = idx.split_off(t - n_val);
    (idx, val)
}

/// Loss and parameter gradient for one frame, differentiating through the
/// force computation. `target` is the (prior-adjusted) flat force target.
fn frame_loss_grad(
    model: &CgModel,
    coords: &[Vec3],
    types: &[usize],
    target: &[f64],
    grad: &mut [f64],
) -> Result<f64> {
    let built = model.build_energy_tape(coords, types)?;
    let mut tape = built.tape;
    let m = coords.len();
    let wrt: Vec<NodeId> = built.pairs.iter().map(|p| p.node).collect();
    let gnodes = tape.record_grad(built.u_net, &wrt);

    // F_flat = Σ_p (dU/dr_p) · c_p with constant scatter vectors c_p.
    let mut contribs = Vec::with_capacity(built.pairs.len());
    for (p, g) in built.pairs.iter().zip(gnodes) {
        let Some(g) = g else { continue };
        let mut c = vec![0.0; 3 * m];
        for a in 0..3 {
            c[3 * p.i + a] = -p.u[a];
            c[3 * p.j + a] = p.u[a];
        }
        let cn = tape.constant(c);
        contribs.push(tape.smul(g, cn));
    }
    let f_flat = if contribs.is_empty() {
        tape.constant(vec![0.0; 3 * m])
    } else {
        tape.add_n(contribs)
    };
    let tn = tape.constant(target.to_vec());
    let d = tape.sub(f_flat, tn);
    let sq = tape.dot(d, d);
    let loss = tape.scale(sq, 1.0 / (3.0 * m as f64));
    tape.check_finite("train")?;
    tape.grad_params(loss, grad);
    Ok(tape.scalar(loss))
}

/// Network forces only (no prior), for validation against adjusted targets.
fn net_forces(model: &CgModel, coords: &[Vec3], types: &[usize]) -> Result<Vec<Vec3>> {
    let built = model.build_energy_tape(coords, types)?;
    let adj = built.tape.backward(built.u_net);
    let mut forces = vec![[0.0; 3]; coords.len()];
    for p in &built.pairs {
        if adj[p.node].is_empty() {
            continue;
        }
        let g = adj[p.node][0];
        for a in 0..3 {
            forces[p.i][a] -= g * p.u[a];
            forces[p.j][a] += g * p.u[a];
        }
    }
    Ok(forces)
}

fn mean_loss_over(
    model: &CgModel,
    frames: &[CgFrame],
    types: &[usize],
    targets: &[Vec<f64>],
    idx: &[usize],
) -> Result<f64> {
    let mut acc = 0.0;
    for &t in idx {
        let f = net_forces(model, &frames[t].coords, types)?;
        let m = f.len();
        let mut ss = 0.0;
        for (i, fi) in f.iter().enumerate() {
            for a in 0..3 {
                let d = fi[a] - targets[t][3 * i + a];
                ss += d * d;
            }
        }
        acc += ss / (3.0 * m as f64);
    }
    Ok(acc / idx.len() as f64)
}

/// Train `model` in place by force matching; returns the per-epoch loss
/// history. The model is left holding the parameters with the best
/// validation loss (best training loss when `val_fraction` rounds to zero
/// frames). Bitwise deterministic for a fixed config and input.
pub fn train(
    model: &mut CgModel,
    frames: &[CgFrame],
    types: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::EmptySample { op: "train" });
    }
    let m = types.len();
    for frame in frames {
        if frame.n_sites() != m {
            return Err(Error::FrameSizeMismatch {
                got: frame.n_sites(),
                expected: m,
            });
        }
        if frame.forces.is_none() {
            return Err(Error::InvalidDataset(
                "training frames must carry target forces".into(),
            ));
        }
    }

    // Prior-adjusted flat targets, computed once.
    let targets: Vec<Vec<f64>> = frames
        .iter()
        .map(|frame| -> Result<Vec<f64>> {
            let raw = frame.forces.as_ref().unwrap();
            let mut flat: Vec<f64> = raw.iter().flatten().copied().collect();
            if let Some(prior) = &model.prior {
                let (_, pf) = prior.energy_forces(&frame.coords)?;
                for (i, p) in pf.iter().enumerate() {
                    for a in 0..3 {
                        flat[3 * i + a] -= p[a];
                    }
                }
            }
            if flat.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    op: "train",
                    detail: Some("force targets".into()),
                });
            }
            Ok(flat)
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let (mut train_idx, val_idx) = split_indices(frames.len(), cfg.val_fraction, &mut rng);
    if train_idx.is_empty() {
        return Err(Error::Config(
            "validation split leaves no training frames".into(),
        ));
    }

    let n_params = model.theta.len();
    let mut adam = Adam::new(n_params, cfg);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_theta = model.theta.clone();

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch, chunk) in train_idx.chunks(cfg.batch_size).enumerate() {
            let diverged = |_| Error::TrainingDiverged { epoch, batch };
            // Per-frame losses and gradients in parallel; the reduction
            // below walks results in chunk order, so it is deterministic.
            let results: Vec<Result<(f64, Vec<f64>)>> = chunk
                .par_iter()
                .map(|&t| {
                    let mut grad = vec![0.0; n_params];
                    let loss =
                        frame_loss_grad(model, &frames[t].coords, types, &targets[t], &mut grad)?;
                    Ok((loss, grad))
                })
                .collect();
            let mut batch_grad = vec![0.0; n_params];
            let mut batch_loss = 0.0;
            for res in results {
                let (loss, grad) = res.map_err(|e| match e {
                    Error::NonFinite { .. } => Error::TrainingDiverged { epoch, batch },
                    other => other,
                })?;
                batch_loss += loss;
                for (bg, g) in batch_grad.iter_mut().zip(&grad) {
                    *bg += g;
                }
            }
            let inv = 1.0 / chunk.len() as f64;
            batch_loss *= inv;
            for g in &mut batch_grad {
                *g *= inv;
            }
            if !batch_loss.is_finite() || batch_grad.iter().any(|g| !g.is_finite()) {
                return Err(diverged(()));
            }
            loss_sum += batch_loss * chunk.len() as f64;
            adam.step(&mut model.theta, &batch_grad);
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        let val_loss = if val_idx.is_empty() {
            train_loss
        } else {
            mean_loss_over(model, frames, types, &targets, &val_idx).map_err(|e| match e {
                Error::NonFinite { .. } => Error::TrainingDiverged {
                    epoch,
                    batch: usize::MAX,
                },
                other => other,
            })?
        };
        if !val_loss.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                batch: usize::MAX,
            });
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            best_epoch = epoch;
            best_theta.copy_from_slice(&model.theta);
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
    }

    model.theta = best_theta;
    Ok(TrainReport {
        history,
        best_epoch,
        best_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgnet::model::HyperParams;
    use crate::mathcore::geometry::{vscale, vsub};
    use crate::system::Frame;

    /// Dimer frames with forces from a harmonic pair potential
    /// V = ½k(r−r0)², the simplest learnable force field.
    fn dimer_frames(k: f64, r0: f64, rs: &[f64]) -> Vec<Frame> {
        rs.iter()
            .enumerate()
            .map(|(t, &r)| {
                let coords = vec![[0.0, 0.0, 0.0], [r, 0.0, 0.0]];
                let u = vscale(vsub(coords[0], coords[1]), 1.0 / r);
                let f0 = vscale(u, -k * (r - r0));
                let f1 = vscale(u, k * (r - r0));
                Frame::with_forces(t as f64, coords, vec![f0, f1])
            })
            .collect()
    }

    fn dimer_grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.30 + 0.25 * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn split_gives_floor_of_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (train, val) = split_indices(10, 0.2, &mut rng);
        assert_eq!(train.len(), 8);
        assert_eq!(val.len(), 2);
        let mut all: Vec<usize> = train.iter().chain(val.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());

        let (train, val) = split_indices(7, 0.0, &mut rng);
        assert_eq!((train.len(), val.len()), (7, 0));
    }

    #[test]
    fn adam_decreases_a_quadratic_monotonically() {
        // f(θ) = ½ Σ c_i θ_i² with a small learning rate: the first ten
        // steps must strictly decrease f.
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        let c = [1.0, 4.0, 0.5, 9.0];
        let mut theta = vec![1.0, -2.0, 0.7, 1.5];
        let mut adam = Adam::new(theta.len(), &cfg);
        let f = |th: &[f64]| -> f64 { th.iter().zip(c).map(|(x, ci)| 0.5 * ci * x * x).sum() };
        let mut prev = f(&theta);
        for _ in 0..10 {
            let grad: Vec<f64> = theta.iter().zip(c).map(|(x, ci)| ci * x).collect();
            adam.step(&mut theta, &grad);
            let now = f(&theta);
            assert!(now < prev, "quadratic loss rose: {prev} -> {now}");
            prev = now;
        }
    }

    #[test]
    fn dimer_training_reaches_a_tenth_of_the_initial_loss() {
        let frames = dimer_frames(100.0, 0.4, &dimer_grid(20));
        let types = vec![0, 0];
        let mut model = CgModel::init(HyperParams::preset("small").unwrap(), 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 4,
            epochs: 200,
            rng_seed: 7,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &frames, &types, &cfg).unwrap();
        let first = report.history.first().unwrap().train_loss;
        let last = report.history.last().unwrap().train_loss;
        assert!(
            last <= 0.1 * first,
            "train loss {last} did not reach a tenth of {first} within {} epochs",
            cfg.epochs
        );
        assert_eq!(report.history.len(), cfg.epochs);
    }

    #[test]
    fn best_validation_parameters_are_returned() {
        let frames = dimer_frames(100.0, 0.4, &dimer_grid(10));
        let types = vec![0, 0];
        let mut model = CgModel::init(HyperParams::preset("small").unwrap(), 2).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 4,
            epochs: 30,
            rng_seed: 3,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &frames, &types, &cfg).unwrap();
        let best_from_history = report
            .history
            .iter()
            .map(|e| e.val_loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(report.best_loss, best_from_history);
        assert_eq!(
            report.history[report.best_epoch].val_loss,
            report.best_loss
        );
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let frames = dimer_frames(80.0, 0.42, &dimer_grid(10));
        let types = vec![0, 0];
        let cfg = TrainConfig {
            learning_rate: 5e-3,
            batch_size: 4,
            epochs: 5,
            rng_seed: 11,
            ..TrainConfig::default()
        };
        let hyper = HyperParams::preset("small").unwrap();
        let mut m1 = CgModel::init(hyper.clone(), 9).unwrap();
        let mut m2 = CgModel::init(hyper, 9).unwrap();
        let r1 = train(&mut m1, &frames, &types, &cfg).unwrap();
        let r2 = train(&mut m2, &frames, &types, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(m1.theta, m2.theta);
    }

    #[test]
    fn divergence_reports_epoch_and_batch() {
        let frames = dimer_frames(100.0, 0.4, &dimer_grid(10));
        let types = vec![0, 0];
        let mut model = CgModel::init(HyperParams::preset("small").unwrap(), 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e100, // absurd on purpose
            batch_size: 4,
            epochs: 5,
            val_fraction: 0.0,
            rng_seed: 1,
            ..TrainConfig::default()
        };
        let err = train(&mut model, &frames, &types, &cfg).unwrap_err();
        assert!(
            matches!(err, Error::TrainingDiverged { .. }),
            "expected divergence, got {err:?}"
        );
    }

    #[test]
    fn prior_adjusted_training_learns_the_residual() {
        // Targets are pure prior forces: with the same prior attached, the
        // network's residual target is zero and training should push the
        // loss toward zero quickly from wherever init left it.
        let prior = crate::cgnet::prior::Prior {
            k_bond: 100.0,
            r0: 0.4,
            c12: 0.0,
        };
        let frames: Vec<Frame> = dimer_grid(10)
            .iter()
            .enumerate()
            .map(|(t, &r)| {
                let coords = vec![[0.0, 0.0, 0.0], [r, 0.0, 0.0]];
                let (_, f) = prior.energy_forces(&coords).unwrap();
                Frame::with_forces(t as f64, coords, f)
            })
            .collect();
        let types = vec![0, 0];
        let mut model = CgModel::init(HyperParams::preset("small").unwrap(), 5).unwrap();
        model.prior = Some(prior);
        let cfg = TrainConfig {
            learning_rate: 3e-3,
            batch_size: 4,
            epochs: 60,
            rng_seed: 2,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &frames, &types, &cfg).unwrap();
        let last = report.history.last().unwrap();
        assert!(
            last.train_loss < 0.05,
            "residual fit stalled at {}",
            last.train_loss
        );
        // And the full model (net + prior) now reproduces the targets.
        let l = crate::cgnet::loss::fm_loss(&model, &frames, &types).unwrap();
        assert!(l < 0.1, "full-model loss {l}");
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut cfg = TrainConfig::default();
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.val_fraction = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn frames_without_forces_are_rejected() {
        let types = vec![0, 0];
        let frames = vec![Frame::new(0.0, vec![[0.0; 3], [0.4, 0.0, 0.0]])];
        let mut model = CgModel::init(HyperParams::preset("small").unwrap(), 1).unwrap();
        assert!(train(&mut model, &frames, &types, &TrainConfig::default()).is_err());
    }
}

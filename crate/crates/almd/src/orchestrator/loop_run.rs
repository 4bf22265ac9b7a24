//! The active-learning driver.
//!
//! One run executes `n_rounds + 1` rounds. Round 0 builds the initial
//! dataset from an oracle run and trains the base model; every later
//! round selects the least-covered frames from the previous CG
//! simulation, backmaps them, labels them with short oracle runs,
//! projects frames and forces back to CG, appends them, and retrains
//! (warm-started unless `cold_start`). Each round ends with a CG
//! simulation under the fresh model and a benchmark against the cached
//! reference trajectory.
//!
//! Determinism: every stage seed is derived from `global_seed`, the
//! round, and the stage name, so reruns with one config are bitwise
//! identical — manifests (wall-clock normalized away) and trajectory
//! payloads included. The run directory is the unit of resumption: the
//! manifest is rewritten after each round and a rerun picks up at the
//! first missing round, verifying the config hash first.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::benchmark;
use crate::bridge::{backmap_frame, MappingOperator};
use crate::cgnet::{load_checkpoint, save_checkpoint, train, CgModel, Prior};
use crate::cgsim::{simulate_cg, SimStatus, SimTrajectory};
use crate::constants::ToyParams;
use crate::error::{Error, Result};
use crate::mathcore::geometry::Vec3;
use crate::oracle::{minimize, run_langevin};
use crate::orchestrator::config::LoopConfig;
use crate::orchestrator::manifest::{
    LoopStatus, RmsdSpread, RoundRecord, RunManifest, StageTime,
};
use crate::selector::{rmsd_histogram_vs_reference, select_frames, SelectionOutcome};
use crate::system::{
    build_toy_topology, ideal_toy_coords, read_trajectory, write_trajectory, AaFrame, CgFrame,
    Dataset, Provenance, Source, Topology,
};

/// Minimization budget for the starting structure.
const MIN_ITERATIONS: usize = 5000;
const MIN_FORCE_TOL: f64 = 1.0;

/// RMSD-to-folded histogram range (nm) and bin count for the spread
/// comparison; anomalous or exploded frames fall in the overflow bucket.
const RMSD_HIST_RANGE: (f64, f64) = (0.0, 2.4);
const RMSD_HIST_BINS: usize = 80;

/// The toy system plus everything derived from it that stages share.
#[derive(Debug, Clone)]
pub struct ToySetup {
    pub topology: Topology,
    pub mapping: MappingOperator,
    /// One type per bead; the toy has a single residue type.
    pub types: Vec<usize>,
    /// Minimized all-atom coordinates; oracle runs start here.
    pub aa_start: Vec<Vec3>,
    /// CG projection of `aa_start`; CG simulations start here.
    pub cg_start: Vec<Vec3>,
}

/// Build the toy system, minimize it, and derive the CG starting point.
pub fn toy_setup(cfg: &LoopConfig) -> Result<ToySetup> {
    let params = ToyParams::default();
    let topology = build_toy_topology(cfg.n_residues, &params)?;
    let ideal = ideal_toy_coords(cfg.n_residues, &params)?;
    let relaxed = minimize(&topology, &ideal, MIN_ITERATIONS, MIN_FORCE_TOL)?;
    let mapping = MappingOperator::from_topology(&topology, cfg.mapping)?;
    let cg_start = mapping.map_coords(&relaxed.coords)?;
    Ok(ToySetup {
        types: vec![0; topology.n_beads()],
        topology,
        mapping,
        aa_start: relaxed.coords,
        cg_start,
    })
}

/// Stage seed derived from the master seed, the round, and the stage
/// name (FNV-1a into SplitMix64), so one knob reseeds the whole run and
/// no two stages share a stream.
pub fn derive_seed(global: u64, round: usize, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in stage.bytes() {
        h = (h ^ u64::from(byte)).wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(global ^ h ^ (round as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Round-0 dataset: one oracle run from the minimized structure,
/// projected to CG. The all-atom source frames are returned too so the
/// caller can store them next to the dataset.
pub fn make_initial_dataset(cfg: &LoopConfig) -> Result<(Dataset, Vec<AaFrame>)> {
    let setup = toy_setup(cfg)?;
    make_initial_dataset_with(cfg, &setup)
}

fn make_initial_dataset_with(
    cfg: &LoopConfig,
    setup: &ToySetup,
) -> Result<(Dataset, Vec<AaFrame>)> {
    let mut ocfg = cfg.initial.clone();
    ocfg.rng_seed = derive_seed(cfg.global_seed, 0, "initial");
    ocfg.rng_stream = 0;
    let (aa_frames, _) = run_langevin(&setup.topology, &setup.aa_start, &ocfg)?;
    let cg: Vec<CgFrame> = aa_frames
        .iter()
        .map(|f| setup.mapping.map_frame(f))
        .collect::<Result<_>>()?;
    let mut dataset = Dataset::new(setup.topology.n_beads());
    dataset.append_batch(
        cg,
        Provenance {
            iteration: 0,
            source: Source::Initial,
        },
    )?;
    Ok((dataset, aa_frames))
}

/// Long reference trajectory, projected to CG and cached under a content
/// hash of its recipe. The reference is a fixture: its seed comes from
/// the config as-is, never from `global_seed`, so runs with different
/// master seeds are measured against the same distribution.
pub fn ensure_reference(
    cfg: &LoopConfig,
    setup: &ToySetup,
    out_dir: &Path,
) -> Result<(String, Vec<CgFrame>)> {
    let mut hasher = Sha256::new();
    hasher.update(toml::to_string(&cfg.reference).expect("oracle config serializes"));
    hasher.update(format!("\n{}\n{:?}\n", cfg.n_residues, cfg.mapping));
    let key = format!("{:x}", hasher.finalize());
    let name = format!("reference-{}.trj", &key[..12]);
    let path = out_dir.join(&name);
    if path.exists() {
        return Ok((name, read_trajectory(&path)?));
    }
    let (aa_frames, _) = run_langevin(&setup.topology, &setup.aa_start, &cfg.reference)?;
    let frames: Vec<CgFrame> = aa_frames
        .iter()
        .map(|f| setup.mapping.map_frame(f))
        .collect::<Result<_>>()?;
    write_trajectory(&path, &frames)?;
    Ok((name, frames))
}

/// Sidecar for a stored CG trajectory: the anomaly flags and end status
/// that the trajectory format has no channel for.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimMeta {
    status: SimStatus,
    anomalous: Vec<bool>,
}

/// Write a CG simulation as `<path>` plus a `sim-meta.json` sidecar.
pub fn write_sim(trj_path: &Path, sim: &SimTrajectory) -> Result<()> {
    write_trajectory(trj_path, &sim.frames)?;
    let meta = SimMeta {
        status: sim.status,
        anomalous: sim.anomalous.clone(),
    };
    write_json(&trj_path.with_file_name("sim-meta.json"), &meta)
}

/// Read a CG simulation written by [`write_sim`].
pub fn read_sim(trj_path: &Path) -> Result<SimTrajectory> {
    let frames = read_trajectory(trj_path)?;
    let meta_path = trj_path.with_file_name("sim-meta.json");
    let meta: SimMeta = read_json(&meta_path)?;
    if meta.anomalous.len() != frames.len() {
        return Err(Error::Corrupt {
            path: meta_path.display().to_string(),
            detail: format!(
                "{} anomaly flags for {} frames",
                meta.anomalous.len(),
                frames.len()
            ),
        });
    }
    Ok(SimTrajectory {
        frames,
        anomalous: meta.anomalous,
        status: meta.status,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Corrupt {
        path: path.display().to_string(),
        detail: format!("serialization: {e}"),
    })?;
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Corrupt {
        path: path.display().to_string(),
        detail: format!("parse: {e}"),
    })
}

/// Mutable state threaded between rounds.
struct LoopState {
    dataset: Dataset,
    model: CgModel,
    sim: SimTrajectory,
}

enum RoundOutcome {
    Done(RoundRecord),
    /// Selection produced no eligible frame.
    Exhausted,
}

fn run_stage<T>(
    stages: &mut Vec<StageTime>,
    round: usize,
    name: &'static str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let result = f();
    stages.push(StageTime {
        stage: name.to_string(),
        seconds: start.elapsed().as_secs_f64(),
    });
    result.map_err(|e| Error::Stage {
        round,
        stage: name,
        source: Box::new(e),
    })
}

/// Run (or resume) a whole active-learning loop. Returns the final
/// manifest; failures are recorded in the manifest before the error
/// propagates, so the run directory always tells the full story.
pub fn run_active_learning(cfg: &LoopConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let out = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let hash = cfg.config_hash();
    let manifest_path = out.join("manifest.json");

    let mut manifest = if manifest_path.exists() {
        let m = RunManifest::load(&manifest_path)?;
        if m.config_hash != hash {
            return Err(Error::Config(
                "run directory holds a different configuration; use a fresh out_dir or the original config".into(),
            ));
        }
        match m.status {
            LoopStatus::Completed | LoopStatus::NothingToSelect { .. } => return Ok(m),
            LoopStatus::InProgress | LoopStatus::Failed { .. } => m,
        }
    } else {
        RunManifest::new(hash.clone())
    };
    manifest.status = LoopStatus::InProgress;

    let setup = toy_setup(cfg)?;
    let (reference_name, reference) = ensure_reference(cfg, &setup, &out)?;
    manifest.reference = reference_name;

    let mut state: Option<LoopState> = if manifest.rounds.is_empty() {
        None
    } else {
        Some(reload_state(&out, &manifest, &hash)?)
    };

    for round in manifest.rounds.len()..=cfg.n_rounds {
        match run_round(cfg, &setup, &reference, &out, &hash, round, &mut state) {
            Ok(RoundOutcome::Done(record)) => {
                manifest.rounds.push(record);
                manifest.save(&manifest_path)?;
            }
            Ok(RoundOutcome::Exhausted) => {
                manifest.status = LoopStatus::NothingToSelect { round };
                finish(&setup, &out, &mut manifest)?;
                manifest.validate()?;
                manifest.save(&manifest_path)?;
                return Ok(manifest);
            }
            Err(err) => {
                let (failed_round, stage) = match &err {
                    Error::Stage { round, stage, .. } => (*round, stage.to_string()),
                    _ => (round, "setup".to_string()),
                };
                manifest.status = LoopStatus::Failed {
                    round: failed_round,
                    stage,
                    message: err.to_string(),
                };
                manifest.save(&manifest_path)?;
                return Err(err);
            }
        }
    }

    manifest.status = LoopStatus::Completed;
    finish(&setup, &out, &mut manifest)?;
    manifest.validate()?;
    manifest.save(&manifest_path)?;
    Ok(manifest)
}

/// Rebuild in-memory state from the run directory to resume after the
/// last recorded round.
fn reload_state(out: &Path, manifest: &RunManifest, hash: &str) -> Result<LoopState> {
    let (dataset, stored_hash) = Dataset::load(&out.join("dataset"))?;
    if stored_hash != hash {
        return Err(Error::Config(
            "dataset on disk belongs to a different configuration".into(),
        ));
    }
    let last = manifest.rounds.last().expect("resume requires a round");
    let model = load_checkpoint(&out.join(&last.checkpoint))?;
    let sim = read_sim(&out.join(&last.trajectory))?;
    Ok(LoopState {
        dataset,
        model,
        sim,
    })
}

fn run_round(
    cfg: &LoopConfig,
    setup: &ToySetup,
    reference: &[CgFrame],
    out: &Path,
    hash: &str,
    round: usize,
    state_slot: &mut Option<LoopState>,
) -> Result<RoundOutcome> {
    let round_dir = out.join(format!("round-{round}"));
    fs::create_dir_all(&round_dir).map_err(|e| Error::io(round_dir.display().to_string(), e))?;
    let mut stages: Vec<StageTime> = Vec::new();
    let global = cfg.global_seed;

    let (dataset, model, dataset_before, selected_frames): (Dataset, CgModel, usize, Vec<usize>);

    if round == 0 {
        let (ds, _aa) = run_stage(&mut stages, round, "initial-data", || {
            let (ds, aa_frames) = make_initial_dataset_with(cfg, setup)?;
            write_trajectory(&round_dir.join("aa-initial.trj"), &aa_frames)?;
            ds.save(&out.join("dataset"), hash)?;
            Ok((ds, aa_frames))
        })?;
        dataset_before = 0;
        selected_frames = Vec::new();
        model = run_stage(&mut stages, round, "train", || {
            let mut model = CgModel::init(cfg.model.clone(), derive_seed(global, 0, "init"))?;
            // The prior is fit once, on the physics-only initial data,
            // and rides along through every later round.
            model.prior = Some(Prior::fit(ds.frames(), cfg.initial.temperature)?);
            let mut tcfg = cfg.train.clone();
            tcfg.rng_seed = derive_seed(global, 0, "train");
            train(&mut model, ds.frames(), &setup.types, &tcfg)?;
            save_checkpoint(&round_dir.join("model.ckpt"), &model)?;
            Ok(model)
        })?;
        dataset = ds;
    } else {
        let prev = state_slot.take().expect("rounds after 0 carry state");
        let LoopState {
            dataset: mut ds,
            model: mut m,
            sim: prev_sim,
        } = prev;

        let outcome = run_stage(&mut stages, round, "select", || {
            let mut scfg = cfg.select.clone();
            scfg.rng_seed = derive_seed(global, round, "select");
            let outcome = select_frames(&prev_sim, &ds, &scfg)?;
            write_json(&round_dir.join("selection.json"), &outcome)?;
            Ok(outcome)
        })?;
        let picked = match outcome {
            SelectionOutcome::Selected(report) => report.selected,
            SelectionOutcome::NothingToSelect(_) => {
                *state_slot = Some(LoopState {
                    dataset: ds,
                    model: m,
                    sim: prev_sim,
                });
                return Ok(RoundOutcome::Exhausted);
            }
        };
        selected_frames = picked.iter().map(|s| s.frame_index).collect();

        let backmapped = run_stage(&mut stages, round, "backmap", || {
            picked
                .iter()
                .map(|s| {
                    backmap_frame(
                        &setup.topology,
                        &prev_sim.frames[s.frame_index],
                        cfg.backmap_relax,
                    )
                })
                .collect::<Result<Vec<_>>>()
        })?;

        // One short labeling run per selected frame: never more oracle
        // queries than frames picked. Runs share a seed and differ by
        // stream (= selection rank), so the batch order is free to vary.
        let aa_labels = run_stage(&mut stages, round, "oracle", || {
            let runs: Vec<Vec<AaFrame>> = backmapped
                .par_iter()
                .enumerate()
                .map(|(rank, bm)| {
                    let mut ocfg = cfg.oracle.clone();
                    ocfg.rng_seed = derive_seed(global, round, "oracle");
                    ocfg.rng_stream = rank as u64;
                    let (frames, _) = run_langevin(&setup.topology, &bm.frame.coords, &ocfg)?;
                    Ok(frames)
                })
                .collect::<Result<_>>()?;
            let flat: Vec<AaFrame> = runs.into_iter().flatten().collect();
            write_trajectory(&round_dir.join("aa-labels.trj"), &flat)?;
            Ok(flat)
        })?;

        dataset_before = ds.len();
        run_stage(&mut stages, round, "project", || {
            let cg: Vec<CgFrame> = aa_labels
                .iter()
                .map(|f| setup.mapping.map_frame(f))
                .collect::<Result<_>>()?;
            ds.append_batch(
                cg,
                Provenance {
                    iteration: round as u32,
                    source: Source::Active,
                },
            )?;
            ds.save(&out.join("dataset"), hash)
        })?;

        run_stage(&mut stages, round, "train", || {
            if cfg.cold_start {
                let prior = m.prior.take();
                m = CgModel::init(cfg.model.clone(), derive_seed(global, round, "init"))?;
                m.prior = prior;
            }
            let mut tcfg = cfg.train.clone();
            tcfg.rng_seed = derive_seed(global, round, "train");
            train(&mut m, ds.frames(), &setup.types, &tcfg)?;
            save_checkpoint(&round_dir.join("model.ckpt"), &m)
        })?;
        dataset = ds;
        model = m;
    }

    let sim = run_stage(&mut stages, round, "simulate", || {
        let mut sim_cfg = cfg.simulate.clone();
        sim_cfg.rng_seed = derive_seed(global, round, "simulate");
        sim_cfg.rng_stream = 0;
        let sim = simulate_cg(&model, &setup.types, &setup.cg_start, &setup.topology, &sim_cfg)?;
        write_sim(&round_dir.join("cg.trj"), &sim)?;
        Ok(sim)
    })?;

    let rows = run_stage(&mut stages, round, "benchmark", || {
        let report = benchmark(&sim.frames, reference, &cfg.bench)?;
        write_json(&round_dir.join("benchmark.json"), &report)?;
        Ok(report.rows)
    })?;

    let record = RoundRecord {
        round,
        dataset_before,
        dataset_after: dataset.len(),
        selected_frames,
        sim_status: sim.status,
        n_sim_frames: sim.frames.len(),
        n_anomalous: sim.anomalous.iter().filter(|&&a| a).count(),
        benchmark: rows,
        checkpoint: format!("round-{round}/model.ckpt"),
        trajectory: format!("round-{round}/cg.trj"),
        stages,
    };
    *state_slot = Some(LoopState {
        dataset,
        model,
        sim,
    });
    Ok(RoundOutcome::Done(record))
}

/// After the loop: compare how far the first and last models wander from
/// the folded structure. Wider support means the post-AL model explores
/// beyond the initial basin. Writes a plot CSV and records the spans.
fn finish(setup: &ToySetup, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    if manifest.rounds.len() < 2 {
        return Ok(());
    }
    let first = &manifest.rounds[0];
    let last = manifest.rounds.last().expect("len checked");
    let sim0 = read_sim(&out.join(&first.trajectory))?;
    let sim1 = read_sim(&out.join(&last.trajectory))?;
    let keep = |sim: &SimTrajectory| -> Vec<CgFrame> {
        sim.frames
            .iter()
            .zip(&sim.anomalous)
            .filter(|&(_, &bad)| !bad)
            .map(|(f, _)| f.clone())
            .collect()
    };
    let folded = CgFrame {
        time: 0.0,
        coords: setup.cg_start.clone(),
        forces: None,
    };
    let (lo, hi) = RMSD_HIST_RANGE;
    let (_, h0) = rmsd_histogram_vs_reference(&keep(&sim0), &folded, lo, hi, RMSD_HIST_BINS)?;
    let (_, h1) = rmsd_histogram_vs_reference(&keep(&sim1), &folded, lo, hi, RMSD_HIST_BINS)?;

    let csv_path = out.join("rmsd-histogram.csv");
    let mut text = String::from("bin_center,round0,final\n");
    for b in 0..RMSD_HIST_BINS {
        text.push_str(&format!(
            "{:.6},{},{}\n",
            h0.bin_center(b),
            h0.counts[b],
            h1.counts[b]
        ));
    }
    fs::write(&csv_path, text).map_err(|e| Error::io(csv_path.display().to_string(), e))?;

    manifest.rmsd_spread = Some(RmsdSpread {
        csv: "rmsd-histogram.csv".into(),
        lo,
        hi,
        bins: RMSD_HIST_BINS,
        round0_support_bins: support(&h0.counts),
        final_support_bins: support(&h1.counts),
    });
    Ok(())
}

/// Occupied-bin span: distance from first to last non-empty bin.
fn support(counts: &[u64]) -> usize {
    match (
        counts.iter().position(|&c| c > 0),
        counts.iter().rposition(|&c| c > 0),
    ) {
        (Some(first), Some(last)) => last - first + 1,
        _ => 0,
    }
}

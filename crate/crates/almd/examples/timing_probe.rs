//! Scratch probe: run a loop configuration end to end and print stage
//! timings, per-round W1 rows, and the RMSD spread summary.
//!
//! Usage: timing_probe <mode> [seed]

use almd::orchestrator::{run_active_learning, LoopConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("tiny");
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let dir = tempfile::tempdir().unwrap();

    let mut cfg = LoopConfig::default();
    cfg.out_dir = dir.path().join("run").display().to_string();
    cfg.global_seed = seed;
    match mode {
        "tiny" => {
            cfg.n_residues = 4;
            cfg.n_rounds = 2;
            cfg.initial.n_steps = 2000;
            cfg.initial.save_interval = 100;
            cfg.initial.equilibration_steps = 200;
            cfg.reference.n_steps = 50_000;
            cfg.reference.equilibration_steps = 1000;
            cfg.simulate.n_steps = 2000;
            cfg.simulate.save_interval = 20;
            cfg.train.epochs = 10;
            cfg.select.k = 4;
            cfg.bench.contact_pairs = vec![(0, 3)];
        }
        "default" => {}
        "longsim" => {
            cfg.simulate.n_steps = 200_000;
            cfg.simulate.save_interval = 500;
        }
        "dense" => {
            cfg.simulate.n_steps = 200_000;
            cfg.simulate.save_interval = 500;
            cfg.oracle.n_steps = 500;
        }
        "wd4" | "wd3" | "wd2" => {
            cfg.simulate.n_steps = 200_000;
            cfg.simulate.save_interval = 500;
            cfg.oracle.n_steps = 500;
            cfg.train.weight_decay = match mode {
                "wd4" => 1e-4,
                "wd3" => 1e-3,
                _ => 1e-2,
            };
        }
        "verylong" => {
            cfg.n_rounds = 1;
            cfg.simulate.n_steps = 1_000_000;
            cfg.simulate.save_interval = 2500;
            cfg.oracle.n_steps = 500;
            cfg.train.weight_decay = 1e-3;
        }
        "thermal" => {
            cfg.oracle.equilibration_steps = 2000;
        }
        "densest" => {
            cfg.oracle.equilibration_steps = 2000;
            cfg.oracle.n_steps = 2000;
        }
        "cold" => {
            cfg.oracle.equilibration_steps = 2000;
            cfg.cold_start = true;
        }
        "colddense" => {
            cfg.oracle.equilibration_steps = 2000;
            cfg.oracle.n_steps = 2000;
            cfg.cold_start = true;
        }
        "strongwd1" => {
            cfg.oracle.equilibration_steps = 2000;
            cfg.train.weight_decay = 1.0;
        }
        "strongwd3" => {
            cfg.oracle.equilibration_steps = 2000;
            cfg.train.weight_decay = 3.0;
        }
        other => panic!("unknown mode {other}"),
    }

    let t0 = std::time::Instant::now();
    let manifest = run_active_learning(&cfg).unwrap();
    let total = t0.elapsed().as_secs_f64();

    println!("status: {:?}", manifest.status);
    for round in &manifest.rounds {
        println!(
            "round {}: dataset {} -> {}, sim {:?} ({} frames, {} anomalous)",
            round.round,
            round.dataset_before,
            round.dataset_after,
            round.sim_status,
            round.n_sim_frames,
            round.n_anomalous
        );
        for stage in &round.stages {
            println!("    {:<14} {:8.2}s", stage.stage, stage.seconds);
        }
        for row in &round.benchmark {
            println!("    W1 {:<22} {:.5}", row.observable, row.w1);
        }
    }
    if let Some(spread) = &manifest.rmsd_spread {
        println!(
            "rmsd support: round0 {} bins, final {} bins",
            spread.round0_support_bins, spread.final_support_bins
        );
    }
    println!("total: {total:.2}s");
}

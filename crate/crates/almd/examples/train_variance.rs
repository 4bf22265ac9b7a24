//! Scratch diagnostic: train several nets on one fixed initial dataset,
//! varying only init/shuffle seeds, then simulate and benchmark each.
//! Prints val loss next to TICA W1 to see whether val loss predicts
//! simulation quality.

use almd::analysis::{benchmark, BenchConfig};
use almd::cgnet::{train, CgModel, Prior, TrainConfig};
use almd::cgsim::{simulate_cg, SimConfig};
use almd::orchestrator::{ensure_reference, make_initial_dataset, toy_setup, LoopConfig};

fn main() {
    let mut cfg = LoopConfig::default();
    cfg.global_seed = 42;
    cfg.train.weight_decay = 1e-3;
    let setup = toy_setup(&cfg).unwrap();
    let (dataset, _) = make_initial_dataset(&cfg).unwrap();
    let scratch = std::path::Path::new("/tmp/almd-ref-cache");
    std::fs::create_dir_all(scratch).unwrap();
    let (_, reference) = ensure_reference(&cfg, &setup, scratch).unwrap();
    let prior = Prior::fit(dataset.frames(), 300.0).unwrap();
    println!(
        "prior: k_bond {:.1} r0 {:.4} c12 {:.3e}",
        prior.k_bond, prior.r0, prior.c12
    );

    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3e-3);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);
    let wd: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    println!("lr {lr} epochs {epochs} wd {wd}");

    let bench_cfg = BenchConfig::for_chain(cfg.n_residues);
    for init_seed in [1u64, 2] {
        for train_seed in [10u64, 20, 30] {
            let mut model = CgModel::init(cfg.model.clone(), init_seed).unwrap();
            model.prior = Some(prior.clone());
            let tcfg = TrainConfig {
                learning_rate: lr,
                epochs,
                weight_decay: wd,
                rng_seed: train_seed,
                ..TrainConfig::default()
            };
            let report = train(&mut model, dataset.frames(), &setup.types, &tcfg).unwrap();

            let sim_cfg = SimConfig {
                n_steps: 200_000,
                save_interval: 500,
                rng_seed: 777,
                ..SimConfig::default()
            };
            let sim = simulate_cg(&model, &setup.types, &setup.cg_start, &setup.topology, &sim_cfg)
                .unwrap();
            let n_anom = sim.anomalous.iter().filter(|&&a| a).count();
            let w1 = if sim.frames.len() > 40 {
                benchmark(&sim.frames, &reference, &bench_cfg)
                    .map(|r| r.w1("tica_kde").unwrap())
                    .unwrap_or(f64::NAN)
            } else {
                f64::NAN
            };
            println!(
                "init {init_seed} shuffle {train_seed}: best_epoch {:3} val {:9.4} | sim {:?} anom {n_anom} | tica W1 {w1:.4}",
                report.best_epoch, report.best_loss, sim.status
            );
        }
    }
}

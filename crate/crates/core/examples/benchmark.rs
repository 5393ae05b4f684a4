//! Trains the logistic estimator per window length on synthetic scenes and
//! prints identification metrics for a held-out scene.
//!
//! `cargo run --release --example benchmark -- 0 1 2` runs seeds 0 to 2.
//! `NMIN` sets the minimum reliable score count: `w` (default) for one
//! window length, `2w` for two, or a plain number.

use std::collections::BTreeSet;
use std::time::Instant;

use trajsense::estimator::{FeatureLogistic, RunningStats};
use trajsense::matching::MatchConfig;
use trajsense::pipeline::{build_experiment, evaluate, fit, match_scores, score_dataset};
use trajsense::signals::{prepare_dataset, PreprocessConfig};
use trajsense::simulator::{generate_scenario, ScenarioConfig};
use trajsense::training::TrainConfig;

fn main() -> trajsense::Result<()> {
    let seeds: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let seeds = if seeds.is_empty() { vec![0, 1, 2] } else { seeds };
    let pre = PreprocessConfig::default();
    for seed in seeds {
        let t0 = Instant::now();
        let train_scene = generate_scenario(&ScenarioConfig {
            seed: 1000 + seed,
            id_prefix: "train-".into(),
            ..Default::default()
        })?;
        let test_scene = generate_scenario(&ScenarioConfig {
            seed,
            id_prefix: "test-".into(),
            ..Default::default()
        })?;
        let train_ds = prepare_dataset(&train_scene.tracks, &train_scene.sensors, &pre)?;
        let test_ds = prepare_dataset(&test_scene.tracks, &test_scene.sensors, &pre)?;
        let participants: BTreeSet<String> = test_scene.sensors.iter().map(|s| s.participant_id.clone()).collect();
        for w in [100usize, 300, 600] {
            let cfg = TrainConfig {
                window: w,
                rho_neg: 16.0,
                learning_rate: 0.05,
                batch_size: 64,
                epochs: 40,
                patience: 8,
                seed,
                ..Default::default()
            };
            let exp = build_experiment(&train_ds, &cfg)?;
            let mut model = FeatureLogistic::zeros(w, RunningStats::new(0.1));
            let report = fit(&mut model, &exp, &cfg, 0)?;
            let scores = score_dataset(&test_ds, &model, 1)?;
            let nmin_rule = std::env::var("NMIN").unwrap_or_else(|_| "w".into());
            let n_min = if nmin_rule == "w" {
                w
            } else if let Some(k) = nmin_rule.strip_suffix('w') {
                w * k.parse::<usize>().unwrap()
            } else {
                nmin_rule.parse().unwrap()
            };
            let mc = MatchConfig {
                n_min,
                ..MatchConfig::for_window(w).unwrap()
            };
            let outcome = match_scores(&scores, &test_scene.truth.labels, mc)?;
            let ev = evaluate(&outcome, &test_scene.truth.labels, &test_scene.tracks, &participants)?;
            println!(
                "seed {seed} W {w} nmin {n_min}: PP {:?} PR {:?} PF {:?} | tw PF {:?} | {:?} | best epoch {} val {:?} | {:.1}s",
                ev.plain.pp,
                ev.plain.pr,
                ev.plain.pf,
                ev.weighted.pf,
                ev.counts,
                report.best_epoch,
                report.best_val_loss,
                t0.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}

// Scratch diagnostics for acceptance tuning (not part of the deliverable tests).
use std::time::Instant;

use asmcal::selection::ThresholdSchedule;
use asmcal::simulator::{run_semi_supervised, PredictorConfig, SimulationConfig, Strategy};

fn rank_of(values: &[f64], idx: usize) -> f64 {
    let mut rank = 1.0;
    for (j, v) in values.iter().enumerate() {
        if j != idx && (*v < values[idx] || (*v == values[idx] && j < idx)) {
            rank += 1.0;
        }
    }
    rank
}

fn main() {
    let seeds: Vec<u64> = (0..10).collect();

    // --- Criterion 9 style comparison on the default config ---
    let cfg = SimulationConfig::default();
    let strategies = [
        Strategy::Ours,
        Strategy::WithoutFiltering,
        Strategy::Softmax,
        Strategy::Acd,
        Strategy::Awd,
    ];
    let t0 = Instant::now();
    let mut mae: Vec<Vec<f64>> = vec![Vec::new(); strategies.len()];
    for &seed in &seeds {
        for (si, &s) in strategies.iter().enumerate() {
            let run = run_semi_supervised(&cfg, s, seed).unwrap();
            mae[si].push(run.summary.selected_count_mae.unwrap_or(f64::NAN));
            if seed <= 2 {
                println!(
                    "    [{} seed {seed}] selected {} / cand {} prec {:?} final_mult {:.3} scene_mae {:.2}",
                    s.name(),
                    run.summary.selected_total,
                    run.summary.candidates_total,
                    run.summary.precision.map(|p| (p * 100.0).round() / 100.0),
                    run.summary.final_noise_multiplier,
                    run.summary.scene_mae
                );
            }
        }
    }
    println!("ablation wall time: {:.1}s", t0.elapsed().as_secs_f64());
    for (si, s) in strategies.iter().enumerate() {
        let row: Vec<String> = mae[si].iter().map(|v| format!("{v:5.2}")).collect();
        let mean = mae[si].iter().sum::<f64>() / mae[si].len() as f64;
        println!("  {:>14}: {}  mean {mean:6.3}", s.name(), row.join(" "));
    }
    let mut wins_filt = 0;
    let mut wins_soft = 0;
    let mut ranks = vec![0.0; strategies.len()];
    for k in 0..seeds.len() {
        let col: Vec<f64> = (0..strategies.len()).map(|si| mae[si][k]).collect();
        if col[0] < col[1] { wins_filt += 1; }
        if col[0] < col[2] { wins_soft += 1; }
        for si in 0..strategies.len() {
            ranks[si] += rank_of(&col, si) / seeds.len() as f64;
        }
    }
    println!("ours < w/o-filtering: {wins_filt}/10 (need >=8); ours < softmax: {wins_soft}/10 (need >=7)");
    for (si, s) in strategies.iter().enumerate() {
        println!("  mean rank {:>14}: {:.2}", s.name(), ranks[si]);
    }

    // --- Criterion 8 calibration scenario through the harness ---
    let cal = SimulationConfig {
        scene_count: 2,
        holdout_scene_count: 6,
        labeled_fraction: 1.0,
        epochs: 1600,
        intensity_min: 6.0,
        intensity_max: 70.0,
        feedback_gain: 0.0,
        predictor: PredictorConfig {
            jitter_sigma: 0.0,
            miss_rate_base: 0.02,
            miss_rate_density_coef: 0.006,
            false_positive_rate: 0.0,
            improvement_per_epoch: 1.0,
            seed: 0,
        },
        schedule: ThresholdSchedule::new(1500, 1599, 0.1, 0.6).unwrap(),
        scorer_train_interval: 50,
        scorer_epochs: 800,
        scorer_step: 1.0,
        scorer_batch_size: 0,
        ..SimulationConfig::default()
    };
    let t1 = Instant::now();
    let mut pass = 0;
    for &seed in &seeds {
        let run = run_semi_supervised(&cal, Strategy::Ours, seed).unwrap();
        let tau = run.summary.train_kendall.unwrap_or(-1.0);
        let rho = run.summary.holdout_spearman.unwrap_or(-1.0);
        let ok = tau >= 0.9 && rho >= 0.5;
        if ok { pass += 1; }
        println!("seed {seed}: kendall {tau:.3} spearman {rho:.3} {}", if ok { "PASS" } else { "FAIL" });
    }
    println!("calibration: {pass}/10 (need >=8); wall {:.1}s", t1.elapsed().as_secs_f64());
}

// Head-to-head ours vs acd across noise configs (tuning scratch).
use asmcal::simulator::{run_semi_supervised, SimulationConfig, Strategy};

fn main() {
    for imin in [6.0f64, 8.0, 10.0] {
        for fp in [0.05f64, 0.1] {
            let mut cfg = SimulationConfig::default();
            cfg.intensity_min = imin;
            cfg.predictor.false_positive_rate = fp;
            cfg.predictor.jitter_sigma = 0.3;
            let mut wins = 0;
            let mut gaps = Vec::new();
            for seed in 0..10u64 {
                let ours = run_semi_supervised(&cfg, Strategy::Ours, seed)
                    .unwrap().summary.selected_count_mae.unwrap();
                let acd = run_semi_supervised(&cfg, Strategy::Acd, seed)
                    .unwrap().summary.selected_count_mae.unwrap();
                if ours < acd { wins += 1; }
                gaps.push(acd - ours);
            }
            let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
            println!("imin {imin} fp {fp}: ours wins {wins}/10, mean(acd-ours) {mean_gap:+.3}");
        }
    }
}

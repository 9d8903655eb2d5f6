//! The semi-supervised training loop and the ablation suite.
//!
//! Each epoch: the student predicts on labeled patches and the surrogate
//! bank accumulates the strategy's distance; a scorer is trained on the
//! labeled surrogates; an EMA teacher predicts and scores the unlabeled
//! patches; the threshold schedule admits pseudo-labels; and the selected
//! labels feed back into the student, shrinking its noise when their counts
//! agree with the (hidden) ground truth and growing it when they do not.
//! Parametric noise reduction is the minimal stand-in for gradient
//! learning: good filtering yields a better training signal and a better
//! model, bad filtering measurably degrades it.
//!
//! Strategies within a suite share scene streams and base noise draws, so
//! metric differences are attributable to the filtering rule alone.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::asm::{AsmBank, PatchKey};
use crate::geometry::{build_grid, crop_points, PatchGrid, PointSet};
use crate::matching::{
    counting_difference, hungarian_drop_distance, spatial_matching_distance, wasserstein_distance,
};
use crate::ranking::{
    extract_features, train_scorer, RankingError, RankingSample, ScorerLoss, ScorerTrainConfig,
    TrainMode, UncertaintyScorer,
};
use crate::seeds;
use crate::selection::{select_pseudo_labels, Boundary, EmaState, ThresholdSchedule};
use crate::stats;

use super::{
    generate_scene, predict_noisy, DensityField, PredictorConfig, SceneConfig, SimulatorError,
};

/// Pseudo-label filtering strategies under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Accumulated spatial matching surrogate with ranking-trained scorer.
    #[serde(rename = "ours")]
    Ours,
    /// No filtering: every candidate becomes a pseudo-label after warm-up.
    #[serde(rename = "w/o-filtering")]
    WithoutFiltering,
    /// Uncertainty from mean proposal confidence (the overconfident
    /// baseline); no scorer.
    #[serde(rename = "softmax")]
    Softmax,
    /// Accumulated absolute counting difference as the surrogate.
    #[serde(rename = "acd")]
    Acd,
    /// Accumulated discrete Wasserstein distance as the surrogate.
    #[serde(rename = "awd")]
    Awd,
    /// Accumulated matching-only distance (unmatched points dropped).
    #[serde(rename = "hungarian")]
    Hungarian,
    /// Matching surrogate, but the scorer is trained with pointwise L1.
    #[serde(rename = "l1-loss")]
    L1Loss,
    /// Ranks by the latest epoch's distance instead of the mean.
    #[serde(rename = "w/o-average")]
    WithoutAverage,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Ours,
        Strategy::WithoutFiltering,
        Strategy::Softmax,
        Strategy::Acd,
        Strategy::Awd,
        Strategy::Hungarian,
        Strategy::L1Loss,
        Strategy::WithoutAverage,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Ours => "ours",
            Strategy::WithoutFiltering => "w/o-filtering",
            Strategy::Softmax => "softmax",
            Strategy::Acd => "acd",
            Strategy::Awd => "awd",
            Strategy::Hungarian => "hungarian",
            Strategy::L1Loss => "l1-loss",
            Strategy::WithoutAverage => "w/o-average",
        }
    }

    /// Whether candidate scores come from the trained scorer.
    fn uses_scorer(&self) -> bool {
        !matches!(self, Strategy::WithoutFiltering | Strategy::Softmax)
    }

    fn scorer_loss(&self) -> ScorerLoss {
        match self {
            Strategy::L1Loss => ScorerLoss::PointwiseL1,
            _ => ScorerLoss::LambdaRank,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = SimulatorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .iter()
            .find(|v| v.name() == s)
            .copied()
            .ok_or(SimulatorError::InvalidConfig("unknown strategy name"))
    }
}

/// Full configuration of one simulated semi-supervised experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Training scenes; the first `ceil(labeled_fraction * scene_count)`
    /// are labeled.
    pub scene_count: usize,
    /// Held-out scenes for the final model evaluation.
    pub holdout_scene_count: usize,
    pub scene_width: f64,
    pub scene_height: f64,
    /// Must tile the scene exactly (one penalty constant per bank).
    pub patch_size: f64,
    /// Density field resolution per scene.
    pub density_rows: usize,
    pub density_cols: usize,
    /// Per-cell intensities are drawn uniformly from this range.
    pub intensity_min: f64,
    pub intensity_max: f64,
    pub labeled_fraction: f64,
    pub epochs: u32,
    pub predictor: PredictorConfig,
    pub schedule: ThresholdSchedule,
    pub boundary: Boundary,
    pub ema_decay: f64,
    pub lambda1: f64,
    /// Strength of the pseudo-label feedback on the student's noise.
    pub feedback_gain: f64,
    pub scorer_epochs: u32,
    pub scorer_step: f64,
    /// Mini-batch size for scorer training; 0 trains full-batch. The
    /// surrogate is min-max normalized per batch either way.
    pub scorer_batch_size: usize,
    /// Retrain the scorer every this many epochs (and always on the last
    /// one). Long accumulation runs don't need a fresh fit per epoch.
    pub scorer_train_interval: u32,
    /// Strong augmentation: delete pseudo-label points inside a random
    /// rectangle covering a quarter of the patch.
    pub cutout: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            scene_count: 20,
            holdout_scene_count: 8,
            scene_width: 256.0,
            scene_height: 256.0,
            patch_size: 64.0,
            density_rows: 4,
            density_cols: 4,
            intensity_min: 10.0,
            intensity_max: 55.0,
            labeled_fraction: 0.1,
            epochs: 60,
            predictor: PredictorConfig {
                jitter_sigma: 0.3,
                miss_rate_base: 0.03,
                miss_rate_density_coef: 0.008,
                false_positive_rate: 0.05,
                improvement_per_epoch: 0.99,
                seed: 0,
            },
            schedule: ThresholdSchedule::new(8, 48, 0.1, 0.6).expect("valid defaults"),
            boundary: Boundary::Strict,
            ema_decay: 0.9,
            lambda1: 0.3,
            feedback_gain: 0.5,
            scorer_epochs: 200,
            scorer_step: 0.5,
            scorer_batch_size: 8,
            scorer_train_interval: 1,
            cutout: false,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimulatorError> {
        if self.scene_count < 2 {
            return Err(SimulatorError::InvalidExperiment("need at least 2 scenes"));
        }
        if !(self.labeled_fraction > 0.0 && self.labeled_fraction <= 1.0) {
            return Err(SimulatorError::InvalidExperiment(
                "labeled_fraction must be in (0, 1]",
            ));
        }
        if self.epochs == 0 {
            return Err(SimulatorError::InvalidExperiment("need at least 1 epoch"));
        }
        if self.scene_width <= 0.0 || self.scene_height <= 0.0 || self.patch_size <= 0.0 {
            return Err(SimulatorError::InvalidConfig("scene/patch dimensions"));
        }
        // One penalty constant per bank: patches must tile exactly.
        let rx = self.scene_width / self.patch_size;
        let ry = self.scene_height / self.patch_size;
        if rx.fract() != 0.0 || ry.fract() != 0.0 {
            return Err(SimulatorError::InvalidConfig(
                "scene dimensions must be multiples of patch_size",
            ));
        }
        if self.density_rows == 0 || self.density_cols == 0 {
            return Err(SimulatorError::InvalidConfig("density grid"));
        }
        if !(self.intensity_min >= 0.0 && self.intensity_max >= self.intensity_min) {
            return Err(SimulatorError::InvalidConfig("intensity range"));
        }
        if !self.ema_decay.is_finite() || self.ema_decay <= 0.0 || self.ema_decay >= 1.0 {
            return Err(SimulatorError::InvalidConfig("ema_decay"));
        }
        if !self.lambda1.is_finite() || self.lambda1 < 0.0 {
            return Err(SimulatorError::InvalidConfig("lambda1"));
        }
        if !self.feedback_gain.is_finite() || self.feedback_gain < 0.0 {
            return Err(SimulatorError::InvalidConfig("feedback_gain"));
        }
        if self.scorer_epochs == 0
            || !(self.scorer_step > 0.0)
            || self.scorer_train_interval == 0
            || self.scorer_batch_size == 1
        {
            return Err(SimulatorError::InvalidConfig("scorer training parameters"));
        }
        self.predictor.validate()
    }

    fn labeled_count(&self) -> usize {
        ((self.labeled_fraction * self.scene_count as f64).ceil() as usize)
            .clamp(1, self.scene_count)
    }
}

/// Per-epoch metrics of one strategy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: u32,
    pub threshold: Option<f64>,
    pub candidates: usize,
    pub selected: usize,
    /// Mean absolute count error of the selected pseudo-labels against the
    /// hidden ground truth.
    pub selected_count_mae: Option<f64>,
    /// Mean true matching distance of the selected pseudo-labels.
    pub selected_mean_dist: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub sup_pred_loss: f64,
    pub uncer_loss: f64,
    pub pseudo_pred_loss: f64,
    pub composed_loss: f64,
    pub noise_multiplier: f64,
}

/// Aggregated outcome of one strategy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub candidates_total: usize,
    pub selected_total: usize,
    /// Count-MAE over every selected pseudo-label of the run.
    pub selected_count_mae: Option<f64>,
    /// Mean true matching distance over every selected pseudo-label.
    pub selected_mean_dist: Option<f64>,
    /// Selection precision/recall against the true-quality oracle
    /// (candidates in the better half by true matching distance).
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Scene-level counting errors of the final model on held-out scenes.
    pub scene_mae: f64,
    pub scene_rmse: f64,
    pub final_noise_multiplier: f64,
    /// Spearman correlation between final scores and true patch distances
    /// on held-out patches.
    pub holdout_spearman: Option<f64>,
    /// Kendall tau between final scores and the normalized surrogate on
    /// the labeled (training) patches; scorer strategies only.
    pub train_kendall: Option<f64>,
    /// Mean final score on top-quartile-density unlabeled patches minus
    /// the mean on bottom-quartile ones.
    pub density_kappa_gap: Option<f64>,
}

/// One (strategy, seed) cell of the ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRun {
    pub strategy: Strategy,
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    pub summary: RunSummary,
}

/// Mean and standard deviation over seeds (populated runs only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Aggregate {
    fn over(values: &[f64]) -> Option<Aggregate> {
        if values.is_empty() {
            return None;
        }
        let (mean, std) = stats::mean_std(values);
        Some(Aggregate {
            mean,
            std,
            n: values.len(),
        })
    }
}

/// Per-strategy aggregation across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub seeds: usize,
    pub selected_count_mae: Option<Aggregate>,
    pub selected_mean_dist: Option<Aggregate>,
    pub precision: Option<Aggregate>,
    pub recall: Option<Aggregate>,
    pub scene_mae: Option<Aggregate>,
    pub scene_rmse: Option<Aggregate>,
}

/// Results of a full ablation suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub runs: Vec<StrategyRun>,
    pub summaries: Vec<StrategySummary>,
}

/// Bad pseudo-labels corrupt training more than clean ones help.
const FEEDBACK_HARM_FACTOR: f64 = 1.5;
/// Independent prediction draws for the held-out evaluation.
const HOLDOUT_EVAL_REPS: u64 = 8;
/// Bounds of the student's noise multiplier.
const NOISE_MULT_MIN: f64 = 0.25;
const NOISE_MULT_MAX: f64 = 4.0;
/// A pseudo-label counts as clean when its true matching distance stays
/// under this fraction of the penalty constant; beyond it the label
/// injects noise and hurts. The matching distance covers both location
/// error and, through the unmatched-point penalty, count error.
const FEEDBACK_DIST_PIVOT: f64 = 0.2;

struct Scene {
    id: String,
    gt: PointSet,
    patch_gt: Vec<PointSet>,
    patch_density: Vec<f64>,
}

fn make_scenes(
    cfg: &SimulationConfig,
    grid: &PatchGrid,
    root: u64,
    count: usize,
    field_label: &str,
    scene_label: &str,
    id_prefix: &str,
) -> Result<Vec<Scene>, SimulatorError> {
    let mut scenes = Vec::with_capacity(count);
    for s in 0..count {
        let mut rng = seeds::rng(seeds::derive_indexed(root, field_label, &[s as u64]));
        let cells = cfg.density_rows * cfg.density_cols;
        let intensities: Vec<f64> = (0..cells)
            .map(|_| cfg.intensity_min + (cfg.intensity_max - cfg.intensity_min) * rng.random::<f64>())
            .collect();
        let scene_cfg = SceneConfig {
            width: cfg.scene_width,
            height: cfg.scene_height,
            density_field: DensityField::new(cfg.density_rows, cfg.density_cols, intensities)?,
            seed: seeds::derive_indexed(root, scene_label, &[s as u64]),
        };
        let gt = generate_scene(&scene_cfg)?;
        let patch_gt: Vec<PointSet> = grid
            .patches()
            .iter()
            .map(|p| crop_points(&gt, p))
            .collect::<Result<_, _>>()?;
        let patch_density: Vec<f64> = patch_gt.iter().map(|p| p.len() as f64).collect();
        scenes.push(Scene {
            id: format!("{id_prefix}-{s:03}"),
            gt,
            patch_gt,
            patch_density,
        });
    }
    Ok(scenes)
}

#[derive(Clone)]
struct FeatureTrack {
    sums: Vec<f64>,
    n: u64,
}

impl FeatureTrack {
    fn new(dim: usize) -> Self {
        FeatureTrack {
            sums: alloc::vec![0.0; dim],
            n: 0,
        }
    }

    fn add(&mut self, features: &[f64]) {
        for (s, x) in self.sums.iter_mut().zip(features) {
            *s += x;
        }
        self.n += 1;
    }

    fn mean(&self) -> Vec<f64> {
        if self.n == 0 {
            return self.sums.clone();
        }
        self.sums.iter().map(|s| s / self.n as f64).collect()
    }
}

fn ratio(num: f64, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num / den as f64)
    }
}

/// Runs the semi-supervised loop for one strategy and seed.
pub fn run_semi_supervised(
    cfg: &SimulationConfig,
    strategy: Strategy,
    seed: u64,
) -> Result<StrategyRun, SimulatorError> {
    cfg.validate()?;
    let grid = build_grid(cfg.scene_width, cfg.scene_height, cfg.patch_size)?;
    let penalty_c = cfg.patch_size.hypot(cfg.patch_size);
    let n_labeled = cfg.labeled_count();

    let scenes = make_scenes(cfg, &grid, seed, cfg.scene_count, "field", "scene", "scene")?;
    let holdout = make_scenes(
        cfg,
        &grid,
        seed,
        cfg.holdout_scene_count,
        "holdout-field",
        "holdout-scene",
        "holdout",
    )?;
    let (labeled, unlabeled) = scenes.split_at(n_labeled);

    let mut bank = AsmBank::new(penalty_c)?;
    for scene in labeled {
        bank.register_scene(&scene.id, grid.len());
    }

    let feature_dim = 4;
    let mut labeled_tracks: Vec<Vec<FeatureTrack>> = labeled
        .iter()
        .map(|_| (0..grid.len()).map(|_| FeatureTrack::new(feature_dim)).collect())
        .collect();
    let mut unlabeled_tracks: Vec<Vec<FeatureTrack>> = unlabeled
        .iter()
        .map(|_| (0..grid.len()).map(|_| FeatureTrack::new(feature_dim)).collect())
        .collect();

    let mut teacher = EmaState::new(cfg.predictor.noise_params(0).to_vec(), cfg.ema_decay)?;
    let mut noise_mult = 1.0f64;
    let mut scorer: Option<UncertaintyScorer> = None;
    // Carried between scorer retrains.
    let mut uncer_loss = 0.0f64;

    // Run-level accumulators.
    let mut sel_total = 0usize;
    let mut cand_total = 0usize;
    let mut sel_count_err_sum = 0.0f64;
    let mut sel_dist_sum = 0.0f64;
    let mut sel_good = 0usize;
    let mut good_total = 0usize;

    let mut epoch_metrics = Vec::with_capacity(cfg.epochs as usize);
    let mut final_kappas: Vec<f64> = Vec::new();
    let mut final_densities: Vec<f64> = Vec::new();

    for t in 0..cfg.epochs {
        let student_base = cfg.predictor.scaled(noise_mult);

        // (1) Student predicts on labeled scenes; the bank accumulates the
        // strategy's surrogate distance.
        let mut sup_losses = Vec::new();
        for (si, scene) in labeled.iter().enumerate() {
            let mut pcfg = student_base;
            pcfg.seed = seeds::derive_indexed(seed, "noise", &[si as u64]);
            let pred = predict_noisy(&scene.gt, &grid, &pcfg, t)?;
            for (pi, patch) in grid.patches().iter().enumerate() {
                let pred_k = crop_points(&pred.points, patch)?;
                let gt_k = &scene.patch_gt[pi];
                let key = PatchKey::new(&scene.id, pi);
                let true_dist = spatial_matching_distance(&pred_k, gt_k, penalty_c)?.distance;
                sup_losses.push(true_dist / penalty_c);
                let surrogate = match strategy {
                    Strategy::Acd => counting_difference(&pred_k, gt_k),
                    Strategy::Awd => wasserstein_distance(&pred_k, gt_k, penalty_c)?,
                    Strategy::Hungarian => hungarian_drop_distance(&pred_k, gt_k),
                    _ => true_dist,
                };
                bank.record_raw(&key, surrogate)?;
                labeled_tracks[si][pi].add(&extract_features(&pred_k, patch));
            }
        }
        let sup_pred_loss = sup_losses.iter().sum::<f64>() / sup_losses.len() as f64;

        // (2) Train the scorer on the labeled surrogates.
        let train_now = (t + 1) % cfg.scorer_train_interval == 0 || t + 1 == cfg.epochs;
        if strategy.uses_scorer() && train_now {
            let mut samples = Vec::new();
            for (si, scene) in labeled.iter().enumerate() {
                for pi in 0..grid.len() {
                    let key = PatchKey::new(&scene.id, pi);
                    let raw = match strategy {
                        Strategy::WithoutAverage => bank.last_dist(&key),
                        _ => bank.asm(&key),
                    }
                    .expect("recorded this epoch");
                    samples.push(RankingSample::with_features(
                        raw,
                        labeled_tracks[si][pi].mean(),
                    ));
                }
            }
            let train_cfg = ScorerTrainConfig {
                epochs: cfg.scorer_epochs,
                step_size: cfg.scorer_step,
                seed: seeds::derive_indexed(seed, "trainer", &[t as u64]),
                mode: if cfg.scorer_batch_size == 0 {
                    TrainMode::FullBatch
                } else {
                    TrainMode::MiniBatch {
                        batch_size: cfg.scorer_batch_size,
                    }
                },
                loss: strategy.scorer_loss(),
            };
            match train_scorer(&samples, &train_cfg) {
                Ok((s, trace)) => {
                    uncer_loss = *trace.last().expect("non-empty trace");
                    scorer = Some(s);
                }
                // A flat surrogate (e.g. a noise-free predictor) leaves
                // nothing to rank; fall back to a neutral score.
                Err(RankingError::UnrankableDataset) => scorer = None,
                Err(e) => return Err(e.into()),
            }
        }

        // (3) EMA teacher tracks the student's effective noise, then
        // predicts and scores every unlabeled patch.
        teacher.update(&student_base.noise_params(t))?;
        let teacher_base = PredictorConfig::from_noise_params(teacher.teacher_params(), 0);

        let mut candidates: Vec<(PatchKey, PointSet, f64)> = Vec::new();
        let mut truth: BTreeMap<PatchKey, (f64, usize)> = BTreeMap::new();
        let mut kappas_this_epoch: Vec<f64> = Vec::new();
        let mut densities_this_epoch: Vec<f64> = Vec::new();
        for (ui, scene) in unlabeled.iter().enumerate() {
            let si = n_labeled + ui;
            let mut pcfg = teacher_base;
            pcfg.seed = seeds::derive_indexed(seed, "noise", &[si as u64]);
            let pred = predict_noisy(&scene.gt, &grid, &pcfg, t)?;
            for (pi, patch) in grid.patches().iter().enumerate() {
                let pred_k = crop_points(&pred.points, patch)?;
                let gt_k = &scene.patch_gt[pi];
                let key = PatchKey::new(&scene.id, pi);
                unlabeled_tracks[ui][pi].add(&extract_features(&pred_k, patch));
                let kappa = match strategy {
                    Strategy::WithoutFiltering => 0.0,
                    Strategy::Softmax => (1.0 - pred.patch_confidence[pi]).clamp(0.0, 1.0),
                    _ => scorer
                        .as_ref()
                        .map(|s| s.score(&unlabeled_tracks[ui][pi].mean()))
                        .unwrap_or(0.5),
                };
                let true_dist = spatial_matching_distance(&pred_k, gt_k, penalty_c)?.distance;
                truth.insert(key.clone(), (true_dist, gt_k.len()));
                kappas_this_epoch.push(kappa);
                densities_this_epoch.push(scene.patch_density[pi]);
                candidates.push((key, pred_k, kappa));
            }
        }

        // (4) Threshold schedule and selection.
        let threshold = cfg.schedule.threshold_at(t);
        let mut selected = select_pseudo_labels(candidates.clone(), threshold, cfg.boundary, t)?;
        if cfg.cutout {
            for label in selected.iter_mut() {
                apply_cutout(label, &grid, seed, t);
            }
        }

        // True-quality oracle: candidates in the better half by true
        // matching distance.
        let mut dists: Vec<f64> = candidates.iter().map(|(k, _, _)| truth[k].0).collect();
        dists.sort_by(f64::total_cmp);
        let good_cutoff = if dists.is_empty() {
            0.0
        } else {
            dists[(dists.len() - 1) / 2]
        };

        // (5) Feedback: count-correct labels shrink the student's noise,
        // bad ones grow it, weighted by lambda1.
        let n_cand = candidates.len();
        let mut q_sum = 0.0f64;
        let mut count_err_sum = 0.0f64;
        let mut dist_sum = 0.0f64;
        let mut good_selected = 0usize;
        for label in &selected {
            let (true_dist, gt_n) = truth[&label.key];
            let count_err = (label.points.len() as f64 - gt_n as f64).abs();
            let q = 1.0 - (true_dist / penalty_c / FEEDBACK_DIST_PIVOT).min(2.0);
            q_sum += if q >= 0.0 { q } else { FEEDBACK_HARM_FACTOR * q };
            count_err_sum += count_err;
            dist_sum += true_dist;
            if true_dist <= good_cutoff {
                good_selected += 1;
            }
        }
        let n_good = candidates
            .iter()
            .filter(|(k, _, _)| truth[k].0 <= good_cutoff)
            .count();
        if n_cand > 0 && threshold.is_some() {
            let signal = q_sum / n_cand as f64;
            noise_mult = (noise_mult * (1.0 - cfg.lambda1 * cfg.feedback_gain * signal))
                .clamp(NOISE_MULT_MIN, NOISE_MULT_MAX);
        }

        let pseudo_pred_loss = if selected.is_empty() {
            0.0
        } else {
            dist_sum / selected.len() as f64 / penalty_c
        };
        let composed =
            crate::selection::composed_loss(sup_pred_loss, uncer_loss, pseudo_pred_loss, cfg.lambda1)?;

        sel_total += selected.len();
        cand_total += n_cand;
        sel_count_err_sum += count_err_sum;
        sel_dist_sum += dist_sum;
        sel_good += good_selected;
        good_total += n_good;

        epoch_metrics.push(EpochMetrics {
            epoch: t,
            threshold,
            candidates: n_cand,
            selected: selected.len(),
            selected_count_mae: ratio(count_err_sum, selected.len()),
            selected_mean_dist: ratio(dist_sum, selected.len()),
            precision: ratio(good_selected as f64, selected.len()),
            recall: ratio(good_selected as f64, n_good),
            sup_pred_loss,
            uncer_loss,
            pseudo_pred_loss,
            composed_loss: composed,
            noise_multiplier: noise_mult,
        });

        if t + 1 == cfg.epochs {
            final_kappas = kappas_this_epoch;
            final_densities = densities_this_epoch;
        }
    }

    // Final evaluation on held-out scenes, averaged over several
    // independent prediction draws so the per-patch distance estimates the
    // patch's true expected quality rather than one noisy realization.
    let final_student = cfg.predictor.scaled(noise_mult);
    let mut scene_errs = Vec::with_capacity(holdout.len());
    let mut holdout_kappas = Vec::new();
    let mut holdout_dists = Vec::new();
    for (hi, scene) in holdout.iter().enumerate() {
        let mut count_err = 0.0f64;
        let mut dist_sums = alloc::vec![0.0f64; grid.len()];
        let mut conf_sums = alloc::vec![0.0f64; grid.len()];
        let mut tracks: Vec<FeatureTrack> =
            (0..grid.len()).map(|_| FeatureTrack::new(feature_dim)).collect();
        for rep in 0..HOLDOUT_EVAL_REPS {
            let mut pcfg = final_student;
            pcfg.seed = seeds::derive_indexed(seed, "holdout-noise", &[hi as u64, rep]);
            let pred = predict_noisy(&scene.gt, &grid, &pcfg, cfg.epochs)?;
            count_err += (pred.points.len() as f64 - scene.gt.len() as f64).abs();
            for (pi, patch) in grid.patches().iter().enumerate() {
                let pred_k = crop_points(&pred.points, patch)?;
                let gt_k = &scene.patch_gt[pi];
                dist_sums[pi] +=
                    spatial_matching_distance(&pred_k, gt_k, penalty_c)?.distance;
                conf_sums[pi] += pred.patch_confidence[pi];
                tracks[pi].add(&extract_features(&pred_k, patch));
            }
        }
        let reps = HOLDOUT_EVAL_REPS as f64;
        scene_errs.push(count_err / reps);
        for pi in 0..grid.len() {
            let kappa = match strategy {
                Strategy::WithoutFiltering => 0.0,
                Strategy::Softmax => (1.0 - conf_sums[pi] / reps).clamp(0.0, 1.0),
                _ => scorer
                    .as_ref()
                    .map(|s| s.score(&tracks[pi].mean()))
                    .unwrap_or(0.5),
            };
            holdout_kappas.push(kappa);
            holdout_dists.push(dist_sums[pi] / reps);
        }
    }
    let scene_mae = scene_errs.iter().sum::<f64>() / scene_errs.len().max(1) as f64;
    let scene_rmse = (scene_errs.iter().map(|e| e * e).sum::<f64>()
        / scene_errs.len().max(1) as f64)
        .sqrt();

    // Kendall between final scores and the normalized surrogate on the
    // training patches.
    let train_kendall = if strategy.uses_scorer() && scorer.is_some() {
        let s = scorer.as_ref().expect("checked");
        let keys: Vec<PatchKey> = labeled
            .iter()
            .flat_map(|scene| (0..grid.len()).map(move |pi| PatchKey::new(&scene.id, pi)))
            .collect();
        let batch = bank.normalize_batch(&keys)?;
        let kappas: Vec<f64> = labeled
            .iter()
            .enumerate()
            .flat_map(|(si, _)| {
                let s = &s;
                let tracks = &labeled_tracks[si];
                (0..grid.len()).map(move |pi| s.score(&tracks[pi].mean()))
            })
            .collect();
        stats::kendall_tau(&kappas, &batch.a_values)
    } else {
        None
    };

    let holdout_spearman = stats::spearman_rho(&holdout_kappas, &holdout_dists);

    let density_kappa_gap = quartile_gap(&final_kappas, &final_densities);

    let summary = RunSummary {
        candidates_total: cand_total,
        selected_total: sel_total,
        selected_count_mae: ratio(sel_count_err_sum, sel_total),
        selected_mean_dist: ratio(sel_dist_sum, sel_total),
        precision: ratio(sel_good as f64, sel_total),
        recall: if good_total == 0 {
            None
        } else {
            Some(sel_good as f64 / good_total as f64)
        },
        scene_mae,
        scene_rmse,
        final_noise_multiplier: noise_mult,
        holdout_spearman,
        train_kendall,
        density_kappa_gap,
    };

    Ok(StrategyRun {
        strategy,
        seed,
        epochs: epoch_metrics,
        summary,
    })
}

/// Mean score over top-quartile-density patches minus the mean over
/// bottom-quartile ones.
fn quartile_gap(kappas: &[f64], densities: &[f64]) -> Option<f64> {
    if kappas.len() < 8 {
        return None;
    }
    let mut order: Vec<usize> = (0..densities.len()).collect();
    order.sort_by(|&i, &j| densities[i].total_cmp(&densities[j]));
    let q = kappas.len() / 4;
    let bottom: f64 = order[..q].iter().map(|&i| kappas[i]).sum::<f64>() / q as f64;
    let top: f64 = order[order.len() - q..].iter().map(|&i| kappas[i]).sum::<f64>() / q as f64;
    Some(top - bottom)
}

/// Deletes pseudo-label points inside a random rectangle covering a quarter
/// of the patch area.
fn apply_cutout(label: &mut crate::selection::PseudoLabel, grid: &PatchGrid, seed: u64, epoch: u32) {
    let patch = grid
        .patch(label.key.patch_index)
        .expect("selected label references a grid patch");
    let mut rng = seeds::rng(seeds::derive_indexed(
        seed,
        "cutout",
        &[epoch as u64, crate::seeds::derive(0, &label.key.scene_id), label.key.patch_index as u64],
    ));
    let w = patch.width / 2.0;
    let h = patch.height / 2.0;
    let x0 = rng.random::<f64>() * (patch.width - w);
    let y0 = rng.random::<f64>() * (patch.height - h);
    let kept: Vec<_> = label
        .points
        .points()
        .iter()
        .filter(|p| !(p.x >= x0 && p.x < x0 + w && p.y >= y0 && p.y < y0 + h))
        .copied()
        .collect();
    label.points = PointSet::new(kept, label.points.frame_width(), label.points.frame_height())
        .expect("subset of a valid point set");
}

/// Runs every (strategy, seed) cell with shared scene and noise streams and
/// aggregates per-strategy summaries.
pub fn run_ablation_suite(
    cfg: &SimulationConfig,
    strategies: &[Strategy],
    seeds: &[u64],
) -> Result<AblationReport, SimulatorError> {
    if strategies.len() < 2 {
        return Err(SimulatorError::InvalidExperiment("need at least 2 strategies"));
    }
    if seeds.len() < 3 {
        return Err(SimulatorError::InvalidExperiment("need at least 3 seeds"));
    }
    cfg.validate()?;
    let mut runs = Vec::with_capacity(strategies.len() * seeds.len());
    for &strategy in strategies {
        for &seed in seeds {
            runs.push(run_semi_supervised(cfg, strategy, seed)?);
        }
    }
    let mut summaries = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let of_strategy: Vec<&StrategyRun> =
            runs.iter().filter(|r| r.strategy == strategy).collect();
        let collect = |f: &dyn Fn(&RunSummary) -> Option<f64>| -> Vec<f64> {
            of_strategy.iter().filter_map(|r| f(&r.summary)).collect()
        };
        summaries.push(StrategySummary {
            strategy,
            seeds: of_strategy.len(),
            selected_count_mae: Aggregate::over(&collect(&|s| s.selected_count_mae)),
            selected_mean_dist: Aggregate::over(&collect(&|s| s.selected_mean_dist)),
            precision: Aggregate::over(&collect(&|s| s.precision)),
            recall: Aggregate::over(&collect(&|s| s.recall)),
            scene_mae: Aggregate::over(&collect(&|s| Some(s.scene_mae))),
            scene_rmse: Aggregate::over(&collect(&|s| Some(s.scene_rmse))),
        });
    }
    Ok(AblationReport { runs, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A small, fast configuration for the unit tests.
    fn small_cfg() -> SimulationConfig {
        SimulationConfig {
            scene_count: 6,
            holdout_scene_count: 3,
            scene_width: 128.0,
            scene_height: 128.0,
            patch_size: 64.0,
            density_rows: 2,
            density_cols: 2,
            intensity_min: 1.0,
            intensity_max: 25.0,
            labeled_fraction: 0.34,
            epochs: 12,
            schedule: ThresholdSchedule::new(2, 10, 0.1, 0.6).unwrap(),
            scorer_epochs: 60,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = small_cfg();
        let a = run_semi_supervised(&cfg, Strategy::Ours, 5).unwrap();
        let b = run_semi_supervised(&cfg, Strategy::Ours, 5).unwrap();
        assert_eq!(a, b);
        let c = run_semi_supervised(&cfg, Strategy::Ours, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn strategies_share_base_streams() {
        // At epoch 0 no feedback has diverged the students yet, so the
        // supervised loss must be bit-identical across strategies.
        let cfg = small_cfg();
        let ours = run_semi_supervised(&cfg, Strategy::Ours, 3).unwrap();
        let raw = run_semi_supervised(&cfg, Strategy::WithoutFiltering, 3).unwrap();
        assert_eq!(ours.epochs[0].sup_pred_loss, raw.epochs[0].sup_pred_loss);
        assert_eq!(ours.epochs[0].candidates, raw.epochs[0].candidates);
    }

    #[test]
    fn without_filtering_selects_every_candidate() {
        let cfg = small_cfg();
        let run = run_semi_supervised(&cfg, Strategy::WithoutFiltering, 2).unwrap();
        for em in &run.epochs {
            if em.threshold.is_some() {
                assert_eq!(em.selected, em.candidates);
            } else {
                assert_eq!(em.selected, 0);
            }
        }
    }

    #[test]
    fn warmup_epochs_select_nothing() {
        let cfg = small_cfg();
        let run = run_semi_supervised(&cfg, Strategy::Ours, 2).unwrap();
        for em in &run.epochs {
            if em.epoch < 2 {
                assert_eq!(em.selected, 0);
                assert!(em.threshold.is_none());
            }
        }
    }

    #[test]
    fn fully_labeled_run_has_no_candidates() {
        let cfg = SimulationConfig {
            labeled_fraction: 1.0,
            ..small_cfg()
        };
        let run = run_semi_supervised(&cfg, Strategy::Ours, 1).unwrap();
        assert_eq!(run.summary.candidates_total, 0);
        assert_eq!(run.summary.selected_total, 0);
        assert_eq!(run.summary.final_noise_multiplier, 1.0);
    }

    #[test]
    fn zero_noise_predictor_reaches_zero_mae() {
        let cfg = SimulationConfig {
            predictor: PredictorConfig {
                jitter_sigma: 0.0,
                miss_rate_base: 0.0,
                miss_rate_density_coef: 0.0,
                false_positive_rate: 0.0,
                improvement_per_epoch: 1.0,
                seed: 0,
            },
            ..small_cfg()
        };
        let run = run_semi_supervised(&cfg, Strategy::Ours, 4).unwrap();
        assert_eq!(run.summary.scene_mae, 0.0);
        // With a flat surrogate the scorer is neutral at 0.5; once the
        // threshold passes it, everything is selected.
        let late = run.epochs.last().unwrap();
        assert_eq!(late.selected, late.candidates);
        assert_eq!(run.summary.selected_count_mae, Some(0.0));
    }

    #[test]
    fn degenerate_configs_are_rejected() {
        let mut cfg = small_cfg();
        cfg.labeled_fraction = 0.0;
        assert!(matches!(
            run_semi_supervised(&cfg, Strategy::Ours, 1),
            Err(SimulatorError::InvalidExperiment(_))
        ));
        let mut cfg = small_cfg();
        cfg.scene_count = 1;
        assert!(matches!(
            run_semi_supervised(&cfg, Strategy::Ours, 1),
            Err(SimulatorError::InvalidExperiment(_))
        ));
        let mut cfg = small_cfg();
        cfg.scene_width = 100.0; // not a multiple of 64
        assert!(matches!(
            run_semi_supervised(&cfg, Strategy::Ours, 1),
            Err(SimulatorError::InvalidConfig(_))
        ));
    }

    #[test]
    fn suite_requires_enough_cells() {
        let cfg = small_cfg();
        assert!(matches!(
            run_ablation_suite(&cfg, &[Strategy::Ours], &[1, 2, 3]),
            Err(SimulatorError::InvalidExperiment(_))
        ));
        assert!(matches!(
            run_ablation_suite(&cfg, &[Strategy::Ours, Strategy::Acd], &[1, 2]),
            Err(SimulatorError::InvalidExperiment(_))
        ));
    }

    #[test]
    fn suite_report_is_deterministic_and_complete() {
        let cfg = SimulationConfig {
            epochs: 8,
            ..small_cfg()
        };
        let strategies = [Strategy::Ours, Strategy::Softmax];
        let seeds = [1, 2, 3];
        let a = run_ablation_suite(&cfg, &strategies, &seeds).unwrap();
        let b = run_ablation_suite(&cfg, &strategies, &seeds).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.runs.len(), 6);
        assert_eq!(a.summaries.len(), 2);
        assert!(a.summaries.iter().all(|s| s.seeds == 3));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("bogus".parse::<Strategy>().is_err());
        let json = serde_json::to_string(&Strategy::WithoutFiltering).unwrap();
        assert_eq!(json, "\"w/o-filtering\"");
    }

    #[test]
    fn cutout_removes_points() {
        let cfg = SimulationConfig {
            cutout: true,
            ..small_cfg()
        };
        // Smoke: the run completes and still selects labels.
        let run = run_semi_supervised(&cfg, Strategy::WithoutFiltering, 8).unwrap();
        assert!(run.summary.selected_total > 0);
    }

    #[test]
    fn density_coupling_raises_kappa_in_dense_patches() {
        // Needs enough labeled patches and accumulation epochs for the
        // density signal to dominate the surrogate noise.
        let cfg = SimulationConfig {
            scene_count: 5,
            holdout_scene_count: 2,
            labeled_fraction: 0.4,
            epochs: 24,
            schedule: ThresholdSchedule::new(4, 20, 0.1, 0.6).unwrap(),
            ..SimulationConfig::default()
        };
        let run = run_semi_supervised(&cfg, Strategy::Ours, 11).unwrap();
        let gap = run.summary.density_kappa_gap.expect("enough patches");
        assert!(gap > 0.0, "kappa gap {gap}");
    }
}

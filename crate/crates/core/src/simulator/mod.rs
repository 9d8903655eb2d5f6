//! Synthetic scenes, a parameterized noisy predictor, and the
//! semi-supervised loop used to compare pseudo-label filtering strategies.
//!
//! Scenes are inhomogeneous Poisson point processes over a coarse intensity
//! grid, standing in for crowd images. The predictor corrupts ground truth
//! with density-coupled misses, Gaussian jitter, and spurious points, and
//! reports a per-patch softmax-style confidence that is systematically
//! overconfident in dense patches (misses never lower it, and dense patches
//! receive extra miscalibration noise). That overconfidence is what the
//! softmax filtering baseline inherits.
//!
//! Everything is deterministic: each point, patch, and epoch draws from its
//! own seed sub-stream, so experiment variants with different noise
//! parameters still consume identical base draws.

mod harness;

pub use harness::{
    run_ablation_suite, run_semi_supervised, AblationReport, Aggregate, EpochMetrics, RunSummary,
    SimulationConfig, Strategy, StrategyRun, StrategySummary,
};

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::asm::AsmError;
use crate::geometry::{GeometryError, PatchGrid, Point, PointSet};
use crate::matching::MatchingError;
use crate::ranking::RankingError;
use crate::seeds;
use crate::selection::SelectionError;

/// Errors from scene generation, prediction, and the harness.
#[derive(Debug, Clone, PartialEq)]
pub enum SimulatorError {
    /// A configuration value was outside its domain.
    InvalidConfig(&'static str),
    /// The experiment setup is degenerate (no labeled data, too few
    /// scenes/strategies/seeds).
    InvalidExperiment(&'static str),
    Geometry(GeometryError),
    Matching(MatchingError),
    Asm(AsmError),
    Ranking(RankingError),
    Selection(SelectionError),
}

impl fmt::Display for SimulatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimulatorError::InvalidConfig(what) => write!(f, "invalid config: {what}"),
            SimulatorError::InvalidExperiment(what) => write!(f, "invalid experiment: {what}"),
            SimulatorError::Geometry(e) => write!(f, "{e}"),
            SimulatorError::Matching(e) => write!(f, "{e}"),
            SimulatorError::Asm(e) => write!(f, "{e}"),
            SimulatorError::Ranking(e) => write!(f, "{e}"),
            SimulatorError::Selection(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SimulatorError {}

impl From<GeometryError> for SimulatorError {
    fn from(e: GeometryError) -> Self {
        SimulatorError::Geometry(e)
    }
}
impl From<MatchingError> for SimulatorError {
    fn from(e: MatchingError) -> Self {
        SimulatorError::Matching(e)
    }
}
impl From<AsmError> for SimulatorError {
    fn from(e: AsmError) -> Self {
        SimulatorError::Asm(e)
    }
}
impl From<RankingError> for SimulatorError {
    fn from(e: RankingError) -> Self {
        SimulatorError::Ranking(e)
    }
}
impl From<SelectionError> for SimulatorError {
    fn from(e: SelectionError) -> Self {
        SimulatorError::Selection(e)
    }
}

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

/// Piecewise-constant intensity map over a coarse grid: `intensities[cell]`
/// is the expected number of points in that cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    rows: usize,
    cols: usize,
    intensities: Vec<f64>,
}

impl DensityField {
    pub fn new(rows: usize, cols: usize, intensities: Vec<f64>) -> Result<Self, SimulatorError> {
        if rows == 0 || cols == 0 {
            return Err(SimulatorError::InvalidConfig("density field dimensions"));
        }
        if intensities.len() != rows * cols {
            return Err(SimulatorError::InvalidConfig("density field size"));
        }
        if intensities.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SimulatorError::InvalidConfig("density intensities"));
        }
        Ok(DensityField {
            rows,
            cols,
            intensities,
        })
    }

    /// A constant field.
    pub fn uniform(rows: usize, cols: usize, intensity: f64) -> Result<Self, SimulatorError> {
        DensityField::new(rows, cols, alloc::vec![intensity; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }
}

/// Configuration of one synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub width: f64,
    pub height: f64,
    pub density_field: DensityField,
    pub seed: u64,
}

fn sample_poisson<R: Rng>(rng: &mut R, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(lambda).expect("validated lambda");
    let draw: f64 = dist.sample(rng);
    draw as usize
}

/// Draws an inhomogeneous Poisson scene: per coarse cell, a Poisson count
/// at the cell's intensity and uniform positions within the cell.
/// Deterministic per seed.
pub fn generate_scene(cfg: &SceneConfig) -> Result<PointSet, SimulatorError> {
    if !cfg.width.is_finite() || !cfg.height.is_finite() || cfg.width <= 0.0 || cfg.height <= 0.0 {
        return Err(SimulatorError::InvalidConfig("scene dimensions"));
    }
    let field = &cfg.density_field;
    let cell_w = cfg.width / field.cols as f64;
    let cell_h = cfg.height / field.rows as f64;
    let mut points = Vec::new();
    for row in 0..field.rows {
        for col in 0..field.cols {
            let cell = row * field.cols + col;
            let mut rng = seeds::rng(seeds::derive_indexed(cfg.seed, "scene-cell", &[cell as u64]));
            let count = sample_poisson(&mut rng, field.intensities[cell]);
            let x0 = col as f64 * cell_w;
            let y0 = row as f64 * cell_h;
            for _ in 0..count {
                let x = x0 + rng.random::<f64>() * cell_w;
                let y = y0 + rng.random::<f64>() * cell_h;
                points.push(Point::new(x, y));
            }
        }
    }
    Ok(PointSet::new(points, cfg.width, cfg.height)?)
}

// ---------------------------------------------------------------------------
// Noisy predictor
// ---------------------------------------------------------------------------

/// Parameters of the synthetic predictor. It errs more in dense regions:
/// the miss probability grows with the local (per-patch) ground-truth
/// count. All noise terms shrink by `improvement_per_epoch` each epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    /// Isotropic Gaussian jitter applied to retained points, pixels.
    pub jitter_sigma: f64,
    /// Base probability of dropping a ground-truth point.
    pub miss_rate_base: f64,
    /// Additional miss probability per unit of local density.
    pub miss_rate_density_coef: f64,
    /// Expected spurious points per patch.
    pub false_positive_rate: f64,
    /// Multiplicative decay of all noise terms per epoch, in `(0, 1]`.
    pub improvement_per_epoch: f64,
    pub seed: u64,
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<(), SimulatorError> {
        let finite = [
            self.jitter_sigma,
            self.miss_rate_base,
            self.miss_rate_density_coef,
            self.false_positive_rate,
            self.improvement_per_epoch,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(SimulatorError::InvalidConfig("predictor parameters"));
        }
        if self.jitter_sigma < 0.0
            || self.miss_rate_base < 0.0
            || self.miss_rate_density_coef < 0.0
            || self.false_positive_rate < 0.0
        {
            return Err(SimulatorError::InvalidConfig("negative noise parameter"));
        }
        if self.improvement_per_epoch <= 0.0 || self.improvement_per_epoch > 1.0 {
            return Err(SimulatorError::InvalidConfig("improvement_per_epoch"));
        }
        Ok(())
    }

    /// All noise terms scaled by a factor; the seed and decay are kept.
    pub fn scaled(&self, factor: f64) -> PredictorConfig {
        PredictorConfig {
            jitter_sigma: self.jitter_sigma * factor,
            miss_rate_base: self.miss_rate_base * factor,
            miss_rate_density_coef: self.miss_rate_density_coef * factor,
            false_positive_rate: self.false_positive_rate * factor,
            ..*self
        }
    }

    /// The effective noise vector at an epoch:
    /// `[jitter, miss_base, miss_coef, fp] * decay^epoch`. This is the
    /// parameter vector the EMA teacher tracks.
    pub fn noise_params(&self, epoch: u32) -> [f64; 4] {
        let d = self.improvement_per_epoch.powi(epoch as i32);
        [
            self.jitter_sigma * d,
            self.miss_rate_base * d,
            self.miss_rate_density_coef * d,
            self.false_positive_rate * d,
        ]
    }

    /// A predictor realizing a noise vector directly (no further decay).
    pub fn from_noise_params(params: &[f64], seed: u64) -> PredictorConfig {
        PredictorConfig {
            jitter_sigma: params[0].max(0.0),
            miss_rate_base: params[1].max(0.0),
            miss_rate_density_coef: params[2].max(0.0),
            false_positive_rate: params[3].max(0.0),
            improvement_per_epoch: 1.0,
            seed,
        }
    }
}

/// Radius in pixels of the local crowd-density neighborhood.
const DENSITY_RADIUS: f64 = 56.0;
/// Local density (same-patch neighbors within [`DENSITY_RADIUS`]) above
/// which confidence miscalibration saturates.
const CONF_DENSE_REF: f64 = 8.0;
/// Systematic confidence inflation in fully dense patches.
const CONF_OVERCONF_BIAS: f64 = 0.45;
/// Scale of the extra miscalibration noise in dense patches.
const CONF_NOISE_SCALE: f64 = 0.15;
/// Spurious proposals carry high confidence.
const FP_CONF_LO: f64 = 0.6;
const FP_CONF_SPAN: f64 = 0.35;
/// Confidence of an empty patch: predicting "nobody here" reads as fairly
/// certain.
const EMPTY_PATCH_CONF: f64 = 0.75;

/// A noisy prediction: the predicted points plus a per-patch softmax-style
/// confidence in `[0, 1]` (mean proposal confidence, miscalibrated in dense
/// patches).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub points: PointSet,
    pub patch_confidence: Vec<f64>,
}

/// Per-point local crowd density: the number of other ground-truth points
/// of the same patch within [`DENSITY_RADIUS`]. Restricting the
/// neighborhood to the patch keeps a patch's error statistics a function
/// of that patch alone.
fn point_densities(gt: &PointSet, grid: &PatchGrid) -> Vec<f64> {
    let r2 = DENSITY_RADIUS * DENSITY_RADIUS;
    let pts = gt.points();
    let mut by_patch = alloc::vec![Vec::new(); grid.len()];
    for (i, p) in pts.iter().enumerate() {
        by_patch[grid.patch_index_for(p)].push(i);
    }
    let mut densities = alloc::vec![0.0f64; pts.len()];
    for members in &by_patch {
        for (mi, &i) in members.iter().enumerate() {
            for &j in &members[mi + 1..] {
                let dx = pts[i].x - pts[j].x;
                let dy = pts[i].y - pts[j].y;
                if dx * dx + dy * dy <= r2 {
                    densities[i] += 1.0;
                    densities[j] += 1.0;
                }
            }
        }
    }
    densities
}

/// Simulates one model prediction pass over a scene.
///
/// Per ground-truth point: dropped with probability
/// `clamp01(miss_rate_base + miss_rate_density_coef * local_density) * decay^epoch`
/// (local density = kernel-smoothed crowd density around the point's
/// patch), otherwise jittered by an isotropic Gaussian with sigma
/// `jitter_sigma * decay^epoch` and clipped to the frame. Per patch,
/// `Poisson(false_positive_rate * decay^epoch)` spurious points appear at
/// uniform positions.
///
/// Each point and patch draws from its own seed sub-stream keyed by
/// `(seed, epoch, index)`, so predictions with different noise parameters
/// share base draws.
pub fn predict_noisy(
    gt: &PointSet,
    grid: &PatchGrid,
    cfg: &PredictorConfig,
    epoch: u32,
) -> Result<Prediction, SimulatorError> {
    cfg.validate()?;
    if grid.scene_width() != gt.frame_width() || grid.scene_height() != gt.frame_height() {
        return Err(SimulatorError::InvalidConfig("grid does not match the scene frame"));
    }
    let decay = cfg.improvement_per_epoch.powi(epoch as i32);
    let sigma = cfg.jitter_sigma * decay;
    let fp_rate = cfg.false_positive_rate * decay;
    let width = gt.frame_width();
    let height = gt.frame_height();

    let density = point_densities(gt, grid);
    // Patch-level density for the confidence model: mean local density of
    // the patch's ground-truth points.
    let mut patch_density = alloc::vec![(0.0f64, 0usize); grid.len()];
    for (p, d) in gt.points().iter().zip(&density) {
        let (sum, n) = &mut patch_density[grid.patch_index_for(p)];
        *sum += d;
        *n += 1;
    }
    let patch_density: Vec<f64> = patch_density
        .iter()
        .map(|(sum, n)| if *n == 0 { 0.0 } else { sum / *n as f64 })
        .collect();

    let jitter = Normal::new(0.0, 1.0).expect("unit normal");
    let mut points = Vec::with_capacity(gt.len());
    // Per-patch confidence accumulators: (sum, count).
    let mut conf_acc = alloc::vec![(0.0f64, 0usize); grid.len()];

    for (idx, p) in gt.points().iter().enumerate() {
        let mut rng = seeds::rng(seeds::derive_indexed(
            cfg.seed,
            "pred-point",
            &[epoch as u64, idx as u64],
        ));
        let local = density[idx];
        let p_miss =
            (cfg.miss_rate_base + cfg.miss_rate_density_coef * local).clamp(0.0, 1.0) * decay;
        if rng.random::<f64>() < p_miss {
            continue;
        }
        let (dx, dy) = if sigma > 0.0 {
            (
                sigma * jitter.sample(&mut rng),
                sigma * jitter.sample(&mut rng),
            )
        } else {
            (0.0, 0.0)
        };
        let q = Point::new((p.x + dx).clamp(0.0, width), (p.y + dy).clamp(0.0, height));
        // Proposal confidence decays with the jitter magnitude; misses do
        // not enter, which is the root of the overconfidence in dense
        // patches.
        let conf = (-(dx.hypot(dy)) / (cfg.jitter_sigma + 0.5)).exp();
        let (sum, n) = &mut conf_acc[grid.patch_index_for(&q)];
        *sum += conf;
        *n += 1;
        points.push(q);
    }

    for (pi, patch) in grid.patches().iter().enumerate() {
        let mut rng = seeds::rng(seeds::derive_indexed(
            cfg.seed,
            "pred-fp",
            &[epoch as u64, pi as u64],
        ));
        let n_fp = sample_poisson(&mut rng, fp_rate);
        for _ in 0..n_fp {
            let x = patch.origin_x + rng.random::<f64>() * patch.width;
            let y = patch.origin_y + rng.random::<f64>() * patch.height;
            points.push(Point::new(x, y));
            let conf = FP_CONF_LO + FP_CONF_SPAN * rng.random::<f64>();
            let (sum, n) = &mut conf_acc[pi];
            *sum += conf;
            *n += 1;
        }
    }

    let mut patch_confidence = Vec::with_capacity(grid.len());
    for (pi, (sum, n)) in conf_acc.iter().enumerate() {
        let base = if *n == 0 {
            EMPTY_PATCH_CONF
        } else {
            sum / *n as f64
        };
        let mut rng = seeds::rng(seeds::derive_indexed(
            cfg.seed,
            "pred-conf",
            &[epoch as u64, pi as u64],
        ));
        let dense_frac = (patch_density[pi] / CONF_DENSE_REF).min(1.0);
        let miscal = CONF_OVERCONF_BIAS * dense_frac
            + CONF_NOISE_SCALE * dense_frac * jitter.sample(&mut rng);
        patch_confidence.push((base + miscal).clamp(0.0, 1.0));
    }

    Ok(Prediction {
        points: PointSet::new(points, width, height)?,
        patch_confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;
    use alloc::vec;

    fn field(intensity: f64) -> DensityField {
        DensityField::uniform(1, 1, intensity).unwrap()
    }

    #[test]
    fn zero_intensity_gives_empty_scene() {
        let cfg = SceneConfig {
            width: 64.0,
            height: 64.0,
            density_field: field(0.0),
            seed: 1,
        };
        assert!(generate_scene(&cfg).unwrap().is_empty());
    }

    #[test]
    fn scenes_are_seed_deterministic() {
        let cfg = SceneConfig {
            width: 128.0,
            height: 128.0,
            density_field: DensityField::new(2, 2, vec![1.0, 5.0, 10.0, 0.5]).unwrap(),
            seed: 42,
        };
        let a = generate_scene(&cfg).unwrap();
        let b = generate_scene(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(&SceneConfig { seed: 43, ..cfg.clone() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_counts_have_the_right_mean() {
        // Mean count over many seeds concentrates around the intensity.
        let lambda = 12.0;
        let n_seeds = 1000u64;
        let mut total = 0usize;
        for seed in 0..n_seeds {
            let cfg = SceneConfig {
                width: 64.0,
                height: 64.0,
                density_field: field(lambda),
                seed,
            };
            total += generate_scene(&cfg).unwrap().len();
        }
        let mean = total as f64 / n_seeds as f64;
        // Three-sigma band for the mean of n Poisson(lambda) draws.
        let band = 3.0 * (lambda / n_seeds as f64).sqrt();
        assert!(
            (mean - lambda).abs() < band * lambda.sqrt().max(1.0),
            "mean {mean} vs lambda {lambda}"
        );
        assert!((mean - lambda).abs() < band + 0.35, "tight band: mean {mean}");
    }

    #[test]
    fn zero_noise_prediction_equals_ground_truth() {
        let cfg = SceneConfig {
            width: 128.0,
            height: 128.0,
            density_field: DensityField::new(2, 2, vec![3.0, 8.0, 1.0, 6.0]).unwrap(),
            seed: 7,
        };
        let gt = generate_scene(&cfg).unwrap();
        let grid = build_grid(128.0, 128.0, 64.0).unwrap();
        let predictor = PredictorConfig {
            jitter_sigma: 0.0,
            miss_rate_base: 0.0,
            miss_rate_density_coef: 0.0,
            false_positive_rate: 0.0,
            improvement_per_epoch: 1.0,
            seed: 9,
        };
        let pred = predict_noisy(&gt, &grid, &predictor, 0).unwrap();
        assert_eq!(pred.points, gt);
    }

    #[test]
    fn certain_miss_empties_the_prediction() {
        let cfg = SceneConfig {
            width: 64.0,
            height: 64.0,
            density_field: field(9.0),
            seed: 3,
        };
        let gt = generate_scene(&cfg).unwrap();
        assert!(!gt.is_empty());
        let grid = build_grid(64.0, 64.0, 64.0).unwrap();
        let predictor = PredictorConfig {
            jitter_sigma: 0.0,
            miss_rate_base: 1.0,
            miss_rate_density_coef: 0.0,
            false_positive_rate: 0.0,
            improvement_per_epoch: 1.0,
            seed: 9,
        };
        let pred = predict_noisy(&gt, &grid, &predictor, 0).unwrap();
        assert!(pred.points.is_empty());
    }

    #[test]
    fn predictions_are_seed_deterministic() {
        let cfg = SceneConfig {
            width: 128.0,
            height: 128.0,
            density_field: DensityField::new(2, 2, vec![4.0, 20.0, 2.0, 12.0]).unwrap(),
            seed: 5,
        };
        let gt = generate_scene(&cfg).unwrap();
        let grid = build_grid(128.0, 128.0, 64.0).unwrap();
        let predictor = PredictorConfig {
            jitter_sigma: 2.0,
            miss_rate_base: 0.1,
            miss_rate_density_coef: 0.01,
            false_positive_rate: 0.5,
            improvement_per_epoch: 0.95,
            seed: 11,
        };
        let a = predict_noisy(&gt, &grid, &predictor, 3).unwrap();
        let b = predict_noisy(&gt, &grid, &predictor, 3).unwrap();
        assert_eq!(a, b);
        let c = predict_noisy(&gt, &grid, &predictor, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_decays_with_epochs() {
        let cfg = SceneConfig {
            width: 128.0,
            height: 128.0,
            density_field: DensityField::new(2, 2, vec![15.0, 15.0, 15.0, 15.0]).unwrap(),
            seed: 13,
        };
        let gt = generate_scene(&cfg).unwrap();
        let grid = build_grid(128.0, 128.0, 64.0).unwrap();
        let predictor = PredictorConfig {
            jitter_sigma: 4.0,
            miss_rate_base: 0.3,
            miss_rate_density_coef: 0.0,
            false_positive_rate: 2.0,
            improvement_per_epoch: 0.9,
            seed: 17,
        };
        let count_err = |epoch: u32| {
            let pred = predict_noisy(&gt, &grid, &predictor, epoch).unwrap();
            (pred.points.len() as f64 - gt.len() as f64).abs()
        };
        // Averaged over several epochs near the start vs far in: noise has
        // decayed by a factor of ~0.9^40, so errors must shrink.
        let early: f64 = (0..5).map(count_err).sum();
        let late: f64 = (40..45).map(count_err).sum();
        assert!(late < early, "late {late} vs early {early}");
    }

    #[test]
    fn dense_patches_get_confident_despite_misses() {
        // One dense and one sparse patch; the dense one misses many points
        // yet reports confidence at least as high on average.
        let cfg = SceneConfig {
            width: 128.0,
            height: 64.0,
            density_field: DensityField::new(1, 2, vec![30.0, 2.0]).unwrap(),
            seed: 23,
        };
        let gt = generate_scene(&cfg).unwrap();
        let grid = build_grid(128.0, 64.0, 64.0).unwrap();
        let predictor = PredictorConfig {
            jitter_sigma: 2.0,
            miss_rate_base: 0.02,
            miss_rate_density_coef: 0.01,
            false_positive_rate: 0.2,
            improvement_per_epoch: 1.0,
            seed: 29,
        };
        let mut dense_conf = 0.0;
        let mut sparse_conf = 0.0;
        let reps = 40;
        for epoch in 0..reps {
            let pred = predict_noisy(&gt, &grid, &predictor, epoch).unwrap();
            dense_conf += pred.patch_confidence[0];
            sparse_conf += pred.patch_confidence[1];
        }
        assert!(
            dense_conf >= sparse_conf - 0.05 * reps as f64,
            "dense {dense_conf} vs sparse {sparse_conf}"
        );
    }
}

//! Pairwise uncertainty ranking loss and the trainable scorer.
//!
//! The loss compares a scorer output `kappa` against the normalized
//! surrogate `a` over every ordered pair with a strict surrogate gap:
//!
//! ```text
//! L = sum over a_i > a_j of  |a_i - a_j| * log2(1 + exp(-(kappa_i - kappa_j)))
//! ```
//!
//! A pair ranked against the surrogate order (`a_i > a_j` but
//! `kappa_i < kappa_j`) pays a large penalty, weighted by the surrogate
//! gap; tied pairs contribute nothing. The gradient is analytic and checked
//! against central finite differences in the tests.
//!
//! The scorer itself is a squashed linear model over hand-built patch
//! statistics. It stands in for a learned uncertainty head: the claims
//! under test concern the surrogate and the loss, not representation
//! learning, and a linear model keeps every experiment CPU-fast and
//! deterministic.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::asm::min_max_normalize;
use crate::geometry::{PatchSpec, PointSet};
use crate::seeds;

const LN_2: f64 = core::f64::consts::LN_2;

/// Errors from loss evaluation and scorer training.
#[derive(Debug, Clone, PartialEq)]
pub enum RankingError {
    /// A surrogate value, score, or feature was NaN or infinite.
    NonFiniteInput,
    /// The batch was empty.
    EmptyBatch,
    /// No pair with a strict surrogate gap exists; nothing to rank.
    UnrankableDataset,
    /// A training parameter was outside its domain.
    InvalidArgument(&'static str),
}

impl fmt::Display for RankingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankingError::NonFiniteInput => write!(f, "non-finite input"),
            RankingError::EmptyBatch => write!(f, "batch must contain at least one sample"),
            RankingError::UnrankableDataset => {
                write!(f, "no pair with a strict surrogate gap; dataset is unrankable")
            }
            RankingError::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
        }
    }
}

impl core::error::Error for RankingError {}

/// One patch's contribution to the ranking loss: the normalized surrogate
/// target, the current score, and the patch descriptor used by the trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingSample {
    /// Normalized surrogate in `[0, 1]`.
    pub a: f64,
    /// Scorer output in `(0, 1)`.
    pub kappa: f64,
    /// Patch descriptor; may be empty when only the loss is evaluated.
    pub features: Vec<f64>,
}

impl RankingSample {
    pub fn new(a: f64, kappa: f64) -> Self {
        RankingSample {
            a,
            kappa,
            features: Vec::new(),
        }
    }

    pub fn with_features(a: f64, features: Vec<f64>) -> Self {
        RankingSample {
            a,
            kappa: 0.5,
            features,
        }
    }
}

/// `ln(1 + e^x)` without overflow for large `|x|`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function, stable on both tails.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn validate_batch(batch: &[RankingSample]) -> Result<(), RankingError> {
    if batch.is_empty() {
        return Err(RankingError::EmptyBatch);
    }
    if batch.iter().any(|s| !s.a.is_finite() || !s.kappa.is_finite()) {
        return Err(RankingError::NonFiniteInput);
    }
    Ok(())
}

/// The pairwise ranking loss over every ordered pair with `a_i > a_j`
/// (strict; ties contribute nothing). Batches with no strict pair, in
/// particular all-equal surrogates, have loss 0.
pub fn lambda_rank_loss(batch: &[RankingSample]) -> Result<f64, RankingError> {
    validate_batch(batch)?;
    let mut loss = 0.0;
    for i in 0..batch.len() {
        for j in 0..batch.len() {
            if batch[i].a > batch[j].a {
                let gap = batch[i].a - batch[j].a;
                let d = batch[i].kappa - batch[j].kappa;
                loss += gap * softplus(-d) / LN_2;
            }
        }
    }
    Ok(loss)
}

/// Exact gradient of [`lambda_rank_loss`] with respect to each `kappa`.
///
/// A pair with `a_i > a_j` contributes
/// `-|a_i - a_j| * sigmoid(-(kappa_i - kappa_j)) / ln 2` to `d/d kappa_i`
/// and its negation to `d/d kappa_j`.
pub fn lambda_rank_gradient(batch: &[RankingSample]) -> Result<Vec<f64>, RankingError> {
    validate_batch(batch)?;
    let mut grad = vec![0.0f64; batch.len()];
    for i in 0..batch.len() {
        for j in 0..batch.len() {
            if batch[i].a > batch[j].a {
                let gap = batch[i].a - batch[j].a;
                let d = batch[i].kappa - batch[j].kappa;
                let g = gap * sigmoid(-d) / LN_2;
                grad[i] -= g;
                grad[j] += g;
            }
        }
    }
    Ok(grad)
}

/// Pointwise L1 loss `sum |kappa_i - a_i|`; the ablation alternative to the
/// ranking loss.
fn l1_loss(batch: &[RankingSample]) -> f64 {
    batch.iter().map(|s| (s.kappa - s.a).abs()).sum()
}

fn l1_gradient(batch: &[RankingSample]) -> Vec<f64> {
    batch
        .iter()
        .map(|s| {
            if s.kappa > s.a {
                1.0
            } else if s.kappa < s.a {
                -1.0
            } else {
                0.0
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Patch features
// ---------------------------------------------------------------------------

/// Points closer than this to a patch border count as border points.
pub const BORDER_MARGIN: f64 = 4.0;
/// Sub-grid resolution for the local density variance feature.
pub const DENSITY_SUBGRID: usize = 4;

/// Names of the extracted features, in order.
pub const FEATURE_NAMES: [&str; 4] = ["count", "mean_nn_dist", "border_count", "cell_count_var"];

/// Deterministic patch descriptor for a prediction cropped to a patch:
/// `[predicted count, mean nearest-neighbor distance (0 if fewer than two
/// points), points within 4 px of the patch border, population variance of
/// per-cell counts over a 4x4 sub-grid]`.
pub fn extract_features(patch_pred: &PointSet, patch: &PatchSpec) -> Vec<f64> {
    let pts = patch_pred.points();
    let count = pts.len() as f64;

    let mean_nn = if pts.len() < 2 {
        0.0
    } else {
        let mut total = 0.0;
        for (i, p) in pts.iter().enumerate() {
            let mut nearest = f64::INFINITY;
            for (j, q) in pts.iter().enumerate() {
                if i != j {
                    nearest = nearest.min(p.distance(q));
                }
            }
            total += nearest;
        }
        total / count
    };

    let border = pts
        .iter()
        .filter(|p| {
            p.x <= BORDER_MARGIN
                || p.x >= patch.width - BORDER_MARGIN
                || p.y <= BORDER_MARGIN
                || p.y >= patch.height - BORDER_MARGIN
        })
        .count() as f64;

    let n = DENSITY_SUBGRID;
    let mut cells = vec![0.0f64; n * n];
    let cell_w = patch.width / n as f64;
    let cell_h = patch.height / n as f64;
    for p in pts {
        let cx = ((p.x / cell_w).floor() as usize).min(n - 1);
        let cy = ((p.y / cell_h).floor() as usize).min(n - 1);
        cells[cy * n + cx] += 1.0;
    }
    let cell_mean = cells.iter().sum::<f64>() / cells.len() as f64;
    let cell_var = cells
        .iter()
        .map(|c| (c - cell_mean) * (c - cell_mean))
        .sum::<f64>()
        / cells.len() as f64;

    vec![count, mean_nn, border, cell_var]
}

// ---------------------------------------------------------------------------
// Scorer
// ---------------------------------------------------------------------------

/// A squashed linear uncertainty scorer: `kappa = sigmoid(w . x + b)`,
/// strictly inside `(0, 1)` and deterministic for fixed weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyScorer {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_spec: Vec<String>,
}

impl UncertaintyScorer {
    /// Scores a feature vector. The vector length must match the weights.
    pub fn score(&self, features: &[f64]) -> f64 {
        assert_eq!(
            features.len(),
            self.weights.len(),
            "feature vector length does not match scorer"
        );
        let z: f64 = self
            .weights
            .iter()
            .zip(features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias;
        sigmoid(z)
    }
}

/// Which objective drives scorer training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerLoss {
    /// The pairwise ranking loss; the primary path.
    #[default]
    LambdaRank,
    /// Pointwise L1 regression onto the surrogate; ablation only.
    PointwiseL1,
}

/// Batching mode for scorer training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// One gradient step per epoch over the whole sample set. The default:
    /// order-free and fully deterministic.
    FullBatch,
    /// Seed-shuffled mini-batches, re-normalizing surrogates per batch.
    MiniBatch { batch_size: usize },
}

impl Default for TrainMode {
    fn default() -> Self {
        TrainMode::FullBatch
    }
}

/// Configuration for [`train_scorer`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorerTrainConfig {
    pub epochs: u32,
    pub step_size: f64,
    pub seed: u64,
    pub mode: TrainMode,
    pub loss: ScorerLoss,
}

impl Default for ScorerTrainConfig {
    fn default() -> Self {
        ScorerTrainConfig {
            epochs: 200,
            step_size: 0.5,
            seed: 0,
            mode: TrainMode::FullBatch,
            loss: ScorerLoss::LambdaRank,
        }
    }
}

struct Standardizer {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardizer {
    fn fit(samples: &[RankingSample], dim: usize) -> Self {
        let n = samples.len() as f64;
        let mut means = vec![0.0f64; dim];
        for s in samples {
            for (m, x) in means.iter_mut().zip(&s.features) {
                *m += x / n;
            }
        }
        let mut scales = vec![0.0f64; dim];
        for s in samples {
            for k in 0..dim {
                let d = s.features[k] - means[k];
                scales[k] += d * d / n;
            }
        }
        for s in scales.iter_mut() {
            *s = s.sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Standardizer { means, scales }
    }

    fn apply(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

/// Evaluates the configured loss over a batch with the given weights;
/// `batch` kappas are refreshed in place.
///
/// The ranking loss is evaluated on the raw linear score: it only depends
/// on score differences, and squashing them into `(0, 1)` first would cap
/// every difference at 1 and put a hard floor under the loss. The L1 loss
/// regresses onto surrogates in `[0, 1]` and goes through the sigmoid.
fn eval_batch(
    batch: &mut [RankingSample],
    std_features: &[Vec<f64>],
    idx: &[usize],
    w: &[f64],
    b: f64,
    loss: ScorerLoss,
) -> f64 {
    for (slot, &i) in idx.iter().enumerate() {
        let z: f64 = w
            .iter()
            .zip(&std_features[i])
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + b;
        batch[slot].kappa = match loss {
            ScorerLoss::LambdaRank => z,
            ScorerLoss::PointwiseL1 => sigmoid(z),
        };
    }
    match loss {
        ScorerLoss::LambdaRank => lambda_rank_loss(batch).unwrap_or(0.0),
        ScorerLoss::PointwiseL1 => l1_loss(batch),
    }
}

/// Trains the scorer by gradient descent on the configured loss.
///
/// The ranking loss is optimized over the scorer's raw linear score (its
/// value only depends on score differences; squashing first would cap
/// every difference at 1), while the returned scorer squashes its output
/// into `(0, 1)` as selection requires. The L1 ablation regresses the
/// squashed output directly onto the surrogate.
///
/// Surrogate values are min-max normalized per training batch (the whole
/// set in full-batch mode) before the loss is evaluated, so raw accumulator
/// values may be passed directly. Features are standardized internally and
/// the normalization is folded back into the returned weights, so the
/// scorer applies to raw feature vectors.
///
/// Returns the scorer and the loss trace: entry 0 is the loss before any
/// update, entry `t` the full-set loss after epoch `t`. The trace is not
/// guaranteed monotone step to step, but the final loss undercuts the
/// initial one for any step size below the stability bound of the data.
pub fn train_scorer(
    samples: &[RankingSample],
    cfg: &ScorerTrainConfig,
) -> Result<(UncertaintyScorer, Vec<f64>), RankingError> {
    if samples.len() < 2 {
        return Err(if samples.is_empty() {
            RankingError::EmptyBatch
        } else {
            RankingError::UnrankableDataset
        });
    }
    if !cfg.step_size.is_finite() || cfg.step_size <= 0.0 {
        return Err(RankingError::InvalidArgument("step_size"));
    }
    let dim = samples[0].features.len();
    if dim == 0 || samples.iter().any(|s| s.features.len() != dim) {
        return Err(RankingError::InvalidArgument("feature dimensions"));
    }
    if samples
        .iter()
        .any(|s| !s.a.is_finite() || s.features.iter().any(|x| !x.is_finite()))
    {
        return Err(RankingError::NonFiniteInput);
    }
    let has_strict_pair = samples
        .iter()
        .any(|s| samples.iter().any(|t| s.a > t.a));
    if !has_strict_pair {
        return Err(RankingError::UnrankableDataset);
    }

    let standardizer = Standardizer::fit(samples, dim);
    let std_features: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| standardizer.apply(&s.features))
        .collect();
    let raw_a: Vec<f64> = samples.iter().map(|s| s.a).collect();
    let full_a = min_max_normalize(&raw_a);
    let all_idx: Vec<usize> = (0..samples.len()).collect();

    let mut w = vec![0.0f64; dim];
    let mut b = 0.0f64;

    let mut full_batch: Vec<RankingSample> = full_a
        .iter()
        .map(|&a| RankingSample::new(a, 0.5))
        .collect();
    let mut trace = Vec::with_capacity(cfg.epochs as usize + 1);
    trace.push(eval_batch(
        &mut full_batch,
        &std_features,
        &all_idx,
        &w,
        b,
        cfg.loss,
    ));

    let step = |w: &mut Vec<f64>,
                b: &mut f64,
                idx: &[usize],
                batch: &mut Vec<RankingSample>,
                std_features: &[Vec<f64>],
                step_size: f64,
                loss: ScorerLoss| {
        for (slot, &i) in idx.iter().enumerate() {
            let z: f64 = w
                .iter()
                .zip(&std_features[i])
                .map(|(w, x)| w * x)
                .sum::<f64>()
                + *b;
            batch[slot].kappa = match loss {
                ScorerLoss::LambdaRank => z,
                ScorerLoss::PointwiseL1 => sigmoid(z),
            };
        }
        let g_kappa = match loss {
            ScorerLoss::LambdaRank => lambda_rank_gradient(batch).expect("validated batch"),
            ScorerLoss::PointwiseL1 => l1_gradient(batch),
        };
        // Normalize by batch size so the step scale is batch-size free.
        let scale = step_size / idx.len() as f64;
        for (slot, &i) in idx.iter().enumerate() {
            let dz = match loss {
                ScorerLoss::LambdaRank => g_kappa[slot],
                ScorerLoss::PointwiseL1 => {
                    let k = batch[slot].kappa;
                    g_kappa[slot] * k * (1.0 - k)
                }
            };
            for (wk, x) in w.iter_mut().zip(&std_features[i]) {
                *wk -= scale * dz * x;
            }
            *b -= scale * dz;
        }
    };

    match cfg.mode {
        TrainMode::FullBatch => {
            let mut batch: Vec<RankingSample> = full_a
                .iter()
                .map(|&a| RankingSample::new(a, 0.5))
                .collect();
            for _ in 0..cfg.epochs {
                step(
                    &mut w,
                    &mut b,
                    &all_idx,
                    &mut batch,
                    &std_features,
                    cfg.step_size,
                    cfg.loss,
                );
                trace.push(eval_batch(
                    &mut full_batch,
                    &std_features,
                    &all_idx,
                    &w,
                    b,
                    cfg.loss,
                ));
            }
        }
        TrainMode::MiniBatch { batch_size } => {
            if batch_size < 2 {
                return Err(RankingError::InvalidArgument("batch_size"));
            }
            let mut order: Vec<usize> = (0..samples.len()).collect();
            for epoch in 0..cfg.epochs {
                let mut shuffle_rng =
                    seeds::rng(seeds::derive_indexed(cfg.seed, "scorer-shuffle", &[epoch as u64]));
                order.shuffle(&mut shuffle_rng);
                for chunk in order.chunks(batch_size) {
                    // Re-normalize the surrogate within the mini-batch.
                    let raw: Vec<f64> = chunk.iter().map(|&i| raw_a[i]).collect();
                    let a = min_max_normalize(&raw);
                    let mut batch: Vec<RankingSample> =
                        a.iter().map(|&a| RankingSample::new(a, 0.5)).collect();
                    step(
                        &mut w,
                        &mut b,
                        chunk,
                        &mut batch,
                        &std_features,
                        cfg.step_size,
                        cfg.loss,
                    );
                }
                trace.push(eval_batch(
                    &mut full_batch,
                    &std_features,
                    &all_idx,
                    &w,
                    b,
                    cfg.loss,
                ));
            }
        }
    }

    // Fold the feature standardization into the weights so the scorer
    // applies to raw features.
    let mut weights = vec![0.0f64; dim];
    let mut bias = b;
    for k in 0..dim {
        weights[k] = w[k] / standardizer.scales[k];
        bias -= w[k] * standardizer.means[k] / standardizer.scales[k];
    }
    let scorer = UncertaintyScorer {
        weights,
        bias,
        feature_spec: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    Ok((scorer, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PatchSpec, Point, PointSet};
    use alloc::vec;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn batch(pairs: &[(f64, f64)]) -> Vec<RankingSample> {
        pairs.iter().map(|&(a, k)| RankingSample::new(a, k)).collect()
    }

    #[test]
    fn equal_scores_give_exactly_one() {
        // One strict pair with gap 1 and zero score difference: log2(2) = 1.
        let loss = lambda_rank_loss(&batch(&[(1.0, 0.0), (0.0, 0.0)])).unwrap();
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn all_equal_surrogates_give_zero() {
        let loss = lambda_rank_loss(&batch(&[(0.4, 0.1), (0.4, 0.9), (0.4, 0.5)])).unwrap();
        assert_eq!(loss, 0.0);
        let grad = lambda_rank_gradient(&batch(&[(0.4, 0.1), (0.4, 0.9)])).unwrap();
        assert_eq!(grad, vec![0.0, 0.0]);
    }

    #[test]
    fn well_separated_scores_give_tiny_loss() {
        let loss = lambda_rank_loss(&batch(&[(1.0, 10.0), (0.0, 0.0)])).unwrap();
        // Direct (non-stabilized) 64-bit evaluation of the formula.
        let expected = (1.0 + (-10.0f64).exp()).ln() / core::f64::consts::LN_2;
        assert_relative_eq!(loss, expected, max_relative = 1e-12);
        assert!((loss - 6.5502e-5).abs() < 1e-8);
    }

    #[test]
    fn gradient_spot_value() {
        let grad = lambda_rank_gradient(&batch(&[(1.0, 0.0), (0.0, 0.0)])).unwrap();
        let expected = 0.5 / core::f64::consts::LN_2;
        assert_relative_eq!(grad[0], -expected, max_relative = 1e-12);
        assert_relative_eq!(grad[1], expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 0.72134752, max_relative = 1e-7);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        assert_eq!(
            lambda_rank_loss(&batch(&[(f64::NAN, 0.0), (0.0, 0.0)])),
            Err(RankingError::NonFiniteInput)
        );
        assert_eq!(lambda_rank_loss(&[]), Err(RankingError::EmptyBatch));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::seeds::rng(42);
        for _ in 0..50 {
            let n = rng.random_range(2..=16);
            let mut samples: Vec<RankingSample> = (0..n)
                .map(|_| {
                    RankingSample::new(rng.random_range(0.0..1.0), rng.random_range(-2.0..2.0))
                })
                .collect();
            let grad = lambda_rank_gradient(&samples).unwrap();
            let h = 1e-5;
            for i in 0..n {
                let orig = samples[i].kappa;
                samples[i].kappa = orig + h;
                let up = lambda_rank_loss(&samples).unwrap();
                samples[i].kappa = orig - h;
                let down = lambda_rank_loss(&samples).unwrap();
                samples[i].kappa = orig;
                let numeric = (up - down) / (2.0 * h);
                let denom = grad[i].abs().max(1e-8);
                assert!(
                    ((grad[i] - numeric) / denom).abs() < 1e-5,
                    "sample {i}: analytic {} vs numeric {numeric}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn loss_is_shift_invariant() {
        let mut rng = crate::seeds::rng(7);
        for _ in 0..20 {
            let n = rng.random_range(2..=10);
            let samples: Vec<RankingSample> = (0..n)
                .map(|_| {
                    RankingSample::new(rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0))
                })
                .collect();
            let shifted: Vec<RankingSample> = samples
                .iter()
                .map(|s| RankingSample::new(s.a, s.kappa + 17.25))
                .collect();
            let l0 = lambda_rank_loss(&samples).unwrap();
            let l1 = lambda_rank_loss(&shifted).unwrap();
            assert!((l0 - l1).abs() <= 1e-12 * (1.0 + l0.abs()));
        }
    }

    #[test]
    fn features_of_empty_patch_are_zero() {
        let patch = PatchSpec::new(0.0, 0.0, 64.0, 64.0).unwrap();
        let empty = PointSet::empty(64.0, 64.0).unwrap();
        assert_eq!(extract_features(&empty, &patch), vec![0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn features_of_center_point() {
        let patch = PatchSpec::new(0.0, 0.0, 64.0, 64.0).unwrap();
        let one = PointSet::new(vec![Point::new(32.0, 32.0)], 64.0, 64.0).unwrap();
        let f = extract_features(&one, &patch);
        assert_eq!(f[0], 1.0);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[2], 0.0);
        // One cell of sixteen holds one point: population variance of a
        // one-hot 16-vector is (15/16^2 + 15 * 1/16^2) / ... = 15/256.
        assert_relative_eq!(f[3], 15.0 / 256.0, max_relative = 1e-12);
    }

    #[test]
    fn features_two_interior_points() {
        let patch = PatchSpec::new(0.0, 0.0, 64.0, 64.0).unwrap();
        let two = PointSet::new(
            vec![Point::new(20.0, 30.0), Point::new(30.0, 30.0)],
            64.0,
            64.0,
        )
        .unwrap();
        let f = extract_features(&two, &patch);
        assert_eq!(f[0], 2.0);
        assert_relative_eq!(f[1], 10.0, max_relative = 1e-12);
        assert_eq!(f[2], 0.0);
    }

    #[test]
    fn border_points_are_counted() {
        let patch = PatchSpec::new(0.0, 0.0, 64.0, 64.0).unwrap();
        let pts = PointSet::new(
            vec![Point::new(2.0, 30.0), Point::new(30.0, 61.0), Point::new(32.0, 32.0)],
            64.0,
            64.0,
        )
        .unwrap();
        let f = extract_features(&pts, &patch);
        assert_eq!(f[2], 2.0);
    }

    #[test]
    fn trainer_learns_identity_signal() {
        // Features carry the surrogate directly; the trainer must cut the
        // loss by at least 10x and align the ranking almost perfectly.
        let n = 24;
        let samples: Vec<RankingSample> = (0..n)
            .map(|i| {
                let a = i as f64 / (n - 1) as f64;
                RankingSample::with_features(a, vec![a])
            })
            .collect();
        let cfg = ScorerTrainConfig::default();
        let (scorer, trace) = train_scorer(&samples, &cfg).unwrap();
        assert!(trace.len() == cfg.epochs as usize + 1);
        assert!(
            trace[cfg.epochs as usize] < 0.1 * trace[0],
            "final {} vs initial {}",
            trace[cfg.epochs as usize],
            trace[0]
        );
        let kappas: Vec<f64> = samples.iter().map(|s| scorer.score(&s.features)).collect();
        let a: Vec<f64> = samples.iter().map(|s| s.a).collect();
        let tau = crate::stats::kendall_tau(&kappas, &a).unwrap();
        assert!(tau >= 0.9, "kendall tau {tau}");
    }

    #[test]
    fn full_batch_training_is_order_insensitive() {
        let mut rng = crate::seeds::rng(11);
        let samples: Vec<RankingSample> = (0..16)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..1.0);
                RankingSample::with_features(a, vec![a + 0.05 * rng.random_range(-1.0..1.0), 1.0])
            })
            .collect();
        let mut reversed = samples.clone();
        reversed.reverse();
        let cfg = ScorerTrainConfig {
            epochs: 200,
            ..Default::default()
        };
        let (s1, _) = train_scorer(&samples, &cfg).unwrap();
        let (s2, _) = train_scorer(&reversed, &cfg).unwrap();
        for (w1, w2) in s1.weights.iter().zip(&s2.weights) {
            assert!((w1 - w2).abs() < 1e-9, "{w1} vs {w2}");
        }
        assert!((s1.bias - s2.bias).abs() < 1e-9);
    }

    #[test]
    fn mini_batch_training_is_seed_deterministic() {
        let samples: Vec<RankingSample> = (0..20)
            .map(|i| {
                let a = i as f64 / 19.0;
                RankingSample::with_features(a, vec![a, (i % 3) as f64])
            })
            .collect();
        let cfg = ScorerTrainConfig {
            epochs: 50,
            mode: TrainMode::MiniBatch { batch_size: 5 },
            seed: 99,
            ..Default::default()
        };
        let (s1, t1) = train_scorer(&samples, &cfg).unwrap();
        let (s2, t2) = train_scorer(&samples, &cfg).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn unrankable_datasets_are_rejected() {
        let one = vec![RankingSample::with_features(0.5, vec![1.0])];
        assert_eq!(
            train_scorer(&one, &ScorerTrainConfig::default()),
            Err(RankingError::UnrankableDataset)
        );
        let flat: Vec<RankingSample> = (0..5)
            .map(|i| RankingSample::with_features(0.5, vec![i as f64]))
            .collect();
        assert_eq!(
            train_scorer(&flat, &ScorerTrainConfig::default()),
            Err(RankingError::UnrankableDataset)
        );
    }

    #[test]
    fn l1_mode_also_regresses() {
        let samples: Vec<RankingSample> = (0..16)
            .map(|i| {
                let a = i as f64 / 15.0;
                RankingSample::with_features(a, vec![a])
            })
            .collect();
        let cfg = ScorerTrainConfig {
            epochs: 400,
            step_size: 2.0,
            loss: ScorerLoss::PointwiseL1,
            ..Default::default()
        };
        let (_, trace) = train_scorer(&samples, &cfg).unwrap();
        assert!(trace[trace.len() - 1] < trace[0]);
    }
}

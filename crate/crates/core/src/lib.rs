//! Patch-wise uncertainty calibration for point-set predictions.
//!
//! Crowd-style point predictions are compared against ground-truth point
//! sets through a spatial matching distance: an optimal one-to-one matching
//! plus a constant penalty per unmatched point. Accumulating that distance
//! per cached patch over training epochs yields a supervised uncertainty
//! surrogate (ASM); a pairwise ranking loss calibrates a scorer against the
//! surrogate; a linearly increasing threshold then admits low-uncertainty
//! predictions as pseudo-labels.
//!
//! The crate is organized around that pipeline:
//!
//! - [`geometry`]: point sets, patch specs, and fixed patch grids.
//! - [`matching`]: the spatial matching distance, a brute-force oracle, and
//!   the ablation distances (counting difference, discrete Wasserstein,
//!   Hungarian-drop).
//! - [`asm`]: the patch bank accumulating per-epoch distances into the
//!   surrogate, with batch min-max normalization.
//! - [`ranking`]: the pairwise ranking loss, its analytic gradient, patch
//!   feature extraction, and a squashed linear uncertainty scorer.
//! - [`selection`]: the threshold schedule, pseudo-label selection, EMA
//!   teacher tracking, and loss composition.
//! - [`simulator`]: synthetic point scenes, a parameterized noisy predictor,
//!   and the semi-supervised loop used to compare filtering strategies.
//! - [`stats`]: rank-correlation helpers used by the harness and its tests.
//!
//! All core computations are deterministic: randomness flows from explicit
//! seeds through named sub-streams (see [`seeds`]), so identical inputs
//! reproduce identical outputs bit for bit.
//!
//! The crate is `no_std`-compatible (`default-features = false`); it only
//! requires `alloc`. File formats, CLI, and IO live in the companion
//! `asmcal-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod asm;
pub mod geometry;
pub mod matching;
pub mod ranking;
pub mod seeds;
pub mod selection;
pub mod simulator;
pub mod stats;

pub use asm::{AsmBank, AsmEntry, NormalizedBatch, PatchKey};
pub use geometry::{build_grid, crop_points, PatchGrid, PatchSpec, Point, PointSet};
pub use matching::{
    brute_force_matching, counting_difference, hungarian_drop_distance,
    spatial_matching_distance, wasserstein_distance, MatchResult,
};
pub use ranking::{
    extract_features, lambda_rank_gradient, lambda_rank_loss, train_scorer, RankingSample,
    ScorerTrainConfig, UncertaintyScorer,
};
pub use selection::{
    composed_loss, select_pseudo_labels, Boundary, EmaState, PseudoLabel, ThresholdSchedule,
};
pub use simulator::{
    generate_scene, predict_noisy, run_ablation_suite, run_semi_supervised, AblationReport,
    DensityField, PredictorConfig, SceneConfig, SimulationConfig, Strategy,
};

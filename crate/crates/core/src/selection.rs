//! Pseudo-label selection, threshold scheduling, and teacher tracking.
//!
//! After a warm-up period the uncertainty threshold `u_t` rises linearly
//! from `start_unc` at `start_epoch` to `end_unc` at `end_epoch` and stays
//! clamped afterwards: selection is conservative while the model is weak
//! and admits more patches as it improves. A candidate patch is admitted
//! when its score falls below the threshold; whether a score exactly at the
//! threshold is admitted is configurable (see [`Boundary`]), strict by
//! default.
//!
//! The teacher generating the candidates is an exponential moving average
//! of the student: `teacher <- decay * teacher + (1 - decay) * student`.
//!
//! The composed objective adds the supervised prediction loss, the
//! uncertainty ranking loss (labeled data only; uncertainty is never
//! trained on pseudo-labels), and the pseudo-label prediction loss weighted
//! by `lambda1`.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::asm::PatchKey;
use crate::geometry::PointSet;

/// Errors from selection and teacher updates.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionError {
    /// A candidate score or threshold was outside `[0, 1]`.
    InvalidScore(f64),
    /// Teacher and student parameter vectors have different lengths.
    ShapeMismatch { teacher: usize, student: usize },
    /// A loss component was negative or non-finite.
    InvalidLoss,
    /// A schedule or decay parameter was outside its domain.
    InvalidArgument(&'static str),
}

impl fmt::Display for SelectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionError::InvalidScore(v) => write!(f, "score {v} outside [0, 1]"),
            SelectionError::ShapeMismatch { teacher, student } => {
                write!(f, "parameter shape mismatch: teacher {teacher}, student {student}")
            }
            SelectionError::InvalidLoss => write!(f, "loss components must be finite and >= 0"),
            SelectionError::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
        }
    }
}

impl core::error::Error for SelectionError {}

/// Linearly increasing uncertainty threshold with a warm-up period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct ThresholdSchedule {
    start_epoch: u32,
    end_epoch: u32,
    start_unc: f64,
    end_unc: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSchedule {
    start_epoch: u32,
    end_epoch: u32,
    start_unc: f64,
    end_unc: f64,
}

impl TryFrom<RawSchedule> for ThresholdSchedule {
    type Error = SelectionError;
    fn try_from(raw: RawSchedule) -> Result<Self, Self::Error> {
        ThresholdSchedule::new(raw.start_epoch, raw.end_epoch, raw.start_unc, raw.end_unc)
    }
}

impl From<ThresholdSchedule> for RawSchedule {
    fn from(s: ThresholdSchedule) -> Self {
        RawSchedule {
            start_epoch: s.start_epoch,
            end_epoch: s.end_epoch,
            start_unc: s.start_unc,
            end_unc: s.end_unc,
        }
    }
}

impl ThresholdSchedule {
    pub fn new(
        start_epoch: u32,
        end_epoch: u32,
        start_unc: f64,
        end_unc: f64,
    ) -> Result<Self, SelectionError> {
        if start_epoch >= end_epoch {
            return Err(SelectionError::InvalidArgument("start_epoch must be < end_epoch"));
        }
        if !start_unc.is_finite() || !end_unc.is_finite() {
            return Err(SelectionError::InvalidArgument("threshold bounds"));
        }
        if !(0.0..=1.0).contains(&start_unc) || !(0.0..=1.0).contains(&end_unc) {
            return Err(SelectionError::InvalidArgument("thresholds must be in [0, 1]"));
        }
        if start_unc > end_unc {
            return Err(SelectionError::InvalidArgument("start_unc must be <= end_unc"));
        }
        Ok(ThresholdSchedule {
            start_epoch,
            end_epoch,
            start_unc,
            end_unc,
        })
    }

    pub fn start_epoch(&self) -> u32 {
        self.start_epoch
    }

    pub fn end_epoch(&self) -> u32 {
        self.end_epoch
    }

    pub fn start_unc(&self) -> f64 {
        self.start_unc
    }

    pub fn end_unc(&self) -> f64 {
        self.end_unc
    }

    /// The threshold at epoch `t`: `None` during warm-up (`t` before
    /// `start_epoch`, no selection), the linear interpolation on
    /// `[start_epoch, end_epoch]`, and `end_unc` clamped afterwards.
    pub fn threshold_at(&self, t: u32) -> Option<f64> {
        if t < self.start_epoch {
            return None;
        }
        if t > self.end_epoch {
            return Some(self.end_unc);
        }
        let ratio = (t - self.start_epoch) as f64 / (self.end_epoch - self.start_epoch) as f64;
        Some(self.start_unc + (self.end_unc - self.start_unc) * ratio)
    }
}

impl Default for ThresholdSchedule {
    /// `start_epoch` 10, `end_epoch` 130, thresholds 0.1 to 0.6.
    fn default() -> Self {
        ThresholdSchedule::new(10, 130, 0.1, 0.6).expect("valid defaults")
    }
}

/// Whether a score exactly equal to the threshold is admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Admit `kappa < u_t`.
    #[default]
    Strict,
    /// Admit `kappa <= u_t`.
    Inclusive,
}

/// A teacher prediction admitted as training supervision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub key: PatchKey,
    /// Predicted points, cropped to the patch frame.
    pub points: PointSet,
    /// The uncertainty score that admitted the patch.
    pub kappa: f64,
    pub epoch_created: u32,
}

/// Filters candidates by the threshold, preserving order. A `None`
/// threshold (warm-up) selects nothing. Every candidate score must lie in
/// `[0, 1]`.
pub fn select_pseudo_labels(
    candidates: Vec<(PatchKey, PointSet, f64)>,
    threshold: Option<f64>,
    boundary: Boundary,
    epoch: u32,
) -> Result<Vec<PseudoLabel>, SelectionError> {
    for (_, _, kappa) in &candidates {
        if !(0.0..=1.0).contains(kappa) {
            return Err(SelectionError::InvalidScore(*kappa));
        }
    }
    let threshold = match threshold {
        None => return Ok(Vec::new()),
        Some(u) => {
            if !(0.0..=1.0).contains(&u) {
                return Err(SelectionError::InvalidScore(u));
            }
            u
        }
    };
    Ok(candidates
        .into_iter()
        .filter(|(_, _, kappa)| match boundary {
            Boundary::Strict => *kappa < threshold,
            Boundary::Inclusive => *kappa <= threshold,
        })
        .map(|(key, points, kappa)| PseudoLabel {
            key,
            points,
            kappa,
            epoch_created: epoch,
        })
        .collect())
}

/// Exponential-moving-average teacher parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    teacher_params: Vec<f64>,
    decay: f64,
}

impl EmaState {
    pub fn new(initial: Vec<f64>, decay: f64) -> Result<Self, SelectionError> {
        if !decay.is_finite() || decay <= 0.0 || decay >= 1.0 {
            return Err(SelectionError::InvalidArgument("decay must be in (0, 1)"));
        }
        if initial.iter().any(|v| !v.is_finite()) {
            return Err(SelectionError::InvalidArgument("teacher parameters"));
        }
        Ok(EmaState {
            teacher_params: initial,
            decay,
        })
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn teacher_params(&self) -> &[f64] {
        &self.teacher_params
    }

    /// One EMA step: `teacher <- decay * teacher + (1 - decay) * student`,
    /// elementwise.
    pub fn update(&mut self, student_params: &[f64]) -> Result<(), SelectionError> {
        if student_params.len() != self.teacher_params.len() {
            return Err(SelectionError::ShapeMismatch {
                teacher: self.teacher_params.len(),
                student: student_params.len(),
            });
        }
        if student_params.iter().any(|v| !v.is_finite()) {
            return Err(SelectionError::InvalidArgument("student parameters"));
        }
        for (t, s) in self.teacher_params.iter_mut().zip(student_params) {
            *t = self.decay * *t + (1.0 - self.decay) * s;
        }
        Ok(())
    }
}

/// The semi-supervised objective: supervised prediction loss plus the
/// uncertainty loss (labeled data only) plus `lambda1` times the
/// pseudo-label prediction loss.
pub fn composed_loss(
    sup_pred_loss: f64,
    uncer_loss: f64,
    pseudo_pred_loss: f64,
    lambda1: f64,
) -> Result<f64, SelectionError> {
    for v in [sup_pred_loss, uncer_loss, pseudo_pred_loss] {
        if !v.is_finite() || v < 0.0 {
            return Err(SelectionError::InvalidLoss);
        }
    }
    if !lambda1.is_finite() || lambda1 < 0.0 {
        return Err(SelectionError::InvalidLoss);
    }
    Ok(sup_pred_loss + uncer_loss + lambda1 * pseudo_pred_loss)
}

/// Default weight of the pseudo-label prediction loss.
pub const DEFAULT_LAMBDA1: f64 = 0.3;

/// Default EMA decay. Not pinned by any reference; exposed as config.
pub const DEFAULT_EMA_DECAY: f64 = 0.99;

//! Run configuration: nested sections mirroring each module's knobs.
//!
//! Loaded from a TOML file, overridden by flags (flags win), and written
//! fully resolved into every run directory so outputs can be reproduced
//! bit for bit. Unknown keys are rejected.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use asmcal::ranking::{ScorerLoss, TrainMode};
use asmcal::selection::{Boundary, ThresholdSchedule, DEFAULT_EMA_DECAY, DEFAULT_LAMBDA1};
use asmcal::simulator::SimulationConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; named sub-streams are derived from it.
    pub seed: u64,
    /// Default output directory; `--out-dir` and `ASMCAL_OUT_DIR` override.
    pub output_dir: Option<String>,
    pub geometry: GeometrySection,
    pub matching: MatchingSection,
    pub asm: AsmSection,
    pub ranking: RankingSection,
    pub selection: SelectionSection,
    pub simulator: SimulationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: None,
            geometry: GeometrySection::default(),
            matching: MatchingSection::default(),
            asm: AsmSection::default(),
            ranking: RankingSection::default(),
            selection: SelectionSection::default(),
            simulator: SimulationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub patch_size: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection { patch_size: 64.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingSection {
    /// Penalty constant override. When unset, each patch's own diagonal is
    /// used (64 x 64 patches give 64 * sqrt(2)).
    pub penalty_c: Option<f64>,
}

impl Default for MatchingSection {
    fn default() -> Self {
        MatchingSection { penalty_c: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsmSection {
    /// Normalization scope for the `asm` subcommand's CSV: `bank` (all
    /// accumulated patches) or reserved future scopes.
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    Bank,
}

impl Default for AsmSection {
    fn default() -> Self {
        AsmSection {
            normalization: Normalization::Bank,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingSection {
    pub epochs: u32,
    pub step_size: f64,
    pub mode: TrainMode,
    pub loss: ScorerLoss,
}

impl Default for RankingSection {
    fn default() -> Self {
        RankingSection {
            epochs: 200,
            step_size: 0.5,
            mode: TrainMode::FullBatch,
            loss: ScorerLoss::LambdaRank,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub schedule: ThresholdSchedule,
    pub ema: EmaSection,
    pub loss: LossSection,
    pub boundary: Boundary,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection {
            schedule: ThresholdSchedule::default(),
            ema: EmaSection::default(),
            loss: LossSection::default(),
            boundary: Boundary::Strict,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmaSection {
    pub decay: f64,
}

impl Default for EmaSection {
    fn default() -> Self {
        EmaSection {
            decay: DEFAULT_EMA_DECAY,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub lambda1: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        LossSection {
            lambda1: DEFAULT_LAMBDA1,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    /// The fully resolved config as TOML, for provenance.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing resolved config")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.seed, cfg.seed);
        assert_eq!(back.selection.loss.lambda1, DEFAULT_LAMBDA1);
        assert_eq!(back.selection.schedule, ThresholdSchedule::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("mystery_knob = 3\n").unwrap_err();
        assert!(err.to_string().contains("mystery_knob"));
        let err =
            toml::from_str::<RunConfig>("[selection]\nboundry = \"strict\"\n").unwrap_err();
        assert!(err.to_string().contains("boundry"));
    }

    #[test]
    fn paper_defaults_are_wired() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.selection.schedule.start_epoch(), 10);
        assert_eq!(cfg.selection.schedule.end_epoch(), 130);
        assert_eq!(cfg.selection.schedule.start_unc(), 0.1);
        assert_eq!(cfg.selection.schedule.end_unc(), 0.6);
        assert_eq!(cfg.selection.ema.decay, 0.99);
        assert_eq!(cfg.selection.loss.lambda1, 0.3);
        assert_eq!(cfg.selection.boundary, Boundary::Strict);
        assert_eq!(cfg.geometry.patch_size, 64.0);
    }
}

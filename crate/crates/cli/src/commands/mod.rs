//! Subcommand implementations.

pub mod ablate;
pub mod asm_bank;
pub mod dist;
pub mod schedule;
pub mod simulate;
pub mod train_scorer;

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};

use asmcal::geometry::{build_grid, PatchGrid, PatchSpec};

use crate::config::RunConfig;

/// Resolves the output directory: flag > env var > config > error.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &RunConfig) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.to_path_buf());
    }
    if let Ok(env) = std::env::var("ASMCAL_OUT_DIR") {
        if !env.is_empty() {
            return Ok(PathBuf::from(env));
        }
    }
    if let Some(dir) = &cfg.output_dir {
        return Ok(PathBuf::from(dir));
    }
    bail!("no output directory: pass --out-dir, set ASMCAL_OUT_DIR, or set output_dir in the config")
}

/// Grid for a scene frame, validating the patch size.
pub fn grid_for(width: f64, height: f64, patch_size: f64) -> Result<PatchGrid> {
    Ok(build_grid(width, height, patch_size)?)
}

/// The penalty constant for a patch: an explicit override or the patch's
/// own diagonal (truncated boundary patches use their truncated diagonal).
pub fn patch_penalty(patch: &PatchSpec, override_c: Option<f64>) -> f64 {
    override_c.unwrap_or_else(|| patch.diagonal())
}

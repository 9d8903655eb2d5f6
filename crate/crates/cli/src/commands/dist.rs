//! `dist`: per-patch distances between a ground-truth and a prediction
//! annotation file, one CSV row per patch.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;

use asmcal::geometry::crop_points;
use asmcal::matching::{
    counting_difference, hungarian_drop_distance, spatial_matching_distance, wasserstein_distance,
};

use crate::annotations::{find_scene, load_scenes};
use crate::commands::{grid_for, patch_penalty};
use crate::config::RunConfig;
use crate::output::{csv_document, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Single-epoch spatial matching distance.
    AsmStep,
    /// Absolute counting difference.
    Acd,
    /// Discrete Wasserstein distance with the super-pixel empty-side rule.
    Awd,
    /// Matching-only distance, unmatched points dropped.
    Hungarian,
}

impl FromStr for Metric {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "asm-step" => Metric::AsmStep,
            "acd" => Metric::Acd,
            "awd" => Metric::Awd,
            "hungarian" => Metric::Hungarian,
            other => bail!("unknown metric '{other}' (expected asm-step|acd|awd|hungarian)"),
        })
    }
}

#[derive(Debug, Args)]
pub struct DistArgs {
    /// Ground-truth annotation file (JSON).
    #[arg(long)]
    pub gt: PathBuf,
    /// Prediction annotation file (JSON); scenes matched to GT by id.
    #[arg(long)]
    pub pred: PathBuf,
    /// Patch size in pixels.
    #[arg(long, default_value_t = 64.0)]
    pub patch: f64,
    /// Distance to compute: asm-step, acd, awd, or hungarian.
    #[arg(long, default_value = "asm-step")]
    pub metric: Metric,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &DistArgs, cfg: &RunConfig) -> Result<()> {
    let gt_scenes = load_scenes(&args.gt)?;
    let pred_scenes = load_scenes(&args.pred)?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (gt_ann, gt_set) in &gt_scenes {
        let (pred_ann, pred_set) = find_scene(&pred_scenes, &gt_ann.id)
            .with_context(|| format!("prediction file has no scene '{}'", gt_ann.id))?;
        if pred_ann.width != gt_ann.width || pred_ann.height != gt_ann.height {
            bail!(
                "scene '{}': frame mismatch (gt {}x{}, pred {}x{})",
                gt_ann.id,
                gt_ann.width,
                gt_ann.height,
                pred_ann.width,
                pred_ann.height
            );
        }
        let grid = grid_for(gt_ann.width, gt_ann.height, args.patch)?;
        for (pi, patch) in grid.patches().iter().enumerate() {
            let gt_k = crop_points(gt_set, patch)?;
            let pred_k = crop_points(pred_set, patch)?;
            let penalty = patch_penalty(patch, cfg.matching.penalty_c);
            let distance = match args.metric {
                Metric::AsmStep => spatial_matching_distance(&pred_k, &gt_k, penalty)?.distance,
                Metric::Acd => counting_difference(&pred_k, &gt_k),
                Metric::Awd => wasserstein_distance(&pred_k, &gt_k, penalty)?,
                Metric::Hungarian => hungarian_drop_distance(&pred_k, &gt_k),
            };
            let (row, col) = grid.row_col(pi);
            rows.push(vec![
                gt_ann.id.clone(),
                row.to_string(),
                col.to_string(),
                gt_k.len().to_string(),
                pred_k.len().to_string(),
                distance.to_string(),
            ]);
        }
    }

    let doc = csv_document(
        &["scene_id", "patch_row", "patch_col", "n_gt", "n_pred", "distance"],
        rows,
    )?;
    emit(&doc, args.out.as_deref())
}

fn emit(doc: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            write_atomic(path, doc.as_bytes())?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{doc}"),
    }
    Ok(())
}

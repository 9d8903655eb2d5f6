//! Point-annotation files: one JSON document per scene,
//! `{"id": string, "width": number, "height": number, "points": [[x, y], ...]}`.
//! A file may hold a single scene object or an array of scenes. The same
//! format serves ground truth and predictions.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use asmcal::geometry::{Point, PointSet};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub id: String,
    pub width: f64,
    pub height: f64,
    pub points: Vec<[f64; 2]>,
}

impl SceneAnnotation {
    pub fn to_point_set(&self) -> Result<PointSet> {
        PointSet::new(
            self.points.iter().map(|&[x, y]| Point::new(x, y)).collect(),
            self.width,
            self.height,
        )
        .with_context(|| format!("scene '{}' has invalid points", self.id))
    }

    pub fn from_point_set(id: &str, set: &PointSet) -> Self {
        SceneAnnotation {
            id: id.to_string(),
            width: set.frame_width(),
            height: set.frame_height(),
            points: set.points().iter().map(|p| [p.x, p.y]).collect(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(SceneAnnotation),
    Many(Vec<SceneAnnotation>),
}

/// Loads a scene or a list of scenes and validates every point set.
pub fn load_scenes(path: &Path) -> Result<Vec<(SceneAnnotation, PointSet)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading annotation file {}", path.display()))?;
    let parsed: OneOrMany = serde_json::from_str(&text)
        .with_context(|| format!("parsing annotation file {}", path.display()))?;
    let scenes = match parsed {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    };
    if scenes.is_empty() {
        bail!("annotation file {} holds no scenes", path.display());
    }
    scenes
        .into_iter()
        .map(|s| {
            let set = s.to_point_set()?;
            Ok((s, set))
        })
        .collect()
}

/// Looks up a scene by id.
pub fn find_scene<'a>(
    scenes: &'a [(SceneAnnotation, PointSet)],
    id: &str,
) -> Option<&'a (SceneAnnotation, PointSet)> {
    scenes.iter().find(|(s, _)| s.id == id)
}

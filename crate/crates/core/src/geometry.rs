//! Point-set and patch-grid primitives.
//!
//! A [`PointSet`] is a finite multiset of 2D coordinates inside a frame.
//! Scenes are partitioned by a [`PatchGrid`] into fixed patches; all
//! per-patch distances and uncertainty scores downstream operate on point
//! sets cropped to a [`PatchSpec`].
//!
//! Patch membership is half-open, `[origin, origin + size)`, on both axes
//! so that cropping over a grid is a partition. The single exception is a
//! patch edge that coincides with the frame edge: points exactly on the
//! frame boundary (which the frame admits) belong to the last patch, so no
//! point is ever lost.

use alloc::vec::Vec;
use core::fmt;

// Inherent float methods come from std; the trait covers no_std builds.
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

/// Errors from geometry constructors and operations.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// A coordinate or dimension was NaN or infinite.
    NonFinite,
    /// A point lies outside its frame.
    OutOfFrame { x: f64, y: f64 },
    /// A patch does not lie within the scene frame.
    InvalidPatch,
    /// A dimension that must be positive was not.
    InvalidArgument(&'static str),
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::NonFinite => write!(f, "coordinate is NaN or infinite"),
            GeometryError::OutOfFrame { x, y } => {
                write!(f, "point ({x}, {y}) lies outside the frame")
            }
            GeometryError::InvalidPatch => write!(f, "patch does not lie within the scene frame"),
            GeometryError::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
        }
    }
}

impl core::error::Error for GeometryError {}

/// A 2D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Euclidean distance to another point.
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// A finite multiset of points inside a `frame_width` × `frame_height`
/// frame. Duplicates are permitted; the order of points is preserved but
/// carries no meaning.
///
/// Construction validates every point: coordinates must be finite and
/// satisfy `0 <= x <= frame_width`, `0 <= y <= frame_height`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPointSet", into = "RawPointSet")]
pub struct PointSet {
    points: Vec<Point>,
    frame_width: f64,
    frame_height: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPointSet {
    points: Vec<Point>,
    frame_width: f64,
    frame_height: f64,
}

impl TryFrom<RawPointSet> for PointSet {
    type Error = GeometryError;
    fn try_from(raw: RawPointSet) -> Result<Self, Self::Error> {
        PointSet::new(raw.points, raw.frame_width, raw.frame_height)
    }
}

impl From<PointSet> for RawPointSet {
    fn from(set: PointSet) -> Self {
        RawPointSet {
            points: set.points,
            frame_width: set.frame_width,
            frame_height: set.frame_height,
        }
    }
}

impl PointSet {
    pub fn new(
        points: Vec<Point>,
        frame_width: f64,
        frame_height: f64,
    ) -> Result<Self, GeometryError> {
        if !frame_width.is_finite() || !frame_height.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if frame_width <= 0.0 || frame_height <= 0.0 {
            return Err(GeometryError::InvalidArgument("frame dimensions"));
        }
        for p in &points {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite);
            }
            if p.x < 0.0 || p.x > frame_width || p.y < 0.0 || p.y > frame_height {
                return Err(GeometryError::OutOfFrame { x: p.x, y: p.y });
            }
        }
        Ok(PointSet {
            points,
            frame_width,
            frame_height,
        })
    }

    /// An empty set over the given frame.
    pub fn empty(frame_width: f64, frame_height: f64) -> Result<Self, GeometryError> {
        PointSet::new(Vec::new(), frame_width, frame_height)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Cardinality, counting duplicates.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn frame_width(&self) -> f64 {
        self.frame_width
    }

    pub fn frame_height(&self) -> f64 {
        self.frame_height
    }

    pub fn same_frame(&self, other: &PointSet) -> bool {
        self.frame_width == other.frame_width && self.frame_height == other.frame_height
    }
}

/// An axis-aligned patch within a scene frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub width: f64,
    pub height: f64,
}

impl PatchSpec {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        width: f64,
        height: f64,
    ) -> Result<Self, GeometryError> {
        if ![origin_x, origin_y, width, height]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(GeometryError::NonFinite);
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(GeometryError::InvalidArgument("patch dimensions"));
        }
        if origin_x < 0.0 || origin_y < 0.0 {
            return Err(GeometryError::InvalidArgument("patch origin"));
        }
        Ok(PatchSpec {
            origin_x,
            origin_y,
            width,
            height,
        })
    }

    /// Diagonal length of the patch; the penalty constant for unmatched
    /// points when this patch defines the comparison frame.
    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    /// Patch covering a full frame.
    pub fn full_frame(width: f64, height: f64) -> Result<Self, GeometryError> {
        PatchSpec::new(0.0, 0.0, width, height)
    }
}

/// A fixed partition of a scene into `patch_size`-sized patches in
/// row-major order. Boundary patches are truncated to the scene edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    scene_width: f64,
    scene_height: f64,
    patch_size: f64,
    rows: usize,
    cols: usize,
    patches: Vec<PatchSpec>,
}

impl PatchGrid {
    pub fn scene_width(&self) -> f64 {
        self.scene_width
    }

    pub fn scene_height(&self) -> f64 {
        self.scene_height
    }

    pub fn patch_size(&self) -> f64 {
        self.patch_size
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn patches(&self) -> &[PatchSpec] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patch(&self, index: usize) -> Option<&PatchSpec> {
        self.patches.get(index)
    }

    /// Row-major (row, col) of a patch index.
    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// Index of the unique patch owning a scene point.
    ///
    /// Ownership follows the half-open crop rule; points on the scene's
    /// far edges belong to the last row/column.
    pub fn patch_index_for(&self, point: &Point) -> usize {
        let col = ((point.x / self.patch_size).floor() as usize).min(self.cols - 1);
        let row = ((point.y / self.patch_size).floor() as usize).min(self.rows - 1);
        row * self.cols + col
    }
}

/// Builds the fixed grid of `ceil(w/ps) * ceil(h/ps)` patches tiling a
/// scene, row-major, with boundary patches truncated to the scene edge.
pub fn build_grid(
    scene_width: f64,
    scene_height: f64,
    patch_size: f64,
) -> Result<PatchGrid, GeometryError> {
    if ![scene_width, scene_height, patch_size]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(GeometryError::NonFinite);
    }
    if scene_width <= 0.0 || scene_height <= 0.0 {
        return Err(GeometryError::InvalidArgument("scene dimensions"));
    }
    if patch_size <= 0.0 {
        return Err(GeometryError::InvalidArgument("patch size"));
    }
    let cols = (scene_width / patch_size).ceil() as usize;
    let rows = (scene_height / patch_size).ceil() as usize;
    let mut patches = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let ox = c as f64 * patch_size;
            let oy = r as f64 * patch_size;
            let w = patch_size.min(scene_width - ox);
            let h = patch_size.min(scene_height - oy);
            patches.push(PatchSpec::new(ox, oy, w, h)?);
        }
    }
    Ok(PatchGrid {
        scene_width,
        scene_height,
        patch_size,
        rows,
        cols,
        patches,
    })
}

/// True when `v` belongs to the interval `[origin, origin + len)`, closed
/// at the top when the interval's upper edge coincides with the frame edge.
fn in_span(v: f64, origin: f64, len: f64, frame_edge: f64) -> bool {
    let upper = origin + len;
    v >= origin && (v < upper || (v == upper && upper >= frame_edge))
}

/// Crops a scene's points to a patch, returning origin-relative
/// coordinates in a frame equal to the patch dimensions.
///
/// Membership is half-open on both axes so that cropping over a grid is a
/// partition; patch edges on the scene boundary are closed (see module
/// docs). The patch must lie within the scene frame.
pub fn crop_points(scene: &PointSet, patch: &PatchSpec) -> Result<PointSet, GeometryError> {
    if patch.origin_x + patch.width > scene.frame_width()
        || patch.origin_y + patch.height > scene.frame_height()
    {
        return Err(GeometryError::InvalidPatch);
    }
    let cropped: Vec<Point> = scene
        .points()
        .iter()
        .filter(|p| {
            in_span(p.x, patch.origin_x, patch.width, scene.frame_width())
                && in_span(p.y, patch.origin_y, patch.height, scene.frame_height())
        })
        .map(|p| Point::new(p.x - patch.origin_x, p.y - patch.origin_y))
        .collect();
    PointSet::new(cropped, patch.width, patch.height)
}

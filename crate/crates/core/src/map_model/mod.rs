//! Vector semantic maps: concepts, labelled polygons, tiling, and the
//! reduction of each tile to per-concept Gaussian mixtures.

pub(crate) mod format;
mod gaussian;
mod tiling;

pub use format::{parse_map, write_map};
pub use gaussian::{concept_gmm, polygon_gaussian, segment_gmms, tile_gmm, tile_gmms, ConceptGmm, GaussianComponent, PolygonGaussian, COV_FLOOR};
pub use tiling::{tile_grid_shape, tile_map, Tile, TileGrid};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};

/// A semantic category carried by map and query segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptLabel {
    pub id: usize,
    pub name: String,
    /// Objects standing out of the ground plane (posts, signs, buildings).
    pub vertical: bool,
}

impl ConceptLabel {
    pub fn new(id: usize, name: impl Into<String>, vertical: bool) -> Self {
        Self {
            id,
            name: name.into(),
            vertical,
        }
    }
}

/// The seven GIS concepts used by default, in id order.
pub fn default_concepts() -> Vec<ConceptLabel> {
    [
        ("Road", false),
        ("Tree", false),
        ("Building", true),
        ("Water", false),
        ("Lamp Post", true),
        ("Traffic Signal", true),
        ("Traffic Sign", true),
    ]
    .iter()
    .enumerate()
    .map(|(id, (name, vertical))| ConceptLabel::new(id, *name, *vertical))
    .collect()
}

/// Looks up concept ids by name (case-insensitive, `_` matches a space).
pub fn resolve_concepts(concepts: &[ConceptLabel], names: &[String]) -> Result<Vec<usize>> {
    let norm = |s: &str| s.trim().replace('_', " ").to_lowercase();
    names
        .iter()
        .map(|n| {
            concepts
                .iter()
                .find(|c| norm(&c.name) == norm(n))
                .map(|c| c.id)
                .ok_or_else(|| Error::Validation(format!("unknown concept `{n}`")))
        })
        .collect()
}

/// Side length of the square standing in for point-like objects.
pub const POINT_OBJECT_SIDE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub concept: usize,
    pub polygon: Vec<Point>,
}

impl Segment {
    pub fn new(concept: usize, polygon: Vec<Point>) -> Self {
        Self { concept, polygon }
    }

    /// A point-like object (lamp post, sign) as a small square footprint.
    pub fn point_object(concept: usize, at: Point) -> Self {
        Self::new(concept, geometry::square(at, POINT_OBJECT_SIDE))
    }

    pub fn area(&self) -> f64 {
        geometry::area(&self.polygon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Bounds {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Self {
            min: Point::new(xmin, ymin),
            max: Point::new(xmax, ymax),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Polygonal semantic map in planar metric coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    pub concepts: Vec<ConceptLabel>,
    pub segments: Vec<Segment>,
    pub bounds: Bounds,
}

impl SemanticMap {
    /// Builds a map and checks every invariant: dense unique concept ids,
    /// declared segment concepts, at least three vertices, simple polygons,
    /// and all vertices inside the bounds.
    pub fn new(concepts: Vec<ConceptLabel>, segments: Vec<Segment>, bounds: Bounds) -> Result<Self> {
        validate_concepts(&concepts)?;
        if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
            return Err(Error::Validation("bounds must have positive extent".into()));
        }
        for (i, seg) in segments.iter().enumerate() {
            validate_segment(i, seg, concepts.len())?;
            if let Some(p) = seg.polygon.iter().find(|p| !bounds.contains(p)) {
                return Err(Error::Validation(format!(
                    "segment {i}: vertex ({}, {}) lies outside the map bounds",
                    p.x, p.y
                )));
            }
        }
        Ok(Self {
            concepts,
            segments,
            bounds,
        })
    }

    pub fn concept(&self, id: usize) -> Option<&ConceptLabel> {
        self.concepts.get(id)
    }
}

pub(crate) fn validate_concepts(concepts: &[ConceptLabel]) -> Result<()> {
    for (i, c) in concepts.iter().enumerate() {
        if c.id != i {
            return Err(Error::Validation(format!(
                "concept ids must be dense 0..{}; found id {} at position {i}",
                concepts.len(),
                c.id
            )));
        }
        if concepts[..i].iter().any(|o| o.name == c.name) {
            return Err(Error::Validation(format!("duplicate concept name `{}`", c.name)));
        }
    }
    Ok(())
}

pub(crate) fn validate_segment(index: usize, seg: &Segment, n_concepts: usize) -> Result<()> {
    if seg.concept >= n_concepts {
        return Err(Error::Validation(format!(
            "segment {index}: concept id {} is not declared",
            seg.concept
        )));
    }
    if seg.polygon.len() < 3 {
        return Err(Error::Validation(format!(
            "segment {index}: polygon has {} vertices, need at least 3",
            seg.polygon.len()
        )));
    }
    if seg.polygon.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::Validation(format!("segment {index}: non-finite vertex")));
    }
    if !geometry::is_simple(&seg.polygon) {
        return Err(Error::Validation(format!("segment {index}: polygon self-intersects")));
    }
    Ok(())
}

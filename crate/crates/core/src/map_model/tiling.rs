use rayon::prelude::*;

use super::{Bounds, SemanticMap, Segment};
use crate::error::{Error, Result};
use crate::geometry::{self, Point};

/// A square excerpt of the map; the unit of retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub id: usize,
    /// (column, row) on the tile grid; row 0 is the southernmost.
    pub grid: (usize, usize),
    pub center: Point,
    pub side: f64,
    pub segments: Vec<Segment>,
    /// No segment of any concept intersects the tile.
    pub empty: bool,
}

impl Tile {
    pub fn min(&self) -> Point {
        Point::new(self.center.x - 0.5 * self.side, self.center.y - 0.5 * self.side)
    }

    pub fn max(&self) -> Point {
        Point::new(self.center.x + 0.5 * self.side, self.center.y + 0.5 * self.side)
    }
}

/// Geometry of a regular tile grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileGrid {
    pub cols: usize,
    pub rows: usize,
    pub side: f64,
    pub stride: f64,
    /// Center of tile (0, 0).
    pub first_center: Point,
}

impl TileGrid {
    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, col: usize, row: usize) -> Point {
        Point::new(
            self.first_center.x + col as f64 * self.stride,
            self.first_center.y + row as f64 * self.stride,
        )
    }
}

fn axis_count(extent: f64, side: f64, stride: f64) -> usize {
    if extent <= side {
        1
    } else {
        ((extent - side) / stride - 1e-9).ceil() as usize + 1
    }
}

/// Grid of tiles of size `side` spaced by `stride` covering `bounds`.
pub fn tile_grid_shape(bounds: &Bounds, side: f64, stride: f64) -> Result<TileGrid> {
    if !(side > 0.0) || !side.is_finite() {
        return Err(Error::Parameter(format!("tile side must be positive, got {side}")));
    }
    if !(stride > 0.0 && stride <= side) {
        return Err(Error::Parameter(format!(
            "tile stride must satisfy 0 < stride <= side ({side}), got {stride}"
        )));
    }
    Ok(TileGrid {
        cols: axis_count(bounds.width(), side, stride),
        rows: axis_count(bounds.height(), side, stride),
        side,
        stride,
        first_center: Point::new(bounds.min.x + 0.5 * side, bounds.min.y + 0.5 * side),
    })
}

fn bbox(poly: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in poly {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Clips `segments` to the axis-aligned square `[min, max]`, dropping
/// pieces with no area left.
pub fn clip_segments(segments: &[Segment], min: Point, max: Point) -> Vec<Segment> {
    segments
        .iter()
        .filter_map(|seg| {
            let (lo, hi) = bbox(&seg.polygon);
            if hi.x < min.x || lo.x > max.x || hi.y < min.y || lo.y > max.y {
                return None;
            }
            let inside = lo.x >= min.x && hi.x <= max.x && lo.y >= min.y && hi.y <= max.y;
            if inside {
                return Some(seg.clone());
            }
            let clipped = geometry::clip_to_rect(&seg.polygon, min, max);
            (clipped.len() >= 3 && geometry::area(&clipped) > 0.0).then(|| Segment::new(seg.concept, clipped))
        })
        .collect()
}

/// Splits the map into overlapping square tiles laid out row-major from the
/// south-west corner. Empty tiles are kept and flagged.
pub fn tile_map(map: &SemanticMap, side: f64, stride: f64) -> Result<Vec<Tile>> {
    let grid = tile_grid_shape(&map.bounds, side, stride)?;
    let tiles = (0..grid.len())
        .into_par_iter()
        .map(|id| {
            let (col, row) = (id % grid.cols, id / grid.cols);
            let center = grid.center(col, row);
            let h = 0.5 * side;
            let segments = clip_segments(
                &map.segments,
                Point::new(center.x - h, center.y - h),
                Point::new(center.x + h, center.y + h),
            );
            Tile {
                id,
                grid: (col, row),
                center,
                side,
                empty: segments.is_empty(),
                segments,
            }
        })
        .collect();
    Ok(tiles)
}

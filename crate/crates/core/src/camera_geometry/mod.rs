//! Ground-plane rectification of a labelled street-level view.
//!
//! The camera is assumed upright with a horizontal horizon line at row
//! `horizon_row`. A below-horizon pixel `(u, v)` then meets the ground at
//!
//! ```text
//! z = f * d / (v - y_h)          (forward)
//! x = (u - cx) * d / (v - y_h)   (lateral, positive right)
//! ```
//!
//! which is the homography `[[d, 0, -cx d], [0, 0, f d], [0, 1, -y_h]]`.
//! A general rectifying homography may be supplied instead.
//!
//! Ground points are returned in a camera-centred planar frame: `Point(x, z)`,
//! so the heading is the +y axis of that frame.

mod query_file;

pub use query_file::{parse_query, write_query, QueryFile, QueryFrame};

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::map_model::{ConceptLabel, Segment};

/// Camera height above ground assumed for street-level imagery, meters.
pub const DEFAULT_CAMERA_HEIGHT: f64 = 1.7;
/// Rows closer than this to the horizon are clipped before projection.
pub const HORIZON_MARGIN_PX: f64 = 1.0;
/// Share of a vertical object's pixel rows, from the bottom, used as its
/// ground contact.
pub const CONTACT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    /// Focal length in pixels.
    pub focal: f64,
    pub principal: (f64, f64),
    pub image_size: (f64, f64),
    /// Height of the optical centre above the ground, meters.
    pub height: f64,
    pub horizon_row: f64,
    /// Optional pixel-to-ground homography overriding the upright model.
    /// Its third row must be positive below the horizon.
    pub homography: Option<Matrix3<f64>>,
}

/// A point on the ground plane in the camera-centred frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPoint {
    pub x: f64,
    pub z: f64,
}

impl GroundPoint {
    pub fn to_point(self) -> Point {
        Point::new(self.x, self.z)
    }
}

impl CameraModel {
    pub fn new(focal: f64, principal: (f64, f64), image_size: (f64, f64), height: f64, horizon_row: f64) -> Result<Self> {
        let cam = Self {
            focal,
            principal,
            image_size,
            height,
            horizon_row,
            homography: None,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return Err(Error::Validation(format!("focal length must be positive, got {}", self.focal)));
        }
        if !(self.height > 0.0) {
            return Err(Error::Validation(format!("camera height must be positive, got {}", self.height)));
        }
        let (w, h) = self.image_size;
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::Validation("image size must be positive".into()));
        }
        if !(self.horizon_row >= 0.0 && self.horizon_row < h) {
            return Err(Error::Validation(format!(
                "horizon row {} must lie in [0, {h})",
                self.horizon_row
            )));
        }
        Ok(())
    }

    /// The pixel-to-ground homography, scaled so that its third row
    /// measures pixel distance from the horizon line.
    pub fn rectifying_homography(&self) -> Matrix3<f64> {
        match self.homography {
            Some(h) => {
                let s = h[(2, 0)].hypot(h[(2, 1)]);
                if s > 0.0 { h / s } else { h }
            }
            None => {
                let d = self.height;
                let f = self.focal;
                let (cx, _) = self.principal;
                Matrix3::new(d, 0.0, -cx * d, 0.0, 0.0, f * d, 0.0, 1.0, -self.horizon_row)
            }
        }
    }

    /// Forward pinhole projection of a ground point (upright model).
    pub fn project_to_pixel(&self, g: GroundPoint) -> (f64, f64) {
        let (cx, _) = self.principal;
        (cx + self.focal * g.x / g.z, self.horizon_row + self.focal * self.height / g.z)
    }

    /// Depth of the ground seen by the bottom image row.
    pub fn near_depth(&self) -> f64 {
        self.focal * self.height / (self.image_size.1 - self.horizon_row)
    }

    /// Centre of the rectified view: the bounding box of the visible ground
    /// wedge between the bottom image row and `max_range`.
    pub fn rectified_center(&self, max_range: f64) -> Point {
        let (w, _) = self.image_size;
        let (cx, _) = self.principal;
        let far = max_range.max(self.near_depth());
        let left = -cx / self.focal * far;
        let right = (w - cx) / self.focal * far;
        let left = left.min(-cx / self.focal * self.near_depth());
        let right = right.max((w - cx) / self.focal * self.near_depth());
        Point::new(0.5 * (left + right), 0.5 * (self.near_depth() + far))
    }
}

/// Intersects the viewing ray of `pixel` with the ground plane.
pub fn ground_project(camera: &CameraModel, pixel: (f64, f64)) -> Result<GroundPoint> {
    let (u, v) = pixel;
    let p = camera.rectifying_homography() * Vector3::new(u, v, 1.0);
    if camera.homography.is_none() && v <= camera.horizon_row || p.z <= 0.0 {
        return Err(Error::HorizonViolation {
            row: v,
            horizon: camera.horizon_row,
        });
    }
    Ok(GroundPoint {
        x: p.x / p.z,
        z: p.y / p.z,
    })
}

pub fn fov_half_angle(camera: &CameraModel) -> f64 {
    (camera.image_size.0 / (2.0 * camera.focal)).atan()
}

/// Pixels per meter at unit depth, `f / d`.
pub fn metric_scale(camera: &CameraModel) -> f64 {
    camera.focal / camera.height
}

/// Options for turning pixel segments into ground segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    /// Ground content beyond this forward depth is cut off (meters); `None`
    /// keeps everything down to the horizon margin.
    pub max_range: Option<f64>,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self { max_range: Some(30.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProjectedSegments {
    pub segments: Vec<Segment>,
    /// Segments with nothing left below the horizon.
    pub dropped: usize,
}

/// Rectifies pixel-frame query segments onto the ground.
///
/// Ground-level concepts map every vertex. Vertical concepts keep only the
/// bottom [`CONTACT_FRACTION`] of their pixel rows and use the ground hull
/// of that strip as a stand-in for the contact region.
pub fn project_query_segments(
    camera: &CameraModel,
    concepts: &[ConceptLabel],
    segments: &[Segment],
    opts: ProjectionOptions,
) -> ProjectedSegments {
    let h = camera.rectifying_homography();
    let row = |i: usize| Vector2::new(h[(i, 0)], h[(i, 1)]);
    // w >= margin  <=>  -w_row . p <= h22 - margin
    let horizon_normal = -row(2);
    let horizon_offset = h[(2, 2)] - HORIZON_MARGIN_PX;
    // z <= R  <=>  (zrow - R wrow) . p <= -(h12 - R h22)
    let range_clip = opts.max_range.map(|r| (row(1) - row(2) * r, -(h[(1, 2)] - r * h[(2, 2)])));

    let mut out = ProjectedSegments::default();
    for seg in segments {
        let vertical = concepts.get(seg.concept).is_some_and(|c| c.vertical);
        let mut poly = seg.polygon.clone();
        if vertical && !poly.is_empty() {
            let (lo, hi) = poly
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
            let cut = hi - CONTACT_FRACTION * (hi - lo);
            poly = geometry::clip_halfplane(&poly, Vector2::new(0.0, -1.0), -cut);
        }
        poly = geometry::clip_halfplane(&poly, horizon_normal, horizon_offset);
        if let Some((n, c)) = range_clip {
            poly = geometry::clip_halfplane(&poly, n, c);
        }
        let projected: Option<Vec<Point>> = poly
            .iter()
            .map(|p| {
                let g = h * Vector3::new(p.x, p.y, 1.0);
                (g.z > 0.0).then(|| Point::new(g.x / g.z, g.y / g.z))
            })
            .collect();
        let Some(mut ground) = projected else {
            out.dropped += 1;
            continue;
        };
        if vertical {
            ground = geometry::convex_hull(&ground);
        }
        if ground.len() < 3 {
            out.dropped += 1;
            continue;
        }
        out.segments.push(Segment::new(seg.concept, ground));
    }
    out
}

//! Seeded synthetic maps and street-level queries.
//!
//! The map is a square city of roads, buildings, water, trees and
//! point-like street furniture, divided into districts that each carry a
//! random subset of the concepts. Each query is cut from a known
//! tile, perturbed (centroid jitter, label dropout, spurious segments) and
//! either rendered through the camera model into pixel coordinates or
//! written verbatim in the ground frame.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use nalgebra::Vector2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::camera_geometry::{CameraModel, QueryFile, QueryFrame};
use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::map_model::{default_concepts, tile_map, Bounds, ConceptLabel, SemanticMap, Segment, Tile, POINT_OBJECT_SIDE};

/// Shape family used for a concept's objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Straight strips crossing the whole map; size is the width.
    Strip,
    /// Rotated rectangles; size is the side length.
    Block,
    /// Star-shaped blobs; size is the outer radius.
    Blob,
    /// Regular octagons; size is the radius.
    Crown,
    /// Small squares placed beside a road; size is ignored.
    Post,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub concept: String,
    pub count: usize,
    pub shape: Shape,
    pub min_size: f64,
    pub max_size: f64,
    /// Rendered height of vertical objects, meters.
    pub height: f64,
}

impl ObjectSpec {
    fn new(concept: &str, count: usize, shape: Shape, min_size: f64, max_size: f64, height: f64) -> Self {
        Self {
            concept: concept.to_string(),
            count,
            shape,
            min_size,
            max_size,
            height,
        }
    }
}

/// How queries are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueryStyle {
    /// Rendered through the camera into pixel coordinates; only the part of
    /// the tile inside the field of view is kept.
    Camera,
    /// The whole tile in the ground frame, seen from a camera at the tile
    /// centre turned by a whole number of sectors.
    #[default]
    Verbatim,
    /// The visible part of the tile in the ground frame, as a perfectly
    /// rectified camera view with exact ground contact.
    Footprint,
}

impl std::str::FromStr for QueryStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "camera" | "cc" => Ok(Self::Camera),
            "verbatim" | "ci" => Ok(Self::Verbatim),
            "footprint" => Ok(Self::Footprint),
            _ => Err(Error::Parameter(format!("query style must be camera or verbatim, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for QueryStyle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Camera => "camera",
            Self::Verbatim => "verbatim",
            Self::Footprint => "footprint",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Side of the square map, meters.
    pub extent: f64,
    pub objects: Vec<ObjectSpec>,
    pub tile_side: f64,
    pub tile_stride: f64,
    pub n_queries: usize,
    pub style: QueryStyle,
    /// Side of the square districts, meters; zero spreads every concept
    /// over the whole map.
    pub district_size: f64,
    /// Chance that a district contains a given concept (roads excepted).
    pub district_keep: f64,
    /// Per-axis standard deviation of the segment translation, meters.
    pub jitter: f64,
    pub dropout: f64,
    /// Expected spurious segments per kept segment.
    pub spurious: f64,
    /// Camera headings are multiples of the sector width when set.
    pub quantized_heading: bool,
    pub sectors: usize,
    pub camera: CameraModel,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            extent: 315.0,
            objects: vec![
                ObjectSpec::new("Road", 8, Shape::Strip, 6.0, 12.0, 0.0),
                ObjectSpec::new("Tree", 150, Shape::Crown, 1.5, 4.0, 0.0),
                ObjectSpec::new("Building", 110, Shape::Block, 8.0, 20.0, 6.0),
                ObjectSpec::new("Water", 6, Shape::Blob, 10.0, 25.0, 0.0),
                ObjectSpec::new("Lamp Post", 150, Shape::Post, 0.0, 0.0, 4.0),
                ObjectSpec::new("Traffic Signal", 40, Shape::Post, 0.0, 0.0, 3.5),
                ObjectSpec::new("Traffic Sign", 80, Shape::Post, 0.0, 0.0, 2.5),
            ],
            tile_side: 30.0,
            tile_stride: 15.0,
            n_queries: 100,
            style: QueryStyle::Verbatim,
            district_size: 60.0,
            district_keep: 0.5,
            jitter: 2.0,
            dropout: 0.1,
            spurious: 0.05,
            quantized_heading: false,
            sectors: 8,
            camera: CameraModel {
                focal: 800.0,
                principal: (640.0, 480.0),
                image_size: (1280.0, 960.0),
                height: 1.7,
                horizon_row: 480.0,
                homography: None,
            },
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::Parameter("map extent must be positive".into()));
        }
        if !(self.district_size >= 0.0) {
            return Err(Error::Parameter("district size must be nonnegative".into()));
        }
        for (name, p) in [("dropout", self.dropout), ("spurious", self.spurious), ("district_keep", self.district_keep)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parameter(format!("{name} probability must lie in [0, 1], got {p}")));
            }
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::Parameter("jitter must be nonnegative".into()));
        }
        if self.sectors < 2 {
            return Err(Error::Parameter("need at least 2 sectors".into()));
        }
        for o in &self.objects {
            if o.shape != Shape::Post && !(o.min_size > 0.0 && o.min_size <= o.max_size) {
                return Err(Error::Parameter(format!("bad size range for {}", o.concept)));
            }
        }
        self.camera.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticQuery {
    pub query: QueryFile,
    /// Ground-truth tile id.
    pub tile: usize,
    /// Camera position in the map frame.
    pub camera_at: Point,
    /// Viewing direction, radians counter-clockwise from +x.
    pub heading: f64,
    pub kept: usize,
    pub dropped: usize,
    pub spurious: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub map: SemanticMap,
    pub queries: Vec<SyntheticQuery>,
}

fn round_mm(p: Point) -> Point {
    Point::new((p.x * 1000.0).round() / 1000.0, (p.y * 1000.0).round() / 1000.0)
}

fn strip(rng: &mut ChaCha8Rng, extent: f64, width: f64) -> Vec<Point> {
    let through = Point::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent));
    let angle = rng.random_range(0.0..TAU);
    let (along, across) = (Vector2::new(angle.cos(), angle.sin()), Vector2::new(-angle.sin(), angle.cos()));
    let (l, w) = (1.5 * extent, 0.5 * width);
    let rect = vec![
        through - along * l - across * w,
        through + along * l - across * w,
        through + along * l + across * w,
        through - along * l + across * w,
    ];
    geometry::clip_to_rect(&rect, Point::origin(), Point::new(extent, extent))
}

/// A random centre at least `reach` from the map border.
fn inner_point(rng: &mut ChaCha8Rng, extent: f64, reach: f64) -> Point {
    let lo = reach.min(0.5 * extent);
    let hi = (extent - reach).max(lo + 1e-9);
    Point::new(rng.random_range(lo..hi), rng.random_range(lo..hi))
}

fn block_at(rng: &mut ChaCha8Rng, center: Point, o: &ObjectSpec) -> Vec<Point> {
    let w = rng.random_range(o.min_size..=o.max_size);
    let h = rng.random_range(o.min_size..=o.max_size);
    let rect = vec![
        Point::new(center.x - 0.5 * w, center.y - 0.5 * h),
        Point::new(center.x + 0.5 * w, center.y - 0.5 * h),
        Point::new(center.x + 0.5 * w, center.y + 0.5 * h),
        Point::new(center.x - 0.5 * w, center.y + 0.5 * h),
    ];
    geometry::rotate_about(&rect, center, rng.random_range(0.0..FRAC_PI_2))
}

fn blob_at(rng: &mut ChaCha8Rng, center: Point, o: &ObjectSpec) -> Vec<Point> {
    let r = rng.random_range(o.min_size..=o.max_size);
    let n = 10;
    (0..n)
        .map(|i| {
            let a = TAU * (i as f64 + rng.random_range(-0.3..0.3)) / n as f64;
            let rr = r * rng.random_range(0.6..=1.0);
            Point::new(center.x + rr * a.cos(), center.y + rr * a.sin())
        })
        .collect()
}

fn crown_at(rng: &mut ChaCha8Rng, center: Point, o: &ObjectSpec) -> Vec<Point> {
    let r = rng.random_range(o.min_size..=o.max_size);
    (0..8)
        .map(|i| {
            let a = FRAC_PI_4 * i as f64;
            Point::new(center.x + r * a.cos(), center.y + r * a.sin())
        })
        .collect()
}

/// Reach of a shape from its centre, for keeping it inside the map.
fn reach(o: &ObjectSpec) -> f64 {
    match o.shape {
        Shape::Block => o.max_size * std::f64::consts::FRAC_1_SQRT_2,
        Shape::Blob | Shape::Crown => o.max_size,
        Shape::Post => POINT_OBJECT_SIDE,
        Shape::Strip => 0.0,
    }
}

fn shape_at(rng: &mut ChaCha8Rng, center: Point, o: &ObjectSpec) -> Vec<Point> {
    match o.shape {
        Shape::Block => block_at(rng, center, o),
        Shape::Blob => blob_at(rng, center, o),
        Shape::Crown => crown_at(rng, center, o),
        Shape::Post | Shape::Strip => geometry::square(center, POINT_OBJECT_SIDE),
    }
}

/// A point near the edge of a random road, or anywhere when there are no roads.
fn roadside(rng: &mut ChaCha8Rng, roads: &[Vec<Point>], extent: f64) -> Point {
    let margin = POINT_OBJECT_SIDE;
    for _ in 0..100 {
        if roads.is_empty() {
            break;
        }
        let road = &roads[rng.random_range(0..roads.len())];
        let i = rng.random_range(0..road.len());
        let (a, b) = (road[i], road[(i + 1) % road.len()]);
        let p = a + (b - a) * rng.random::<f64>();
        let p = p + Vector2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        if p.x > margin && p.y > margin && p.x < extent - margin && p.y < extent - margin {
            return p;
        }
    }
    inner_point(rng, extent, margin)
}

/// Which concepts each district may contain.
struct Districts {
    side: f64,
    per_row: usize,
    allowed: Vec<Vec<bool>>,
}

impl Districts {
    fn new(spec: &SyntheticSpec, n_concepts: usize, rng: &mut ChaCha8Rng) -> Option<Self> {
        if spec.district_size <= 0.0 {
            return None;
        }
        let per_row = (spec.extent / spec.district_size).ceil().max(1.0) as usize;
        let allowed = (0..per_row * per_row)
            .map(|_| (0..n_concepts).map(|_| rng.random_bool(spec.district_keep)).collect())
            .collect();
        Some(Self {
            side: spec.district_size,
            per_row,
            allowed,
        })
    }

    fn allows(&self, p: Point, concept: usize) -> bool {
        let cell = |v: f64| ((v / self.side).floor().max(0.0) as usize).min(self.per_row - 1);
        self.allowed[cell(p.y) * self.per_row + cell(p.x)][concept]
    }
}

/// Generates the map alone.
pub fn generate_map(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Result<SemanticMap> {
    let concepts = default_concepts();
    let concept_id = |name: &str| -> Result<usize> {
        crate::map_model::resolve_concepts(&concepts, &[name.to_string()]).map(|v| v[0])
    };
    let districts = Districts::new(spec, concepts.len(), rng);
    let extent = spec.extent;
    let mut segments = Vec::new();
    let mut roads: Vec<Vec<Point>> = Vec::new();
    // roads first so furniture can line them
    let mut ordered: Vec<&ObjectSpec> = spec.objects.iter().filter(|o| o.shape == Shape::Strip).collect();
    ordered.extend(spec.objects.iter().filter(|o| o.shape != Shape::Strip));
    for o in ordered {
        let concept = concept_id(&o.concept)?;
        for _ in 0..o.count {
            let poly = match o.shape {
                Shape::Strip => {
                    let w = rng.random_range(o.min_size..=o.max_size);
                    let poly = strip(rng, extent, w);
                    if poly.len() >= 3 && geometry::area(&poly) > 1.0 {
                        roads.push(poly.clone());
                    }
                    poly
                }
                _ => {
                    let mut placed = None;
                    for _ in 0..200 {
                        let c = match o.shape {
                            Shape::Post => roadside(rng, &roads, extent),
                            _ => inner_point(rng, extent, reach(o)),
                        };
                        if districts.as_ref().is_none_or(|d| d.allows(c, concept)) {
                            placed = Some(c);
                            break;
                        }
                    }
                    let Some(c) = placed else { continue };
                    shape_at(rng, c, o)
                }
            };
            let poly: Vec<Point> = poly.into_iter().map(round_mm).collect();
            if poly.len() >= 3 && geometry::area(&poly) > 1e-6 && geometry::is_simple(&poly) {
                segments.push(Segment::new(concept, poly));
            }
        }
    }
    SemanticMap::new(concepts, segments, Bounds::new(0.0, 0.0, extent, extent))
}

fn object_spec_for<'a>(spec: &'a SyntheticSpec, concepts: &[ConceptLabel], concept: usize) -> Option<&'a ObjectSpec> {
    let name = &concepts.get(concept)?.name;
    spec.objects.iter().find(|o| o.concept.eq_ignore_ascii_case(name))
}

/// Misclassified patches are superpixel-sized whatever their label.
const SPURIOUS_PATCH: ObjectSpec = ObjectSpec {
    concept: String::new(),
    count: 0,
    shape: Shape::Block,
    min_size: 1.0,
    max_size: 5.0,
    height: 0.0,
};

/// Segments of `tile` with dropout, jitter, and spurious additions applied.
fn perturb(
    spec: &SyntheticSpec,
    concepts: &[ConceptLabel],
    tile: &Tile,
    rng: &mut ChaCha8Rng,
) -> (Vec<Segment>, usize, usize) {
    let normal = (spec.jitter > 0.0).then(|| Normal::new(0.0, spec.jitter).expect("jitter validated"));
    let mut out = Vec::new();
    let mut dropped = 0;
    for seg in &tile.segments {
        if rng.random_bool(spec.dropout) {
            dropped += 1;
            continue;
        }
        let offset = match &normal {
            Some(n) => Vector2::new(n.sample(rng), n.sample(rng)),
            None => Vector2::zeros(),
        };
        out.push(Segment::new(seg.concept, geometry::translate(&seg.polygon, offset)));
    }
    let mut spurious = 0;
    for _ in 0..out.len() {
        if !rng.random_bool(spec.spurious) {
            continue;
        }
        let concept = rng.random_range(0..concepts.len());
        let (lo, hi) = (tile.min(), tile.max());
        let c = Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        let poly = block_at(rng, c, &SPURIOUS_PATCH);
        out.push(Segment::new(concept, poly));
        spurious += 1;
    }
    let clipped = out
        .into_iter()
        .filter_map(|s| {
            let p = geometry::clip_to_rect(&s.polygon, tile.min(), tile.max());
            (p.len() >= 3 && geometry::area(&p) > 1e-9).then(|| Segment::new(s.concept, p))
        })
        .collect();
    (clipped, dropped, spurious)
}

/// Map frame to the camera frame (x right, z forward as the second
/// coordinate).
fn to_camera(poly: &[Point], at: Point, heading: f64) -> Vec<Point> {
    let turned = geometry::rotate_about(poly, at, FRAC_PI_2 - heading);
    geometry::translate(&turned, -at.coords)
}

/// The unperturbed content of a tile as a ground-frame query seen from the
/// tile centre looking along `heading`.
pub fn tile_query(tile: &Tile, heading: f64, camera: &CameraModel) -> QueryFile {
    QueryFile {
        camera: camera.clone(),
        frame: QueryFrame::Ground,
        origin: Some(Point::origin()),
        segments: tile
            .segments
            .iter()
            .map(|s| Segment::new(s.concept, to_camera(&s.polygon, tile.center, heading)))
            .collect(),
    }
}

/// Keeps the part of a camera-frame polygon the camera sees.
fn clip_to_view(poly: &[Point], camera: &CameraModel, max_range: f64) -> Vec<Point> {
    let (w, _) = camera.image_size;
    let (cx, _) = camera.principal;
    let f = camera.focal;
    let near = camera.near_depth() * 1.001;
    let mut p = geometry::clip_halfplane(poly, Vector2::new(0.0, -1.0), -near);
    p = geometry::clip_halfplane(&p, Vector2::new(0.0, 1.0), max_range);
    p = geometry::clip_halfplane(&p, Vector2::new(1.0, -(w - cx) / f), 0.0);
    geometry::clip_halfplane(&p, Vector2::new(-1.0, -cx / f), 0.0)
}

/// Pixel outline of a camera-frame ground polygon, extruded to `height`
/// when positive.
fn render(poly: &[Point], camera: &CameraModel, height: f64) -> Vec<Point> {
    let (cx, _) = camera.principal;
    let (f, d, yh) = (camera.focal, camera.height, camera.horizon_row);
    let pix = |x: f64, z: f64, h: f64| Point::new(cx + f * x / z, yh + f * (d - h) / z);
    if height > 0.0 {
        let pts: Vec<Point> = poly.iter().flat_map(|p| [pix(p.x, p.y, 0.0), pix(p.x, p.y, height)]).collect();
        geometry::convex_hull(&pts)
    } else {
        poly.iter().map(|p| pix(p.x, p.y, 0.0)).collect()
    }
}

fn make_query(
    spec: &SyntheticSpec,
    concepts: &[ConceptLabel],
    tile: &Tile,
    rng: &mut ChaCha8Rng,
) -> SyntheticQuery {
    let step = TAU / spec.sectors as f64;
    let heading = match (spec.style, spec.quantized_heading) {
        (QueryStyle::Verbatim, _) | (_, true) => FRAC_PI_2 + step * rng.random_range(0..spec.sectors) as f64,
        (_, false) => rng.random_range(0.0..TAU),
    };
    let (segments, dropped, spurious) = perturb(spec, concepts, tile, rng);
    let at = tile.center;
    let mut out = Vec::new();
    let frame = match spec.style {
        QueryStyle::Verbatim => {
            for s in segments {
                out.push(Segment::new(s.concept, to_camera(&s.polygon, at, heading)));
            }
            QueryFrame::Ground
        }
        QueryStyle::Footprint => {
            for s in segments {
                let view = clip_to_view(&to_camera(&s.polygon, at, heading), &spec.camera, 30.0);
                if view.len() >= 3 && geometry::area(&view) >= 1e-6 {
                    out.push(Segment::new(s.concept, view));
                }
            }
            QueryFrame::Ground
        }
        QueryStyle::Camera => {
            for s in segments {
                let view = clip_to_view(&to_camera(&s.polygon, at, heading), &spec.camera, 30.0);
                if view.len() < 3 || geometry::area(&view) < 1e-6 {
                    continue;
                }
                let height = object_spec_for(spec, concepts, s.concept)
                    .filter(|_| concepts[s.concept].vertical)
                    .map_or(0.0, |o| o.height);
                let pix = render(&view, &spec.camera, height);
                if pix.len() >= 3 {
                    out.push(Segment::new(s.concept, pix));
                }
            }
            QueryFrame::Pixel
        }
    };
    if out.is_empty() {
        log::warn!("synthetic query for tile {} has no segments", tile.id);
    }
    SyntheticQuery {
        query: QueryFile {
            camera: spec.camera.clone(),
            frame,
            origin: (spec.style == QueryStyle::Verbatim).then(Point::origin),
            segments: out.clone(),
        },
        tile: tile.id,
        camera_at: at,
        heading,
        kept: out.len(),
        dropped,
        spurious,
    }
}

/// Map plus queries, fully determined by `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let map = generate_map(spec, &mut rng)?;
    let tiles = tile_map(&map, spec.tile_side, spec.tile_stride)?;
    let candidates: Vec<&Tile> = tiles.iter().filter(|t| !t.empty).collect();
    if candidates.is_empty() && spec.n_queries > 0 {
        return Err(Error::Validation("synthetic map has no nonempty tile to query".into()));
    }
    let picks: Vec<usize> = if spec.n_queries <= candidates.len() {
        let mut v = sample(&mut rng, candidates.len(), spec.n_queries).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..spec.n_queries).map(|_| rng.random_range(0..candidates.len())).collect()
    };
    let queries = picks
        .into_iter()
        .map(|i| make_query(spec, &map.concepts, candidates[i], &mut rng))
        .collect();
    Ok(SyntheticCorpus { map, queries })
}

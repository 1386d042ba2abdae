//! Planar polygon primitives: area moments, half-plane clipping, hulls.

use nalgebra::{Point2, Vector2};

pub type Point = Point2<f64>;

/// Area-weighted moments of a simple polygon.
///
/// `cov` holds the central second moments of a uniform density over the
/// polygon, i.e. the covariance of a point drawn uniformly from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaMoments {
    pub area: f64,
    pub centroid: Point,
    pub cov: [[f64; 2]; 2],
}

/// Signed shoelace area; positive for counter-clockwise vertex order.
pub fn signed_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let o = poly[0];
    let mut acc = 0.0;
    for i in 1..poly.len() - 1 {
        let a = poly[i] - o;
        let b = poly[i + 1] - o;
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

pub fn area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

/// Closed-form polygon moments from Green's theorem.
///
/// Returns `None` when the polygon has (numerically) zero area. Coordinates
/// are shifted to the first vertex before accumulation so that polygons far
/// from the origin keep full precision.
pub fn area_moments(poly: &[Point]) -> Option<AreaMoments> {
    if poly.len() < 3 {
        return None;
    }
    let o = poly[0];
    let n = poly.len();
    let (mut a2, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut scale: f64 = 0.0;
    for i in 0..n {
        let p = poly[i] - o;
        let q = poly[(i + 1) % n] - o;
        scale = scale.max(p.x.abs()).max(p.y.abs());
        let c = p.x * q.y - q.x * p.y;
        a2 += c;
        sx += (p.x + q.x) * c;
        sy += (p.y + q.y) * c;
        sxx += (p.x * p.x + p.x * q.x + q.x * q.x) * c;
        syy += (p.y * p.y + p.y * q.y + q.y * q.y) * c;
        sxy += (p.x * q.y + 2.0 * p.x * p.y + 2.0 * q.x * q.y + q.x * p.y) * c;
    }
    let area = 0.5 * a2;
    if area.abs() <= 1e-14 * scale.max(1.0).powi(2) {
        return None;
    }
    let mx = sx / (6.0 * area);
    let my = sy / (6.0 * area);
    let exx = sxx / (12.0 * area);
    let eyy = syy / (12.0 * area);
    let exy = sxy / (24.0 * area);
    let cxx = exx - mx * mx;
    let cyy = eyy - my * my;
    let cxy = exy - mx * my;
    Some(AreaMoments {
        area: area.abs(),
        centroid: Point::new(o.x + mx, o.y + my),
        cov: [[cxx, cxy], [cxy, cyy]],
    })
}

/// Keeps the part of `poly` satisfying `normal · p <= offset`
/// (Sutherland-Hodgman step against a single half-plane).
pub fn clip_halfplane(poly: &[Point], normal: Vector2<f64>, offset: f64) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    if n == 0 {
        return out;
    }
    let side = |p: &Point| normal.dot(&p.coords) - offset;
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let sc = side(&cur);
        let sn = side(&next);
        if sc <= 0.0 {
            out.push(cur);
        }
        if (sc < 0.0 && sn > 0.0) || (sc > 0.0 && sn < 0.0) {
            let t = sc / (sc - sn);
            out.push(cur + (next - cur) * t);
        }
    }
    out
}

/// Clips a polygon to an axis-aligned rectangle. Concave inputs may come
/// back with zero-width bridges along the rectangle edges; these carry no
/// area and leave the moments unchanged.
pub fn clip_to_rect(poly: &[Point], min: Point, max: Point) -> Vec<Point> {
    let mut out = poly.to_vec();
    for (normal, offset) in [
        (Vector2::new(-1.0, 0.0), -min.x),
        (Vector2::new(1.0, 0.0), max.x),
        (Vector2::new(0.0, -1.0), -min.y),
        (Vector2::new(0.0, 1.0), max.y),
    ] {
        out = clip_halfplane(&out, normal, offset);
        if out.is_empty() {
            return out;
        }
    }
    // intersection points can land a few ulps outside the edge
    for p in &mut out {
        p.x = p.x.clamp(min.x, max.x);
        p.y = p.y.clamp(min.y, max.y);
    }
    out
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, without
/// collinear points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Point, a: &Point, b: &Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut lower: Vec<Point> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// True when no two non-adjacent edges properly cross.
pub fn is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 4 {
        return true;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_cross(&a, &b, &c, &d) {
                return false;
            }
        }
    }
    true
}

/// Rotates every vertex by `angle` radians about `center`.
pub fn rotate_about(poly: &[Point], center: Point, angle: f64) -> Vec<Point> {
    let (s, c) = angle.sin_cos();
    poly.iter()
        .map(|p| {
            let d = p - center;
            Point::new(center.x + c * d.x - s * d.y, center.y + s * d.x + c * d.y)
        })
        .collect()
}

pub fn translate(poly: &[Point], offset: Vector2<f64>) -> Vec<Point> {
    poly.iter().map(|p| p + offset).collect()
}

/// Axis-aligned square of side `side` centered on `center`, counter-clockwise.
pub fn square(center: Point, side: f64) -> Vec<Point> {
    let h = 0.5 * side;
    vec![
        Point::new(center.x - h, center.y - h),
        Point::new(center.x + h, center.y - h),
        Point::new(center.x + h, center.y + h),
        Point::new(center.x - h, center.y + h),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_square() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    #[test]
    fn square_moments() {
        let m = area_moments(&unit_square()).unwrap();
        assert_abs_diff_eq!(m.area, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.centroid.x, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.cov[0][0], 1.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.cov[0][1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn right_triangle_moments() {
        // uniform on triangle (0,0),(1,0),(0,1): var = 1/18, cov = -1/36
        let tri = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let m = area_moments(&tri).unwrap();
        assert_abs_diff_eq!(m.area, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.centroid.y, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.cov[0][0], 1.0 / 18.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.cov[0][1], -1.0 / 36.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_has_no_moments() {
        let line = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        assert!(area_moments(&line).is_none());
    }

    #[test]
    fn clip_half_overlap() {
        let sq = unit_square();
        let clipped = clip_to_rect(&sq, Point::new(0.5, -1.0), Point::new(2.0, 2.0));
        assert_abs_diff_eq!(area(&clipped), 0.5, epsilon = 1e-15);
        let outside = clip_to_rect(&sq, Point::new(3.0, 3.0), Point::new(4.0, 4.0));
        assert!(outside.len() < 3 || area(&outside) == 0.0);
    }

    #[test]
    fn clip_idempotent() {
        let poly = vec![
            Point::new(-1.0, 0.2),
            Point::new(2.0, -0.5),
            Point::new(1.5, 1.7),
            Point::new(0.3, 0.9),
        ];
        let (lo, hi) = (Point::new(0.0, 0.0), Point::new(1.0, 1.0));
        let once = clip_to_rect(&poly, lo, hi);
        let twice = clip_to_rect(&once, lo, hi);
        assert_eq!(once.len(), twice.len());
        for (a, b) in once.iter().zip(&twice) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hull_of_square_with_interior() {
        let mut pts = unit_square();
        pts.push(Point::new(0.5, 0.5));
        pts.push(Point::new(0.5, 0.0));
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert_abs_diff_eq!(signed_area(&hull), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bowtie_is_not_simple() {
        let bow = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(!is_simple(&bow));
        assert!(is_simple(&unit_square()));
    }
}

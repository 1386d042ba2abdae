use nalgebra::{Matrix2, Vector2};

use super::{Segment, Tile};
use crate::geometry::{self, Point};

/// Smallest eigenvalue allowed in a segment covariance, in square meters.
pub const COV_FLOOR: f64 = 0.01;

/// A two-dimensional Gaussian on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

impl GaussianComponent {
    pub fn new(mean: Vector2<f64>, cov: Matrix2<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn isotropic(mean: Vector2<f64>, sigma: f64) -> Self {
        Self::new(mean, Matrix2::identity() * (sigma * sigma))
    }

    /// Eigenvalues of the covariance, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let (lo, hi, _) = sym_eigen(&self.cov);
        (lo, hi)
    }
}

/// Closed-form eigen-decomposition of a symmetric 2x2 matrix: ascending
/// eigenvalues and the unit eigenvector of the larger one.
fn sym_eigen(m: &Matrix2<f64>) -> (f64, f64, Vector2<f64>) {
    let a = m[(0, 0)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let d = m[(1, 1)];
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (lo, hi) = (mid - rad, mid + rad);
    let v = if b.abs() > 1e-300 {
        Vector2::new(hi - d, b).normalize()
    } else if a >= d {
        Vector2::new(1.0, 0.0)
    } else {
        Vector2::new(0.0, 1.0)
    };
    (lo, hi, v)
}

/// Clamps both eigenvalues of a symmetric matrix from below.
fn floor_eigenvalues(m: &Matrix2<f64>, floor: f64) -> Matrix2<f64> {
    let (lo, hi, v) = sym_eigen(m);
    if lo >= floor {
        return m.symmetrize();
    }
    let w = Vector2::new(-v.y, v.x);
    v * v.transpose() * hi.max(floor) + w * w.transpose() * lo.max(floor)
}

trait Symmetrize {
    fn symmetrize(&self) -> Self;
}

impl Symmetrize for Matrix2<f64> {
    fn symmetrize(&self) -> Self {
        (self + self.transpose()) * 0.5
    }
}

/// A segment reduced to its moment-matched Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolygonGaussian {
    pub gaussian: GaussianComponent,
    pub area: f64,
    /// The polygon had zero area; the vertex mean and a floor covariance
    /// were used instead of area moments.
    pub degenerate: bool,
}

/// Moment-matches a uniform density over the polygon: area centroid and
/// central second moments, with the covariance floored at [`COV_FLOOR`].
pub fn polygon_gaussian(polygon: &[Point]) -> PolygonGaussian {
    match geometry::area_moments(polygon) {
        Some(m) => {
            let cov = Matrix2::new(m.cov[0][0], m.cov[0][1], m.cov[1][0], m.cov[1][1]);
            PolygonGaussian {
                gaussian: GaussianComponent::new(m.centroid.coords, floor_eigenvalues(&cov, COV_FLOOR)),
                area: m.area,
                degenerate: false,
            }
        }
        None => {
            let n = polygon.len().max(1) as f64;
            let mean = polygon.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / n;
            PolygonGaussian {
                gaussian: GaussianComponent::new(mean, Matrix2::identity() * COV_FLOOR),
                area: 0.0,
                degenerate: true,
            }
        }
    }
}

/// Weighted mixture of segment Gaussians for one concept.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConceptGmm {
    pub weights: Vec<f64>,
    pub components: Vec<GaussianComponent>,
}

impl ConceptGmm {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    /// Builds a mixture with weights proportional to segment area. When
    /// every segment is degenerate the weights fall back to uniform.
    pub fn from_fits(fits: &[PolygonGaussian]) -> Self {
        if fits.is_empty() {
            return Self::default();
        }
        let total: f64 = fits.iter().map(|f| f.area).sum();
        let weights = if total > 0.0 {
            fits.iter().map(|f| f.area / total).collect()
        } else {
            vec![1.0 / fits.len() as f64; fits.len()]
        };
        Self {
            weights,
            components: fits.iter().map(|f| f.gaussian).collect(),
        }
    }
}

pub fn tile_gmm(tile: &Tile, concept: usize) -> ConceptGmm {
    concept_gmm(&tile.segments, concept)
}

/// One mixture per concept id in `0..n_concepts`.
pub fn tile_gmms(tile: &Tile, n_concepts: usize) -> Vec<ConceptGmm> {
    segment_gmms(&tile.segments, n_concepts)
}

/// Mixture of the segments labelled `concept`.
pub fn concept_gmm(segments: &[Segment], concept: usize) -> ConceptGmm {
    let fits: Vec<PolygonGaussian> = segments
        .iter()
        .filter(|s| s.concept == concept)
        .map(|s| polygon_gaussian(&s.polygon))
        .collect();
    ConceptGmm::from_fits(&fits)
}

pub fn segment_gmms(segments: &[Segment], n_concepts: usize) -> Vec<ConceptGmm> {
    (0..n_concepts).map(|c| concept_gmm(segments, c)).collect()
}

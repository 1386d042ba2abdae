//! Semantic Segment Layout descriptor.
//!
//! Each concept's segments form a Gaussian mixture. Around the descriptor
//! origin sit `n_rings x n_sectors` isotropic Gaussian pooling regions; the
//! descriptor entry for a (concept, region) pair is the Hellinger distance
//! derived from the mixture-to-region Bhattacharyya distance. Every concept
//! block is L2-normalised on its own; absent concepts contribute a zero block
//! and a cleared presence bit.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::map_model::{ConceptGmm, GaussianComponent};

/// Orientation placing sector 0 on the +y axis (north in the map, the
/// viewing direction in the camera frame).
pub const NORTH: f64 = FRAC_PI_2;

/// Where a descriptor is anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OriginMode {
    /// Centre of the tile, or of the rectified query view ("CI").
    #[default]
    ImageCenter,
    /// The camera position ("CC").
    CameraCenter,
}

impl std::str::FromStr for OriginMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ci" => Ok(Self::ImageCenter),
            "cc" => Ok(Self::CameraCenter),
            _ => Err(Error::Parameter(format!("origin mode must be CI or CC, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for OriginMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ImageCenter => "ci",
            Self::CameraCenter => "cc",
        })
    }
}

/// Annular grid of Gaussian pooling regions.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolingLayout {
    pub n_sectors: usize,
    /// One radius per ring, meters, strictly increasing.
    pub ring_radii: Vec<f64>,
    /// Isotropic standard deviation of the ring's pooling Gaussians, meters.
    pub sigmas: Vec<f64>,
}

impl Default for PoolingLayout {
    fn default() -> Self {
        Self {
            n_sectors: 8,
            ring_radii: vec![15.0],
            sigmas: vec![7.5],
        }
    }
}

impl PoolingLayout {
    pub fn new(n_sectors: usize, ring_radii: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let layout = Self {
            n_sectors,
            ring_radii,
            sigmas,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sectors < 2 {
            return Err(Error::Parameter(format!("need at least 2 sectors, got {}", self.n_sectors)));
        }
        if self.ring_radii.is_empty() || self.ring_radii.len() != self.sigmas.len() {
            return Err(Error::Parameter("need one radius and one sigma per ring".into()));
        }
        if self.ring_radii.windows(2).any(|w| !(w[0] < w[1])) || self.ring_radii.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::Parameter("ring radii must be nonnegative and strictly increasing".into()));
        }
        if self.sigmas.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Parameter("pooling sigma must be positive".into()));
        }
        Ok(())
    }

    pub fn n_rings(&self) -> usize {
        self.ring_radii.len()
    }

    /// Entries per concept block.
    pub fn block_len(&self) -> usize {
        self.n_rings() * self.n_sectors
    }
}

/// One presence bit per concept.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct PresenceVector(pub Vec<bool>);

impl PresenceVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn to_bitstring(&self) -> String {
        self.0.iter().map(|b| if *b { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }
}

pub fn presence_vector(gmms: &[ConceptGmm]) -> PresenceVector {
    PresenceVector(gmms.iter().map(|g| !g.is_empty()).collect())
}

/// Descriptor of one location: per-concept blocks of `n_rings x n_sectors`
/// values, stored concept-major, then ring, then sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SslDescriptor {
    /// Concept id of each block.
    pub concepts: Vec<usize>,
    pub n_rings: usize,
    pub n_sectors: usize,
    pub values: Vec<f64>,
    pub presence: PresenceVector,
    pub origin: Point,
    /// Angle of sector 0, radians.
    pub orientation: f64,
}

impl SslDescriptor {
    /// Wraps raw values; `values.len()` must equal
    /// `concepts.len() * n_rings * n_sectors`.
    pub fn from_values(concepts: Vec<usize>, n_rings: usize, n_sectors: usize, values: Vec<f64>, presence: PresenceVector) -> Result<Self> {
        if values.len() != concepts.len() * n_rings * n_sectors || presence.len() != concepts.len() {
            return Err(Error::Contract("descriptor shape does not match its concept list".into()));
        }
        Ok(Self {
            concepts,
            n_rings,
            n_sectors,
            values,
            presence,
            origin: Point::origin(),
            orientation: NORTH,
        })
    }

    pub fn block_len(&self) -> usize {
        self.n_rings * self.n_sectors
    }

    pub fn n_blocks(&self) -> usize {
        self.concepts.len()
    }

    pub fn block(&self, b: usize) -> &[f64] {
        let n = self.block_len();
        &self.values[b * n..(b + 1) * n]
    }

    pub fn get(&self, block: usize, ring: usize, sector: usize) -> f64 {
        self.values[(block * self.n_rings + ring) * self.n_sectors + sector]
    }

    /// True when both descriptors share concepts, rings, and sectors.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.concepts == other.concepts && self.n_rings == other.n_rings && self.n_sectors == other.n_sectors
    }

    /// Keeps only the blocks of the listed concept ids, in that order.
    pub fn restrict(&self, concepts: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(concepts.len() * self.block_len());
        let mut presence = Vec::with_capacity(concepts.len());
        for c in concepts {
            let b = self
                .concepts
                .iter()
                .position(|x| x == c)
                .ok_or_else(|| Error::Contract(format!("descriptor has no block for concept {c}")))?;
            values.extend_from_slice(self.block(b));
            presence.push(self.presence.get(b));
        }
        Ok(Self {
            concepts: concepts.to_vec(),
            values,
            presence: PresenceVector(presence),
            ..self.clone()
        })
    }
}

/// Pooling Gaussian of one (ring, sector) cell.
pub fn pooling_gaussian(layout: &PoolingLayout, ring: usize, sector: usize, origin: Point, orientation: f64) -> GaussianComponent {
    let theta = orientation + TAU * sector as f64 / layout.n_sectors as f64;
    let r = layout.ring_radii[ring];
    let mean = origin.coords + Vector2::new(theta.cos(), theta.sin()) * r;
    GaussianComponent::isotropic(mean, layout.sigmas[ring])
}

fn check_spd(cov: &Matrix2<f64>, which: &str) -> Result<f64> {
    let det = cov.determinant();
    let sym = (cov[(0, 1)] - cov[(1, 0)]).abs() <= 1e-12 * cov.abs().max().max(1.0);
    if !(sym && det > 0.0 && cov[(0, 0)] > 0.0 && det.is_finite()) {
        return Err(Error::NumericDomain(format!("{which} covariance is not symmetric positive definite")));
    }
    Ok(det)
}

/// Closed-form Bhattacharyya distance between two Gaussians.
pub fn bhattacharyya_gauss(gs: &GaussianComponent, gp: &GaussianComponent) -> Result<f64> {
    let det_s = check_spd(&gs.cov, "segment")?;
    let det_p = check_spd(&gp.cov, "pooling")?;
    let cov = (gs.cov + gp.cov) * 0.5;
    let det = cov.determinant();
    let inv = cov
        .try_inverse()
        .ok_or_else(|| Error::NumericDomain("averaged covariance is singular".into()))?;
    let diff = gs.mean - gp.mean;
    let mahalanobis = diff.dot(&(inv * diff));
    let log_term = det.ln() - 0.5 * (det_s.ln() + det_p.ln());
    Ok((0.125 * mahalanobis + 0.5 * log_term).max(0.0))
}

/// Weighted-sum approximation of the mixture-to-Gaussian Bhattacharyya
/// distance.
pub fn bhattacharyya_gmm(gmm: &ConceptGmm, gp: &GaussianComponent) -> Result<f64> {
    if gmm.is_empty() {
        return Err(Error::EmptyMixture);
    }
    gmm.weights
        .iter()
        .zip(&gmm.components)
        .try_fold(0.0, |acc, (w, g)| Ok(acc + w * bhattacharyya_gauss(g, gp)?))
}

/// `sqrt(1 - exp(-d_B))`.
pub fn hellinger(d_b: f64) -> Result<f64> {
    if !(d_b >= 0.0) {
        return Err(Error::NumericDomain(format!("Bhattacharyya distance must be nonnegative, got {d_b}")));
    }
    Ok((-(-d_b).exp_m1()).sqrt())
}

/// Un-normalised Hellinger block of one concept against a set of pooling
/// regions; `None` for an absent concept.
pub fn pooled_block(gmm: &ConceptGmm, pools: &[GaussianComponent]) -> Result<Option<Vec<f64>>> {
    if gmm.is_empty() {
        return Ok(None);
    }
    pools
        .iter()
        .map(|p| hellinger(bhattacharyya_gmm(gmm, p)?))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn normalize(block: &mut [f64]) {
    let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        block.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Builds a descriptor from one mixture per concept (block `i` is concept
/// `i`).
pub fn extract_descriptor(gmms: &[ConceptGmm], layout: &PoolingLayout, origin: Point, orientation: f64) -> Result<SslDescriptor> {
    layout.validate()?;
    let pools: Vec<GaussianComponent> = (0..layout.n_rings())
        .flat_map(|r| (0..layout.n_sectors).map(move |s| (r, s)))
        .map(|(r, s)| pooling_gaussian(layout, r, s, origin, orientation))
        .collect();
    let mut values = Vec::with_capacity(gmms.len() * pools.len());
    for gmm in gmms {
        match pooled_block(gmm, &pools)? {
            Some(mut block) => {
                normalize(&mut block);
                values.extend(block);
            }
            None => values.extend(std::iter::repeat_n(0.0, pools.len())),
        }
    }
    Ok(SslDescriptor {
        concepts: (0..gmms.len()).collect(),
        n_rings: layout.n_rings(),
        n_sectors: layout.n_sectors,
        values,
        presence: presence_vector(gmms),
        origin,
        orientation,
    })
}

/// Debug dump: `DESC tile concept ring sector value` lines followed by
/// `PRES tile bits`.
pub fn write_descriptor_dump(out: &mut String, tile_id: usize, desc: &SslDescriptor) {
    for (b, concept) in desc.concepts.iter().enumerate() {
        for r in 0..desc.n_rings {
            for s in 0..desc.n_sectors {
                writeln!(out, "DESC {tile_id} {concept} {r} {s} {}", desc.get(b, r, s)).unwrap();
            }
        }
    }
    writeln!(out, "PRES {tile_id} {}", desc.presence.to_bitstring()).unwrap();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::polygon_gaussian;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn gauss(mx: f64, my: f64, cov: Matrix2<f64>) -> GaussianComponent {
        GaussianComponent::new(Vector2::new(mx, my), cov)
    }

    #[test]
    fn pooling_layout_defaults() {
        let layout = PoolingLayout::default();
        let g = pooling_gaussian(&layout, 0, 0, Point::origin(), 0.0);
        assert_abs_diff_eq!(g.mean, Vector2::new(15.0, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(g.cov, Matrix2::identity() * 56.25, epsilon = 1e-12);
        let g = pooling_gaussian(&layout, 0, 2, Point::origin(), 0.0);
        assert_abs_diff_eq!(g.mean, Vector2::new(0.0, 15.0), epsilon = 1e-12);
    }

    #[test]
    fn pooling_orientation_pi_reflects() {
        let layout = PoolingLayout::default();
        let o = Point::new(3.0, -2.0);
        for s in 0..8 {
            let a = pooling_gaussian(&layout, 0, s, o, 0.3);
            let b = pooling_gaussian(&layout, 0, s, o, 0.3 + std::f64::consts::PI);
            assert_abs_diff_eq!(a.mean - o.coords, -(b.mean - o.coords), epsilon = 1e-12);
        }
    }

    #[test]
    fn layout_validation() {
        assert!(PoolingLayout::new(1, vec![15.0], vec![7.5]).is_err());
        assert!(PoolingLayout::new(8, vec![15.0, 10.0], vec![7.5, 7.5]).is_err());
        assert!(PoolingLayout::new(8, vec![15.0], vec![0.0]).is_err());
        assert!(PoolingLayout::new(6, vec![10.0, 20.0], vec![5.0, 8.0]).is_ok());
    }

    #[test]
    fn bhattacharyya_identical_is_zero() {
        let g = gauss(1.0, 2.0, Matrix2::new(2.0, 0.3, 0.3, 1.0));
        assert_eq!(bhattacharyya_gauss(&g, &g).unwrap(), 0.0);
    }

    #[test]
    fn bhattacharyya_rejects_non_spd() {
        let g = gauss(0.0, 0.0, Matrix2::identity());
        let bad = gauss(0.0, 0.0, Matrix2::new(1.0, 2.0, 2.0, 1.0));
        assert!(matches!(bhattacharyya_gauss(&bad, &g), Err(Error::NumericDomain(_))));
    }

    #[test]
    fn gmm_reductions() {
        let p = gauss(0.0, 0.0, Matrix2::identity() * 4.0);
        let g = gauss(1.0, 0.5, Matrix2::identity());
        let single = ConceptGmm {
            weights: vec![1.0],
            components: vec![g],
        };
        let twin = ConceptGmm {
            weights: vec![0.5, 0.5],
            components: vec![g, g],
        };
        let direct = bhattacharyya_gauss(&g, &p).unwrap();
        assert_eq!(bhattacharyya_gmm(&single, &p).unwrap(), direct);
        assert_abs_diff_eq!(bhattacharyya_gmm(&twin, &p).unwrap(), direct, epsilon = 1e-15);
        assert!(matches!(bhattacharyya_gmm(&ConceptGmm::default(), &p), Err(Error::EmptyMixture)));
    }

    #[test]
    fn gmm_weighted_sum() {
        // components with d_B = 0.1 and 0.3 against a unit pooling Gaussian:
        // mean offsets sqrt(8 * d_B) under identity covariances
        let p = gauss(0.0, 0.0, Matrix2::identity());
        let a = gauss((8.0f64 * 0.1).sqrt(), 0.0, Matrix2::identity());
        let b = gauss(0.0, (8.0f64 * 0.3).sqrt(), Matrix2::identity());
        let gmm = ConceptGmm {
            weights: vec![0.25, 0.75],
            components: vec![a, b],
        };
        assert_abs_diff_eq!(bhattacharyya_gmm(&gmm, &p).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn hellinger_values() {
        assert_eq!(hellinger(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(hellinger(1e9).unwrap(), 1.0, epsilon = 1e-12);
        assert!(hellinger(-1e-3).is_err());
        assert!(hellinger(f64::NAN).is_err());
    }

    fn square_gmm(cx: f64, cy: f64, side: f64) -> ConceptGmm {
        let poly = crate::geometry::square(Point::new(cx, cy), side);
        ConceptGmm::from_fits(&[polygon_gaussian(&poly)])
    }

    #[test]
    fn empty_scene_gives_zero_descriptor() {
        let gmms = vec![ConceptGmm::default(); 7];
        let d = extract_descriptor(&gmms, &PoolingLayout::default(), Point::origin(), NORTH).unwrap();
        assert!(d.values.iter().all(|v| *v == 0.0));
        assert_eq!(d.presence.count(), 0);
        assert_eq!(d.values.len(), 56);
    }

    #[test]
    fn single_present_concept() {
        let mut gmms = vec![ConceptGmm::default(); 7];
        gmms[3] = square_gmm(5.0, 8.0, 4.0);
        let d = extract_descriptor(&gmms, &PoolingLayout::default(), Point::origin(), NORTH).unwrap();
        for b in 0..7 {
            let norm: f64 = d.block(b).iter().map(|v| v * v).sum::<f64>().sqrt();
            if b == 3 {
                assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
            } else {
                assert_eq!(norm, 0.0);
            }
        }
        assert_eq!(d.presence.to_bitstring(), "0001000");
    }

    #[test]
    fn presence_examples() {
        let mut gmms = vec![ConceptGmm::default(); 7];
        assert_eq!(presence_vector(&gmms).count(), 0);
        gmms[0] = square_gmm(0.0, 0.0, 1.0);
        gmms[3] = square_gmm(0.0, 0.0, 1.0);
        assert_eq!(presence_vector(&gmms).count(), 2);
        let all = vec![square_gmm(0.0, 0.0, 1.0); 7];
        assert_eq!(presence_vector(&all).to_bitstring(), "1111111");
    }

    #[test]
    fn restrict_keeps_requested_blocks() {
        let mut gmms = vec![ConceptGmm::default(); 7];
        gmms[2] = square_gmm(5.0, 8.0, 4.0);
        let d = extract_descriptor(&gmms, &PoolingLayout::default(), Point::origin(), NORTH).unwrap();
        let r = d.restrict(&[2]).unwrap();
        assert_eq!(r.values, d.block(2));
        assert_eq!(r.presence.to_bitstring(), "1");
        assert!(d.restrict(&[9]).is_err());
    }

    #[test]
    fn dump_format() {
        let mut gmms = vec![ConceptGmm::default(); 2];
        gmms[1] = square_gmm(1.0, 1.0, 2.0);
        let layout = PoolingLayout::new(4, vec![10.0], vec![5.0]).unwrap();
        let d = extract_descriptor(&gmms, &layout, Point::origin(), NORTH).unwrap();
        let mut out = String::new();
        write_descriptor_dump(&mut out, 7, &d);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], "DESC 7 0 0 0 0");
        assert_eq!(lines[8], "PRES 7 01");
    }

    fn spd() -> impl Strategy<Value = Matrix2<f64>> {
        (0.05..20.0f64, 0.05..20.0f64, -1.5..1.5f64).prop_map(|(a, b, t)| {
            let (s, c) = t.sin_cos();
            let r = Matrix2::new(c, -s, s, c);
            r * Matrix2::new(a, 0.0, 0.0, b) * r.transpose()
        })
    }

    fn gaussian() -> impl Strategy<Value = GaussianComponent> {
        (-20.0..20.0f64, -20.0..20.0f64, spd()).prop_map(|(x, y, c)| gauss(x, y, c))
    }

    proptest! {
        #[test]
        fn bhattacharyya_symmetric(a in gaussian(), b in gaussian()) {
            let ab = bhattacharyya_gauss(&a, &b).unwrap();
            let ba = bhattacharyya_gauss(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        }

        #[test]
        fn hellinger_triangle_on_gaussians(a in gaussian(), b in gaussian(), c in gaussian()) {
            let h = |x: &GaussianComponent, y: &GaussianComponent| hellinger(bhattacharyya_gauss(x, y).unwrap()).unwrap();
            prop_assert!(h(&a, &c) <= h(&a, &b) + h(&b, &c) + 1e-12);
        }

        #[test]
        fn hellinger_monotone(x in 0.0..50.0f64, dx in 1e-6..10.0f64) {
            let a = hellinger(x).unwrap();
            let b = hellinger(x + dx).unwrap();
            prop_assert!(a <= b && (0.0..=1.0).contains(&b));
        }

        #[test]
        fn translation_equivariance(dx in -100.0..100.0f64, dy in -100.0..100.0f64, cx in -10.0..10.0f64, cy in -10.0..10.0f64) {
            let layout = PoolingLayout::default();
            let gmms = vec![square_gmm(cx, cy, 3.0), ConceptGmm::default(), square_gmm(-cy, cx, 6.0)];
            let shifted = vec![square_gmm(cx + dx, cy + dy, 3.0), ConceptGmm::default(), square_gmm(-cy + dx, cx + dy, 6.0)];
            let a = extract_descriptor(&gmms, &layout, Point::origin(), NORTH).unwrap();
            let b = extract_descriptor(&shifted, &layout, Point::new(dx, dy), NORTH).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn raw_entries_in_unit_interval(cx in -40.0..40.0f64, cy in -40.0..40.0f64, side in 0.1..30.0f64) {
            let layout = PoolingLayout::default();
            let pools: Vec<_> = (0..8).map(|s| pooling_gaussian(&layout, 0, s, Point::origin(), NORTH)).collect();
            let block = pooled_block(&square_gmm(cx, cy, side), &pools).unwrap().unwrap();
            prop_assert!(block.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

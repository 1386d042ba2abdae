//! Rotation-searched, field-of-view-masked descriptor distances.
//!
//! A query descriptor's heading relative to north is unknown, so every
//! comparison minimises over the `n_sectors` discrete rotations of the
//! reference. Shift `k` pairs query sector `s` with reference sector
//! `(s + k) mod n`; query sectors outside the camera's field of view are
//! ignored.

mod eval;
mod fft;
mod ranking;

pub use eval::{rank_cdf, RankCurve};
pub use fft::{min_rotation_distance_fft, RotationCorrelator};
pub use ranking::{heat_value, rank_tiles, HeatGrid, Ranking, Scoring, TileScorer, HEAT_EPS};
pub(crate) use ranking::sort_results;

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::ssl_descriptor::{PoolingLayout, PresenceVector, SslDescriptor};

/// Per-sector 0/1 weights applied in the query frame, ring-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FovMask {
    pub n_rings: usize,
    pub n_sectors: usize,
    pub weights: Vec<f64>,
}

impl FovMask {
    pub fn full(n_rings: usize, n_sectors: usize) -> Self {
        Self {
            n_rings,
            n_sectors,
            weights: vec![1.0; n_rings * n_sectors],
        }
    }

    pub fn new(n_rings: usize, n_sectors: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n_rings * n_sectors {
            return Err(Error::Contract("mask length does not match the layout".into()));
        }
        if weights.iter().any(|w| *w != 0.0 && *w != 1.0) {
            return Err(Error::Contract("mask weights must be 0 or 1".into()));
        }
        if weights.iter().all(|w| *w == 0.0) {
            return Err(Error::Contract("mask must enable at least one sector".into()));
        }
        Ok(Self {
            n_rings,
            n_sectors,
            weights,
        })
    }

    /// Sectors whose centre lies within `half_angle` of the heading, with
    /// half a sector of slack. Sector 0 points along the heading.
    pub fn from_fov(layout: &PoolingLayout, half_angle: f64) -> Self {
        let n = layout.n_sectors;
        let slack = PI / n as f64;
        let ring: Vec<f64> = (0..n)
            .map(|s| {
                let mut a = TAU * s as f64 / n as f64;
                if a > PI {
                    a -= TAU;
                }
                if a.abs() <= half_angle + slack + 1e-12 { 1.0 } else { 0.0 }
            })
            .collect();
        Self {
            n_rings: layout.n_rings(),
            n_sectors: n,
            weights: ring.repeat(layout.n_rings()),
        }
    }

    pub fn enabled(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    fn check(&self, q: &SslDescriptor, r: &SslDescriptor) -> Result<()> {
        if !q.same_shape(r) {
            return Err(Error::Contract("query and reference descriptors have different layouts".into()));
        }
        if self.n_rings != q.n_rings || self.n_sectors != q.n_sectors {
            return Err(Error::Contract("mask does not match the descriptor layout".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub tile_id: usize,
    pub distance: f64,
    pub best_shift: usize,
    /// 1-based position in ascending-distance order.
    pub rank: usize,
}

/// How the presence term is mixed into the descriptor distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedScoreParams {
    pub lambda: f64,
    /// Count only concepts the query sees but the tile lacks.
    pub asymmetric: bool,
}

impl Default for CombinedScoreParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            asymmetric: true,
        }
    }
}

/// Circularly shifts every ring block by `k` sectors: entry `s` moves to
/// `(s + k) mod n`, which is what rotating the scene counter-clockwise by
/// `k` sectors does to the descriptor.
pub fn rotate_descriptor(desc: &SslDescriptor, k: usize) -> SslDescriptor {
    let n = desc.n_sectors;
    let k = k % n;
    let mut out = desc.clone();
    for (src, dst) in desc.values.chunks(n).zip(out.values.chunks_mut(n)) {
        for s in 0..n {
            dst[(s + k) % n] = src[s];
        }
    }
    out
}

fn masked_sq(query: &SslDescriptor, reference: &SslDescriptor, mask: &FovMask, k: usize) -> f64 {
    let n = query.n_sectors;
    let mut acc = 0.0;
    for (i, (q, r)) in query.values.chunks(n).zip(reference.values.chunks(n)).enumerate() {
        let ring = i % query.n_rings;
        let m = &mask.weights[ring * n..(ring + 1) * n];
        for s in 0..n {
            let d = q[s] - r[(s + k) % n];
            acc += m[s] * d * d;
        }
    }
    acc
}

/// Masked L2 distance with the reference rotated by `k` sectors.
pub fn asymmetric_l2(query: &SslDescriptor, reference: &SslDescriptor, mask: &FovMask, k: usize) -> Result<f64> {
    mask.check(query, reference)?;
    Ok(masked_sq(query, reference, mask, k % query.n_sectors).sqrt())
}

/// Exhaustive rotation search; ties go to the smallest shift.
pub fn min_rotation_distance(query: &SslDescriptor, reference: &SslDescriptor, mask: &FovMask) -> Result<(f64, usize)> {
    mask.check(query, reference)?;
    let mut best = (f64::INFINITY, 0);
    for k in 0..query.n_sectors {
        let d = masked_sq(query, reference, mask, k);
        if d < best.0 {
            best = (d, k);
        }
    }
    Ok((best.0.sqrt(), best.1))
}

/// Normalised Hamming distance between presence vectors.
pub fn presence_distance(query: &PresenceVector, reference: &PresenceVector, asymmetric: bool) -> Result<f64> {
    if query.len() != reference.len() {
        return Err(Error::Contract("presence vectors have different lengths".into()));
    }
    if query.is_empty() {
        return Ok(0.0);
    }
    let diff = query
        .0
        .iter()
        .zip(&reference.0)
        .filter(|(q, r)| if asymmetric { **q && !**r } else { q != r })
        .count();
    Ok(diff as f64 / query.len() as f64)
}

/// `ssl_d + lambda * presence_distance`.
pub fn combined_distance(ssl_d: f64, query: &PresenceVector, reference: &PresenceVector, params: &CombinedScoreParams) -> Result<f64> {
    if !(params.lambda >= 0.0) {
        return Err(Error::Parameter(format!("lambda must be nonnegative, got {}", params.lambda)));
    }
    if params.lambda == 0.0 {
        return Ok(ssl_d);
    }
    Ok(ssl_d + params.lambda * presence_distance(query, reference, params.asymmetric)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_desc(rng: &mut ChaCha8Rng, blocks: usize, rings: usize, n: usize) -> SslDescriptor {
        let values = (0..blocks * rings * n).map(|_| rng.random::<f64>()).collect();
        let presence = PresenceVector((0..blocks).map(|_| rng.random_bool(0.7)).collect());
        SslDescriptor::from_values((0..blocks).collect(), rings, n, values, presence).unwrap()
    }

    fn basis(n: usize, i: usize) -> SslDescriptor {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        SslDescriptor::from_values(vec![0], 1, n, v, PresenceVector(vec![true])).unwrap()
    }

    #[test]
    fn rotation_identity_and_period() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = random_desc(&mut rng, 3, 2, 8);
        assert_eq!(rotate_descriptor(&d, 0), d);
        assert_eq!(rotate_descriptor(&d, 8), d);
    }

    #[test]
    fn rotation_group_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random_desc(&mut rng, 3, 2, 8);
        for a in 0..8 {
            for b in 0..8 {
                assert_eq!(rotate_descriptor(&rotate_descriptor(&d, a), b), rotate_descriptor(&d, (a + b) % 8));
            }
        }
        assert_eq!(rotate_descriptor(&d, 3).presence, d.presence);
    }

    #[test]
    fn basis_vector_shift() {
        let (q, r) = (basis(8, 0), basis(8, 3));
        let full = FovMask::full(1, 8);
        assert_abs_diff_eq!(asymmetric_l2(&q, &r, &full, 3).unwrap(), 0.0);
        assert_abs_diff_eq!(asymmetric_l2(&q, &r, &full, 0).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(asymmetric_l2(&q, &q, &full, 0).unwrap(), 0.0);
    }

    #[test]
    fn zero_mask_is_vacuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (q, r) = (random_desc(&mut rng, 2, 1, 8), random_desc(&mut rng, 2, 1, 8));
        let zero = FovMask {
            n_rings: 1,
            n_sectors: 8,
            weights: vec![0.0; 8],
        };
        assert_eq!(asymmetric_l2(&q, &r, &zero, 5).unwrap(), 0.0);
        assert!(FovMask::new(1, 8, vec![0.0; 8]).is_err());
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let full = FovMask::full(1, 8);
        assert!(matches!(asymmetric_l2(&basis(8, 0), &basis(6, 0), &full, 0), Err(Error::Contract(_))));
        assert!(min_rotation_distance(&basis(6, 0), &basis(6, 1), &full).is_err());
    }

    #[test]
    fn finds_constructed_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_desc(&mut rng, 4, 1, 8);
        let r = rotate_descriptor(&q, 3);
        let (d, k) = min_rotation_distance(&q, &r, &FovMask::full(1, 8)).unwrap();
        assert_eq!((d, k), (0.0, 3));
    }

    #[test]
    fn masked_sector_on_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_desc(&mut rng, 4, 1, 8);
        let mut w = vec![1.0; 8];
        w[5] = 0.0;
        let mask = FovMask::new(1, 8, w).unwrap();
        assert_eq!(min_rotation_distance(&q, &q, &mask).unwrap(), (0.0, 0));
    }

    #[test]
    fn matches_exhaustive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let q = random_desc(&mut rng, 3, 2, 8);
            let r = random_desc(&mut rng, 3, 2, 8);
            let mask = FovMask::full(2, 8);
            let mut best = (f64::INFINITY, 0);
            for k in 0..8 {
                let mut acc = 0.0;
                for i in 0..q.values.len() {
                    let (blk, s) = (i / 8, i % 8);
                    let d = q.values[i] - r.values[blk * 8 + (s + k) % 8];
                    acc += d * d;
                }
                if acc.sqrt() < best.0 {
                    best = (acc.sqrt(), k);
                }
            }
            let (d, k) = min_rotation_distance(&q, &r, &mask).unwrap();
            assert_eq!(k, best.1);
            assert_abs_diff_eq!(d, best.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn shift_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mask = FovMask::full(1, 8);
        for _ in 0..100 {
            let q = random_desc(&mut rng, 3, 1, 8);
            let r = random_desc(&mut rng, 3, 1, 8);
            let (d0, k0) = min_rotation_distance(&q, &r, &mask).unwrap();
            for j in 0..8 {
                let (d, k) = min_rotation_distance(&q, &rotate_descriptor(&r, j), &mask).unwrap();
                assert_abs_diff_eq!(d, d0, epsilon = 1e-12);
                assert_eq!(k, (k0 + j) % 8);
            }
        }
    }

    #[test]
    fn masked_reference_sectors_do_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let layout = PoolingLayout::default();
        let mask = FovMask::from_fov(&layout, 0.6);
        for _ in 0..50 {
            let q = random_desc(&mut rng, 2, 1, 8);
            let r = random_desc(&mut rng, 2, 1, 8);
            let k = rng.random_range(0..8);
            let mut r2 = r.clone();
            for b in 0..2 {
                for s in 0..8 {
                    if mask.weights[s] == 0.0 {
                        r2.values[b * 8 + (s + k) % 8] = rng.random();
                    }
                }
            }
            assert_eq!(asymmetric_l2(&q, &r, &mask, k).unwrap(), asymmetric_l2(&q, &r2, &mask, k).unwrap());
        }
    }

    #[test]
    fn fov_mask_sectors() {
        let layout = PoolingLayout::default();
        // half angle 38.7 deg + 22.5 deg slack keeps sectors 0, 1 and 7
        let m = FovMask::from_fov(&layout, 0.8f64.atan());
        assert_eq!(m.weights, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let narrow = FovMask::from_fov(&layout, 1e-9);
        assert_eq!(narrow.enabled(), 1);
        let wide = FovMask::from_fov(&layout, PI);
        assert_eq!(wide.enabled(), 8);
    }

    #[test]
    fn presence_combination() {
        let q = PresenceVector(vec![true, false, false, false, false, false, false]);
        let r = PresenceVector(vec![true, false, false, true, false, false, false]);
        let p = CombinedScoreParams::default();
        assert_eq!(combined_distance(0.3, &q, &q, &p).unwrap(), 0.3);
        assert_eq!(combined_distance(0.3, &q, &r, &p).unwrap(), 0.3);
        let sym = CombinedScoreParams { asymmetric: false, ..p };
        assert_abs_diff_eq!(combined_distance(0.3, &q, &r, &sym).unwrap(), 0.3 + 1.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(combined_distance(0.3, &r, &q, &p).unwrap(), 0.3 + 1.0 / 7.0, epsilon = 1e-15);
        let off = CombinedScoreParams { lambda: 0.0, ..p };
        assert_eq!(combined_distance(0.3, &r, &q, &off).unwrap(), 0.3);
        let neg = CombinedScoreParams { lambda: -1.0, ..p };
        assert!(combined_distance(0.3, &r, &q, &neg).is_err());
    }
}

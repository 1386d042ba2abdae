//! Seeded random inputs shared by tests and benchmarks.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{self, Point};
use crate::ssl_descriptor::{PresenceVector, SslDescriptor};

/// A simple star-shaped polygon around `center` with `n` vertices and
/// radii in `[0.3, 1] * radius`.
pub fn star_polygon(rng: &mut ChaCha8Rng, center: Point, radius: f64, n: usize) -> Vec<Point> {
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let poly: Vec<Point> = angles
        .iter()
        .map(|a| {
            let r = radius * rng.random_range(0.3..1.0);
            Point::new(center.x + r * a.cos(), center.y + r * a.sin())
        })
        .collect();
    if geometry::is_simple(&poly) && geometry::area(&poly) > 1e-6 * radius * radius {
        poly
    } else {
        star_polygon(rng, center, radius, n)
    }
}

/// A random simple polygon of 3 to 12 vertices somewhere in a 200 m square,
/// with radius between 0.5 and 20 m.
pub fn random_polygon(rng: &mut ChaCha8Rng) -> Vec<Point> {
    let center = Point::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
    let radius = rng.random_range(0.5..20.0);
    let n = rng.random_range(3..=12);
    star_polygon(rng, center, radius, n)
}

/// A descriptor with `blocks` concept blocks of nonnegative unit-norm rows,
/// all concepts present.
pub fn random_descriptor(rng: &mut ChaCha8Rng, blocks: usize, rings: usize, sectors: usize) -> SslDescriptor {
    let block_len = rings * sectors;
    let mut values = Vec::with_capacity(blocks * block_len);
    for _ in 0..blocks {
        let block: Vec<f64> = (0..block_len).map(|_| rng.random_range(0.0..1.0)).collect();
        let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        values.extend(block.iter().map(|v| v / norm));
    }
    SslDescriptor::from_values((0..blocks).collect(), rings, sectors, values, PresenceVector(vec![true; blocks])).unwrap()
}

/// `clusters * per_cluster` descriptors drawn around `clusters` random
/// centres with per-entry noise of at most `spread`. Descriptor `i` belongs
/// to cluster `i / per_cluster`.
pub fn planted_clusters(
    rng: &mut ChaCha8Rng,
    clusters: usize,
    per_cluster: usize,
    blocks: usize,
    sectors: usize,
    spread: f64,
) -> Vec<SslDescriptor> {
    let centres: Vec<SslDescriptor> = (0..clusters).map(|_| random_descriptor(rng, blocks, 1, sectors)).collect();
    let mut out = Vec::with_capacity(clusters * per_cluster);
    for c in &centres {
        for _ in 0..per_cluster {
            out.push(jitter_descriptor(rng, c, spread));
        }
    }
    out
}

/// Adds uniform noise in `[-spread, spread]` to every entry.
pub fn jitter_descriptor(rng: &mut ChaCha8Rng, d: &SslDescriptor, spread: f64) -> SslDescriptor {
    let mut out = d.clone();
    for v in &mut out.values {
        *v += rng.random_range(-spread..=spread);
    }
    out
}

/// `branches^levels` descriptors with nested cluster structure: item `i`
/// sums one random offset per level, chosen by the base-`branches` digits
/// of `i`, with the offset scale shrinking by `decay` per level. Items that
/// share a longer digit prefix are closer together.
pub fn planted_hierarchy(
    rng: &mut ChaCha8Rng,
    branches: usize,
    levels: usize,
    blocks: usize,
    sectors: usize,
    decay: f64,
) -> Vec<SslDescriptor> {
    let n = branches.pow(levels as u32);
    let mut offsets: Vec<Vec<SslDescriptor>> = Vec::with_capacity(levels);
    for level in 0..levels {
        let groups = branches.pow(level as u32 + 1);
        offsets.push((0..groups).map(|_| random_descriptor(rng, blocks, 1, sectors)).collect());
    }
    (0..n)
        .map(|i| {
            let mut values = vec![0.0; blocks * sectors];
            let mut scale = 1.0;
            for (level, group) in offsets.iter().enumerate() {
                let prefix = i / branches.pow((levels - level - 1) as u32);
                for (v, o) in values.iter_mut().zip(&group[prefix].values) {
                    *v += scale * o;
                }
                scale *= decay;
            }
            SslDescriptor::from_values((0..blocks).collect(), 1, sectors, values, PresenceVector(vec![true; blocks])).unwrap()
        })
        .collect()
}

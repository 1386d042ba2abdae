//! Spectral partitioning of a precomputed distance matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const KMEANS_RESTARTS: usize = 50;
const KMEANS_MAX_ITERS: usize = 100;

/// Gaussian affinity of the symmetrised distances, with the bandwidth set
/// to the median off-diagonal distance.
pub fn affinity(distances: &DMatrix<f64>) -> DMatrix<f64> {
    let n = distances.nrows();
    let sym = (distances + distances.transpose()) * 0.5;
    let mut off: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| sym[(i, j)]).collect();
    off.sort_by(f64::total_cmp);
    let sigma = if off.is_empty() {
        1.0
    } else {
        let m = off.len() / 2;
        let med = if off.len() % 2 == 1 { off[m] } else { 0.5 * (off[m - 1] + off[m]) };
        if med > 0.0 && med.is_finite() { med } else { 1.0 }
    };
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (-sym[(i, j)].powi(2) / (2.0 * sigma * sigma)).exp()
        }
    })
}

/// Rows of the `k` lowest eigenvectors of the symmetric normalised
/// Laplacian after the trivial one, each scaled to unit length.
pub fn spectral_embedding(affinity: &DMatrix<f64>, k: usize) -> Vec<Vec<f64>> {
    let n = affinity.nrows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / affinity.row(i).sum().max(1e-300).sqrt())
        .collect();
    let laplacian = DMatrix::from_fn(n, n, |i, j| {
        let m = affinity[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
        if i == j { 1.0 - m } else { -m }
    });
    let eig = SymmetricEigen::new(laplacian);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]).then(a.cmp(b)));
    (0..n)
        .map(|i| {
            let row: Vec<f64> = order[1..(k + 1).min(n)].iter().map(|c| eig.eigenvectors[(i, *c)]).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 { row.iter().map(|v| v / norm).collect() } else { row }
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(c, center)| (c, sq_dist(point, center)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn kmeans_once(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = points.len();
    // k-means++ seeding
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1).collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            d2.iter()
                .position(|d| {
                    t -= d;
                    t <= 0.0
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[pick].clone());
    }
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, _) = nearest(p, &centers);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, l) in points.iter().zip(&labels) {
            counts[*l] += 1;
            sums[*l].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, l)| sq_dist(p, &centers[*l])).sum();
    (labels, inertia)
}

/// Lloyd iterations from `KMEANS_RESTARTS` seeded k-means++ starts; the
/// lowest-inertia labelling wins.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = kmeans_once(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.1 < b.1 - 1e-12) {
            best = Some(run);
        }
    }
    best.map(|b| b.0).unwrap_or_default()
}

/// Makes every label in `0..k` nonempty. Each empty cluster receives the
/// member of the currently largest cluster farthest from that cluster's
/// mean; when the largest cluster's points all coincide it is split into
/// equal runs instead.
fn fill_empty_clusters(points: &[Vec<f64>], labels: &mut [usize], k: usize) {
    loop {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, l) in labels.iter().enumerate() {
            members[*l].push(i);
        }
        let empty: Vec<usize> = (0..k).filter(|c| members[*c].is_empty()).collect();
        if empty.is_empty() {
            return;
        }
        let largest = (0..k).max_by_key(|c| (members[*c].len(), std::cmp::Reverse(*c))).unwrap();
        let group = &members[largest];
        let dim = points[0].len();
        let mean: Vec<f64> = (0..dim)
            .map(|d| group.iter().map(|i| points[*i][d]).sum::<f64>() / group.len() as f64)
            .collect();
        let spread: Vec<f64> = group.iter().map(|i| sq_dist(&points[*i], &mean)).collect();
        if spread.iter().all(|s| *s <= 1e-18) {
            let parts = (empty.len() + 1).min(group.len());
            let chunk = group.len().div_ceil(parts);
            for (p, ids) in group.chunks(chunk).enumerate().skip(1) {
                for i in ids {
                    labels[*i] = empty[p - 1];
                }
            }
        } else {
            let far = group
                .iter()
                .zip(&spread)
                .fold((group[0], f64::NEG_INFINITY), |b, (i, s)| if *s > b.1 { (*i, *s) } else { b });
            labels[far.0] = empty[0];
        }
    }
}

/// Partitions `n` items into `branches` nonempty groups from their pairwise
/// distances.
pub fn spectral_split(distances: &DMatrix<f64>, branches: usize, seed: u64) -> Result<Vec<usize>> {
    let n = distances.nrows();
    if branches < 2 || n < branches {
        return Err(Error::DegenerateSplit { n, branches });
    }
    if n == branches {
        return Ok((0..n).collect());
    }
    let embedding = spectral_embedding(&affinity(distances), branches);
    let mut labels = kmeans(&embedding, branches, seed);
    fill_empty_clusters(&embedding, &mut labels, branches);
    Ok(canonical_labels(&labels))
}

/// Relabels so that cluster ids appear in order of first occurrence.
fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = vec![None; labels.iter().max().map_or(0, |m| m + 1)];
    let mut next = 0;
    labels
        .iter()
        .map(|l| {
            *map[*l].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

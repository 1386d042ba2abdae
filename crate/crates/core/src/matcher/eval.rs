use super::MatchResult;
use crate::error::{Error, Result};

/// Recall against normalised shortlist size.
///
/// `points[k] = (k / N, share of queries whose ground truth ranks <= k)`
/// for `k = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankCurve {
    pub n_tiles: usize,
    /// 1-based ground-truth rank of each query.
    pub ranks: Vec<usize>,
    pub points: Vec<(f64, f64)>,
}

impl RankCurve {
    pub fn from_ranks(ranks: Vec<usize>, n_tiles: usize) -> Result<Self> {
        if n_tiles == 0 {
            return Err(Error::EmptyIndex);
        }
        if let Some(r) = ranks.iter().find(|r| **r == 0 || **r > n_tiles) {
            return Err(Error::Contract(format!("rank {r} outside 1..={n_tiles}")));
        }
        let mut counts = vec![0usize; n_tiles + 1];
        for r in &ranks {
            counts[*r] += 1;
        }
        let total = ranks.len().max(1) as f64;
        let mut cum = 0;
        let points = counts
            .iter()
            .enumerate()
            .map(|(k, c)| {
                cum += c;
                (k as f64 / n_tiles as f64, cum as f64 / total)
            })
            .collect();
        Ok(Self {
            n_tiles,
            ranks,
            points,
        })
    }

    /// Share of queries whose ground truth is within the best
    /// `ceil(fraction * N)` tiles (at least one).
    pub fn recall_at(&self, fraction: f64) -> f64 {
        let k = ((fraction * self.n_tiles as f64 - 1e-9).ceil() as usize).clamp(1, self.n_tiles);
        self.points[k].1
    }

    /// Median of `rank / N`.
    pub fn median_normalized_rank(&self) -> f64 {
        if self.ranks.is_empty() {
            return f64::NAN;
        }
        let mut r: Vec<f64> = self.ranks.iter().map(|r| *r as f64 / self.n_tiles as f64).collect();
        r.sort_by(f64::total_cmp);
        let m = r.len() / 2;
        if r.len() % 2 == 1 {
            r[m]
        } else {
            0.5 * (r[m - 1] + r[m])
        }
    }

    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
            .sum()
    }
}

/// Builds the rank curve from per-query rankings and their ground-truth
/// tile ids.
pub fn rank_cdf(rankings: &[Vec<MatchResult>], ground_truth: &[usize]) -> Result<RankCurve> {
    if rankings.len() != ground_truth.len() {
        return Err(Error::Contract("one ground-truth tile is needed per query".into()));
    }
    let n_tiles = rankings.first().map_or(0, Vec::len);
    let ranks = rankings
        .iter()
        .zip(ground_truth)
        .map(|(results, gt)| {
            if results.len() != n_tiles {
                return Err(Error::Contract("all rankings must cover the same tiles".into()));
            }
            results
                .iter()
                .position(|r| r.tile_id == *gt)
                .map(|p| p + 1)
                .ok_or(Error::MissingGroundTruth(*gt))
        })
        .collect::<Result<Vec<_>>>()?;
    RankCurve::from_ranks(ranks, n_tiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ranking(order: &[usize]) -> Vec<MatchResult> {
        order
            .iter()
            .enumerate()
            .map(|(i, id)| MatchResult {
                tile_id: *id,
                distance: i as f64,
                best_shift: 0,
                rank: i + 1,
            })
            .collect()
    }

    #[test]
    fn perfect_retrieval() {
        let rankings = vec![ranking(&[2, 0, 1, 3]), ranking(&[1, 0, 2, 3])];
        let curve = rank_cdf(&rankings, &[2, 1]).unwrap();
        assert_eq!(curve.points[0], (0.0, 0.0));
        assert_eq!(curve.points[1], (0.25, 1.0));
        assert_eq!(*curve.points.last().unwrap(), (1.0, 1.0));
        assert_eq!(curve.recall_at(0.25), 1.0);
    }

    #[test]
    fn single_query_step() {
        let curve = rank_cdf(&[ranking(&[4, 3, 2, 1, 0])], &[1]).unwrap();
        let ys: Vec<f64> = curve.points.iter().map(|p| p.1).collect();
        assert_eq!(ys, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        assert_abs_diff_eq!(curve.median_normalized_rank(), 0.8);
    }

    #[test]
    fn missing_ground_truth() {
        assert!(matches!(rank_cdf(&[ranking(&[0, 1])], &[5]), Err(Error::MissingGroundTruth(5))));
    }

    #[test]
    fn uniform_ranks_follow_diagonal() {
        // Monte-Carlo: uniform ranks give recall(x) ~ x within binomial noise
        let n = 200;
        let q = 4000;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ranks: Vec<usize> = (0..q).map(|_| rng.random_range(1..=n)).collect();
        let curve = RankCurve::from_ranks(ranks, n).unwrap();
        for (x, y) in &curve.points {
            let sd = (x * (1.0 - x) / q as f64).sqrt();
            assert!((y - x).abs() <= 4.0 * sd + 1.0 / n as f64, "x={x} y={y}");
        }
        assert_abs_diff_eq!(curve.auc(), 0.5, epsilon = 0.02);
        assert_abs_diff_eq!(curve.median_normalized_rank(), 0.5, epsilon = 0.03);
    }

    #[test]
    fn curve_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let ranks: Vec<usize> = (0..57).map(|_| rng.random_range(1..=31)).collect();
        let curve = RankCurve::from_ranks(ranks, 31).unwrap();
        assert!(curve.points.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].0 < w[1].0));
        assert_eq!(curve.points.len(), 32);
    }
}

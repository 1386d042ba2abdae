use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{combined_distance, min_rotation_distance, presence_distance, CombinedScoreParams, FovMask, MatchResult, RotationCorrelator};
use crate::error::{Error, Result};
use crate::index::TileRecord;
use crate::ssl_descriptor::SslDescriptor;

/// Guards the log of an exact self-match.
pub const HEAT_EPS: f64 = 1e-12;

/// What a tile is scored by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scoring {
    /// Rotation-searched masked descriptor distance only.
    Ssl,
    /// Normalised Hamming distance between presence vectors only.
    Presence,
    /// Descriptor distance plus the weighted presence term.
    #[default]
    SslPresence,
    /// Seeded uniform scores; a chance baseline.
    Random { seed: u64 },
}

impl std::str::FromStr for Scoring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "ssl" => Ok(Self::Ssl),
            "presence" => Ok(Self::Presence),
            "ssl+presence" | "ssl-presence" => Ok(Self::SslPresence),
            "random" => Ok(Self::Random { seed: 0 }),
            _ => lower
                .strip_prefix("random@")
                .and_then(|seed| seed.parse().ok())
                .map(|seed| Self::Random { seed })
                .ok_or_else(|| Error::Parameter(format!("unknown scoring `{s}`"))),
        }
    }
}

impl std::fmt::Display for Scoring {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Ssl => f.write_str("ssl"),
            Self::Presence => f.write_str("presence"),
            Self::SslPresence => f.write_str("ssl+presence"),
            Self::Random { seed } => write!(f, "random@{seed}"),
        }
    }
}

/// Scores reference descriptors against one query.
#[derive(Debug, Clone)]
pub struct TileScorer<'a> {
    pub query: &'a SslDescriptor,
    pub mask: &'a FovMask,
    pub scoring: Scoring,
    pub params: CombinedScoreParams,
    /// Use the FFT rotation search instead of the direct loop.
    pub correlator: Option<RotationCorrelator>,
}

impl<'a> TileScorer<'a> {
    pub fn new(query: &'a SslDescriptor, mask: &'a FovMask, scoring: Scoring, params: CombinedScoreParams) -> Self {
        Self {
            query,
            mask,
            scoring,
            params,
            correlator: None,
        }
    }

    pub fn with_fft(mut self) -> Self {
        self.correlator = Some(RotationCorrelator::new(self.query.n_sectors));
        self
    }

    fn ssl(&self, reference: &SslDescriptor) -> Result<(f64, usize)> {
        match &self.correlator {
            Some(c) => c.min_rotation_distance(self.query, reference, self.mask),
            None => min_rotation_distance(self.query, reference, self.mask),
        }
    }

    /// Distance and best rotation of one tile.
    pub fn score(&self, tile_id: usize, reference: &SslDescriptor) -> Result<(f64, usize)> {
        match self.scoring {
            Scoring::Ssl => self.ssl(reference),
            Scoring::Presence => Ok((presence_distance(&self.query.presence, &reference.presence, false)?, 0)),
            Scoring::SslPresence => {
                let (d, k) = self.ssl(reference)?;
                Ok((combined_distance(d, &self.query.presence, &reference.presence, &self.params)?, k))
            }
            Scoring::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (tile_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                Ok((rng.random::<f64>(), 0))
            }
        }
    }
}

/// Sorts ascending by distance, then tile id, and assigns 1-based ranks.
pub(crate) fn sort_results(results: &mut [MatchResult]) {
    results.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.tile_id.cmp(&b.tile_id)));
    for (i, r) in results.iter_mut().enumerate() {
        r.rank = i + 1;
    }
}

/// Per-tile heat values on the tile grid, `-ln(distance + eps)`; unscored
/// cells hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatGrid {
    pub cols: usize,
    pub rows: usize,
    /// Row-major, row 0 southernmost.
    pub values: Vec<f64>,
}

impl HeatGrid {
    pub fn from_results(results: &[MatchResult], tiles: &[TileRecord]) -> Self {
        let cols = tiles.iter().map(|t| t.grid.0 + 1).max().unwrap_or(0);
        let rows = tiles.iter().map(|t| t.grid.1 + 1).max().unwrap_or(0);
        let mut values = vec![f64::NAN; cols * rows];
        for r in results {
            if let Some(t) = tiles.iter().find(|t| t.id == r.tile_id) {
                values[t.grid.1 * cols + t.grid.0] = heat_value(r.distance);
            }
        }
        Self { cols, rows, values }
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// ASCII PGM (P2), north up, heat rescaled to 0..=255; unscored cells
    /// are 0.
    pub fn to_pgm(&self) -> String {
        let finite = self.values.iter().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let mut out = format!("P2\n{} {}\n255\n", self.cols, self.rows);
        for row in (0..self.rows).rev() {
            let line: Vec<String> = (0..self.cols)
                .map(|col| {
                    let v = self.get(col, row);
                    let g = if !v.is_finite() {
                        0
                    } else if hi > lo {
                        (((v - lo) / (hi - lo)) * 255.0).round() as u8
                    } else {
                        255
                    };
                    g.to_string()
                })
                .collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out
    }
}

pub fn heat_value(distance: f64) -> f64 {
    -(distance + HEAT_EPS).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub results: Vec<MatchResult>,
    pub heat: HeatGrid,
}

impl Ranking {
    /// 1-based rank of a tile, if it was scored.
    pub fn rank_of(&self, tile_id: usize) -> Option<usize> {
        self.results.iter().find(|r| r.tile_id == tile_id).map(|r| r.rank)
    }
}

/// Scores every tile (optionally skipping empty ones) and sorts ascending
/// with ties broken by tile id.
pub fn rank_tiles(scorer: &TileScorer<'_>, tiles: &[TileRecord], skip_empty: bool) -> Result<Ranking> {
    let candidates: Vec<&TileRecord> = tiles.iter().filter(|t| !(skip_empty && t.empty)).collect();
    if candidates.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let mut results = candidates
        .par_iter()
        .map(|t| {
            let (distance, best_shift) = scorer.score(t.id, &t.descriptor)?;
            Ok(MatchResult {
                tile_id: t.id,
                distance,
                best_shift,
                rank: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_results(&mut results);
    let heat = HeatGrid::from_results(&results, tiles);
    Ok(Ranking { results, heat })
}

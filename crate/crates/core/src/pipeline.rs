//! End-to-end wiring: map to index, query file to descriptor, ranking and
//! evaluation.

use rayon::prelude::*;

use crate::camera_geometry::{fov_half_angle, project_query_segments, ProjectionOptions, QueryFile, QueryFrame};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::index::{TileIndex, TileRecord};
use crate::map_model::{segment_gmms, tile_gmms, tile_grid_shape, tile_map, SemanticMap, Segment};
use crate::matcher::{rank_cdf, rank_tiles, CombinedScoreParams, FovMask, RankCurve, Ranking, Scoring, TileScorer};
use crate::semantic_tree::{build_tree, tree_search, TraversalBudget, TreeParams, TreeSearchResult};
use crate::ssl_descriptor::{extract_descriptor, OriginMode, PoolingLayout, SslDescriptor, NORTH};

#[derive(Debug, Clone, PartialEq)]
pub struct IndexConfig {
    pub side: f64,
    pub stride: f64,
    pub layout: PoolingLayout,
    /// Concept ids kept in the descriptors; `None` keeps all.
    pub active: Option<Vec<usize>>,
    pub tree: Option<TreeParams>,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            side: 30.0,
            stride: 15.0,
            layout: PoolingLayout::default(),
            active: None,
            tree: None,
        }
    }
}

/// Tiles the map and extracts one north-up descriptor per tile centre.
pub fn build_index(map: &SemanticMap, config: &IndexConfig) -> Result<TileIndex> {
    config.layout.validate()?;
    let n_concepts = map.concepts.len();
    let active = match &config.active {
        Some(a) => {
            if let Some(c) = a.iter().find(|c| **c >= n_concepts) {
                return Err(Error::Validation(format!("concept {c} is not declared by the map")));
            }
            if a.is_empty() {
                return Err(Error::Parameter("concept filter selects nothing".into()));
            }
            a.clone()
        }
        None => (0..n_concepts).collect(),
    };
    let grid = tile_grid_shape(&map.bounds, config.side, config.stride)?;
    let tiles = tile_map(map, config.side, config.stride)?;
    let records = tiles
        .par_iter()
        .map(|tile| {
            let gmms = tile_gmms(tile, n_concepts);
            let descriptor = extract_descriptor(&gmms, &config.layout, tile.center, NORTH)?.restrict(&active)?;
            Ok(TileRecord {
                id: tile.id,
                grid: tile.grid,
                center: tile.center,
                side: tile.side,
                empty: tile.empty,
                gmms,
                descriptor,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tree = match config.tree {
        Some(params) => {
            let ids: Vec<usize> = records.iter().map(|r| r.id).collect();
            let descs: Vec<&SslDescriptor> = records.iter().map(|r| &r.descriptor).collect();
            Some(build_tree(&ids, &descs, params)?)
        }
        None => None,
    };
    Ok(TileIndex {
        concepts: map.concepts.clone(),
        active,
        layout: config.layout.clone(),
        grid,
        tiles: records,
        tree,
    })
}

/// Which query sectors take part in matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskMode {
    /// Field-of-view mask for camera-centred queries, full otherwise.
    #[default]
    Auto,
    Full,
    Fov,
}

impl std::str::FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "full" => Ok(Self::Full),
            "fov" => Ok(Self::Fov),
            _ => Err(Error::Parameter(format!("mask must be auto, full or fov, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for MaskMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Full => "full",
            Self::Fov => "fov",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QueryOptions {
    pub origin: OriginMode,
    pub mask: MaskMode,
    pub projection: ProjectionOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedQuery {
    pub descriptor: SslDescriptor,
    pub mask: FovMask,
    /// Ground-frame segments the descriptor was built from.
    pub segments: Vec<Segment>,
    /// Pixel segments lost entirely above the horizon.
    pub dropped: usize,
}

/// Rectifies a query and extracts its descriptor in the index's layout.
/// Sector 0 points along the camera heading.
pub fn prepare_query(query: &QueryFile, index: &TileIndex, opts: &QueryOptions) -> Result<PreparedQuery> {
    let n_concepts = index.concepts.len();
    if let Some(seg) = query.segments.iter().find(|s| s.concept >= n_concepts) {
        return Err(Error::Validation(format!("query uses concept {} which the index does not declare", seg.concept)));
    }
    let (segments, dropped) = match query.frame {
        QueryFrame::Ground => (query.segments.clone(), 0),
        QueryFrame::Pixel => {
            let p = project_query_segments(&query.camera, &index.concepts, &query.segments, opts.projection);
            if p.dropped > 0 {
                log::warn!("{} query segment(s) lie entirely above the horizon and were dropped", p.dropped);
            }
            (p.segments, p.dropped)
        }
    };
    let origin = match opts.origin {
        OriginMode::CameraCenter => Point::origin(),
        OriginMode::ImageCenter => query
            .origin
            .unwrap_or_else(|| query.camera.rectified_center(opts.projection.max_range.unwrap_or(30.0))),
    };
    let gmms = segment_gmms(&segments, n_concepts);
    let descriptor = extract_descriptor(&gmms, &index.layout, origin, NORTH)?.restrict(&index.active)?;
    let use_fov = match opts.mask {
        MaskMode::Auto => opts.origin == OriginMode::CameraCenter,
        MaskMode::Full => false,
        MaskMode::Fov => true,
    };
    let mask = if use_fov {
        FovMask::from_fov(&index.layout, fov_half_angle(&query.camera))
    } else {
        FovMask::full(index.layout.n_rings(), index.layout.n_sectors)
    };
    Ok(PreparedQuery {
        descriptor,
        mask,
        segments,
        dropped,
    })
}

/// How a prepared query is scored against the index.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SearchOptions {
    pub scoring: Scoring,
    pub params: CombinedScoreParams,
    pub skip_empty: bool,
    pub fft: bool,
}

impl SearchOptions {
    pub fn scorer<'a>(&self, query: &'a PreparedQuery) -> TileScorer<'a> {
        let scorer = TileScorer::new(&query.descriptor, &query.mask, self.scoring, self.params);
        if self.fft { scorer.with_fft() } else { scorer }
    }
}

pub fn rank_query(index: &TileIndex, query: &PreparedQuery, opts: &SearchOptions) -> Result<Ranking> {
    rank_tiles(&opts.scorer(query), &index.tiles, opts.skip_empty)
}

pub fn tree_query(index: &TileIndex, query: &PreparedQuery, opts: &SearchOptions, budget: TraversalBudget) -> Result<TreeSearchResult> {
    let tree = index
        .tree
        .as_ref()
        .ok_or_else(|| Error::Parameter("index was built without a semantic tree".into()))?;
    let lookup = |id: usize| index.descriptor(id);
    tree_search(tree, &lookup, &opts.scorer(query), budget)
}

/// One labelled evaluation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub label: String,
    pub query: QueryOptions,
    pub search: SearchOptions,
    /// Restrict matching to these concept ids (must be active in the index).
    pub concepts: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub label: String,
    pub curve: RankCurve,
}

/// Ranks every query under `run` and summarises the ground-truth ranks.
pub fn evaluate_run(index: &TileIndex, queries: &[QueryFile], ground_truth: &[usize], run: &EvalRun) -> Result<EvalOutcome> {
    if queries.len() != ground_truth.len() {
        return Err(Error::Validation(format!(
            "{} queries but {} ground-truth entries",
            queries.len(),
            ground_truth.len()
        )));
    }
    let restricted;
    let index = match &run.concepts {
        Some(concepts) => {
            restricted = restrict_index(index, concepts)?;
            &restricted
        }
        None => index,
    };
    let rankings = queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let prepared = prepare_query(q, index, &run.query)?;
            let mut search = run.search;
            // A fresh random order per query, still fixed by the run seed.
            if let Scoring::Random { seed } = search.scoring {
                search.scoring = Scoring::Random {
                    seed: seed.wrapping_add((i as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)),
                };
            }
            rank_query(index, &prepared, &search).map(|r| r.results)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalOutcome {
        label: run.label.clone(),
        curve: rank_cdf(&rankings, ground_truth)?,
    })
}

/// A view of the index whose descriptors carry only `concepts`.
pub fn restrict_index(index: &TileIndex, concepts: &[usize]) -> Result<TileIndex> {
    if concepts.is_empty() {
        return Err(Error::Parameter("concept filter selects nothing".into()));
    }
    let tiles = index
        .tiles
        .iter()
        .map(|t| {
            Ok(TileRecord {
                descriptor: t.descriptor.restrict(concepts)?,
                ..t.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TileIndex {
        active: concepts.to_vec(),
        tiles,
        tree: None,
        ..index.clone()
    })
}

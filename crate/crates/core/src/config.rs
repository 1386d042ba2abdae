//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors so a
//! typo cannot silently fall back to a default.

use std::fmt::Write;

use crate::camera_geometry::ProjectionOptions;
use crate::error::{Error, Result};
use crate::map_model::{resolve_concepts, ConceptLabel};
use crate::matcher::{CombinedScoreParams, Scoring};
use crate::pipeline::{IndexConfig, MaskMode, QueryOptions, SearchOptions};
use crate::semantic_tree::{TraversalBudget, TreeParams};
use crate::ssl_descriptor::{OriginMode, PoolingLayout};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tile_side: f64,
    pub tile_stride: f64,
    pub sectors: usize,
    pub ring_radii: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub origin: OriginMode,
    pub mask: MaskMode,
    /// Concept names kept in descriptors; empty keeps all.
    pub concepts: Vec<String>,
    pub scoring: Scoring,
    pub lambda: f64,
    pub asymmetric_presence: bool,
    pub max_range: Option<f64>,
    pub skip_empty: bool,
    pub fft: bool,
    pub top_k: usize,
    pub build_tree: bool,
    pub branches: usize,
    pub leaf_capacity: usize,
    pub samples: usize,
    pub spill: usize,
    pub seed: u64,
    pub ranking_out: Option<String>,
    pub heat_out: Option<String>,
    pub curve_out: Option<String>,
    pub summary_out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let layout = PoolingLayout::default();
        let tree = TreeParams::default();
        let budget = TraversalBudget::default();
        Self {
            tile_side: 30.0,
            tile_stride: 15.0,
            sectors: layout.n_sectors,
            ring_radii: layout.ring_radii,
            sigmas: layout.sigmas,
            origin: OriginMode::CameraCenter,
            mask: MaskMode::Auto,
            concepts: Vec::new(),
            scoring: Scoring::SslPresence,
            lambda: 1.0,
            asymmetric_presence: true,
            max_range: ProjectionOptions::default().max_range,
            skip_empty: false,
            fft: false,
            top_k: 15,
            build_tree: false,
            branches: tree.branches,
            leaf_capacity: tree.leaf_capacity,
            samples: budget.samples,
            spill: budget.spill,
            seed: 0,
            ranking_out: None,
            heat_out: None,
            curve_out: None,
            summary_out: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parameter(format!("cannot parse `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Parameter(format!("`{key}` expects a boolean, got `{value}`"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "tile_side",
        "tile_stride",
        "sectors",
        "ring_radii",
        "sigmas",
        "origin",
        "mask",
        "concepts",
        "scoring",
        "lambda",
        "asymmetric_presence",
        "max_range",
        "skip_empty",
        "fft",
        "top_k",
        "build_tree",
        "branches",
        "leaf_capacity",
        "samples",
        "spill",
        "seed",
        "ranking_out",
        "heat_out",
        "curve_out",
        "summary_out",
    ];

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse {
                    line: i + 1,
                    msg: "expected `key = value`".into(),
                })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    /// Applies one override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let opt_path = |v: &str| (!v.is_empty()).then(|| v.to_string());
        match key {
            "tile_side" => self.tile_side = parse_value(key, value)?,
            "tile_stride" => self.tile_stride = parse_value(key, value)?,
            "sectors" => self.sectors = parse_value(key, value)?,
            "ring_radii" => self.ring_radii = parse_list(key, value)?,
            "sigmas" => self.sigmas = parse_list(key, value)?,
            "origin" => self.origin = value.parse()?,
            "mask" => self.mask = value.parse()?,
            "concepts" => {
                self.concepts = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty() && s != "all")
                    .collect()
            }
            "scoring" => self.scoring = value.parse()?,
            "lambda" => self.lambda = parse_value(key, value)?,
            "asymmetric_presence" => self.asymmetric_presence = parse_bool(key, value)?,
            "max_range" => {
                self.max_range = match value {
                    "none" | "" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            "skip_empty" => self.skip_empty = parse_bool(key, value)?,
            "fft" => self.fft = parse_bool(key, value)?,
            "top_k" => self.top_k = parse_value(key, value)?,
            "build_tree" => self.build_tree = parse_bool(key, value)?,
            "branches" => self.branches = parse_value(key, value)?,
            "leaf_capacity" => self.leaf_capacity = parse_value(key, value)?,
            "samples" => self.samples = parse_value(key, value)?,
            "spill" => self.spill = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "ranking_out" => self.ranking_out = opt_path(value),
            "heat_out" => self.heat_out = opt_path(value),
            "curve_out" => self.curve_out = opt_path(value),
            "summary_out" => self.summary_out = opt_path(value),
            _ => return Err(Error::Parameter(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("tile_side", self.tile_side.to_string());
        kv("tile_stride", self.tile_stride.to_string());
        kv("sectors", self.sectors.to_string());
        kv("ring_radii", join(&self.ring_radii));
        kv("sigmas", join(&self.sigmas));
        kv("origin", self.origin.to_string());
        kv("mask", self.mask.to_string());
        kv("concepts", if self.concepts.is_empty() { "all".into() } else { self.concepts.join(",") });
        kv("scoring", self.scoring.to_string());
        kv("lambda", self.lambda.to_string());
        kv("asymmetric_presence", self.asymmetric_presence.to_string());
        kv("max_range", self.max_range.map_or("none".into(), |r| r.to_string()));
        kv("skip_empty", self.skip_empty.to_string());
        kv("fft", self.fft.to_string());
        kv("top_k", self.top_k.to_string());
        kv("build_tree", self.build_tree.to_string());
        kv("branches", self.branches.to_string());
        kv("leaf_capacity", self.leaf_capacity.to_string());
        kv("samples", self.samples.to_string());
        kv("spill", self.spill.to_string());
        kv("seed", self.seed.to_string());
        for (k, v) in [
            ("ranking_out", &self.ranking_out),
            ("heat_out", &self.heat_out),
            ("curve_out", &self.curve_out),
            ("summary_out", &self.summary_out),
        ] {
            if let Some(v) = v {
                kv(k, v.clone());
            }
        }
        out
    }

    pub fn layout(&self) -> Result<PoolingLayout> {
        PoolingLayout::new(self.sectors, self.ring_radii.clone(), self.sigmas.clone())
    }

    /// Concept ids named by the filter, or `None` for all.
    pub fn concept_ids(&self, concepts: &[ConceptLabel]) -> Result<Option<Vec<usize>>> {
        if self.concepts.is_empty() {
            Ok(None)
        } else {
            resolve_concepts(concepts, &self.concepts).map(Some)
        }
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            branches: self.branches,
            leaf_capacity: self.leaf_capacity,
            seed: self.seed,
        }
    }

    pub fn budget(&self) -> TraversalBudget {
        TraversalBudget {
            samples: self.samples,
            seed: self.seed,
            spill: self.spill,
        }
    }

    pub fn index_config(&self, concepts: &[ConceptLabel]) -> Result<IndexConfig> {
        if !(self.tile_side > 0.0) {
            return Err(Error::Parameter("tile side must be positive".into()));
        }
        if !(self.tile_stride > 0.0 && self.tile_stride <= self.tile_side) {
            return Err(Error::Parameter("tile stride must lie in (0, tile side]".into()));
        }
        Ok(IndexConfig {
            side: self.tile_side,
            stride: self.tile_stride,
            layout: self.layout()?,
            active: self.concept_ids(concepts)?,
            tree: self.build_tree.then(|| self.tree_params()),
        })
    }

    pub fn query_options(&self) -> QueryOptions {
        QueryOptions {
            origin: self.origin,
            mask: self.mask,
            projection: ProjectionOptions { max_range: self.max_range },
        }
    }

    pub fn search_options(&self) -> Result<SearchOptions> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Parameter("lambda must be nonnegative".into()));
        }
        Ok(SearchOptions {
            scoring: self.scoring,
            params: CombinedScoreParams {
                lambda: self.lambda,
                asymmetric: self.asymmetric_presence,
            },
            skip_empty: self.skip_empty,
            fft: self.fft,
        })
    }
}

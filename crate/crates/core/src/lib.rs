//! Cross-view localization of labelled street-level views against a vector
//! semantic map using Semantic Segment Layout (SSL) descriptors.
//!
//! The map is cut into overlapping square tiles. Every tile is reduced to
//! per-concept Gaussian mixtures and summarised by an annular pooling
//! descriptor; a rectified query view is summarised the same way and tiles
//! are ranked by a rotation-searched, field-of-view-masked distance. A
//! spectral clustering tree gives a sublinear alternative to the full scan.

pub mod camera_geometry;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod index;
pub mod map_model;
pub mod matcher;
pub mod pipeline;
pub mod semantic_tree;
pub mod ssl_descriptor;
pub mod synth;

pub use camera_geometry::{CameraModel, GroundPoint, QueryFile};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use geometry::Point;
pub use index::{parse_index, write_index, TileIndex, TileRecord};
pub use map_model::{ConceptGmm, ConceptLabel, GaussianComponent, SemanticMap, Segment, Tile};
pub use matcher::{CombinedScoreParams, FovMask, MatchResult, RankCurve, Scoring};
pub use pipeline::{build_index, prepare_query, EvalRun, IndexConfig, MaskMode, QueryOptions, SearchOptions};
pub use semantic_tree::{SemanticTree, TraversalBudget, TreeParams};
pub use ssl_descriptor::{OriginMode, PoolingLayout, PresenceVector, SslDescriptor};
pub use synth::SyntheticSpec;

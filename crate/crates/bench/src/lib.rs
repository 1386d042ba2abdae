//! Shared fixtures for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semloc_core::synth::generate_map;
use semloc_core::{build_index, IndexConfig, SemanticMap, SyntheticSpec, TileIndex, TreeParams};

pub use semloc_core::fixtures::{jitter_descriptor, random_descriptor, random_polygon};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A synthetic square map `extent` metres on a side.
pub fn world(extent: f64, seed: u64) -> SemanticMap {
    let spec = SyntheticSpec { extent, ..Default::default() };
    generate_map(&spec, &mut rng(seed)).expect("synthetic map")
}

pub fn index(map: &SemanticMap, tree: bool) -> TileIndex {
    let config = IndexConfig {
        tree: tree.then(TreeParams::default),
        ..Default::default()
    };
    build_index(map, &config).expect("index")
}

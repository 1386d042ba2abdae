use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semloc_core::map_model::{tile_map, Bounds};
use semloc_core::pipeline::{evaluate_run, rank_query, tree_query};
use semloc_core::synth::{generate, generate_map, tile_query};
use semloc_core::{
    build_index, parse_index, prepare_query, write_index, EvalRun, IndexConfig, MaskMode, OriginMode, QueryOptions, Scoring,
    SearchOptions, SemanticMap, SyntheticSpec, TraversalBudget, TreeParams,
};

fn small_map(seed: u64) -> SemanticMap {
    let spec = SyntheticSpec { extent: 150.0, ..Default::default() };
    generate_map(&spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn ci_full() -> QueryOptions {
    QueryOptions {
        origin: OriginMode::ImageCenter,
        mask: MaskMode::Full,
        ..Default::default()
    }
}

#[test]
fn noiseless_tile_queries_rank_first() {
    let map = small_map(5);
    let index = build_index(&map, &IndexConfig::default()).unwrap();
    let spec = SyntheticSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let search = SearchOptions::default();
    let mut checked = 0;
    for tile in tile_map(&map, 30.0, 15.0).unwrap().iter().filter(|t| !t.empty) {
        let k = rng.random_range(0..8);
        let q = tile_query(tile, FRAC_PI_2 + TAU * k as f64 / 8.0, &spec.camera);
        let prepared = prepare_query(&q, &index, &ci_full()).unwrap();
        let ranking = rank_query(&index, &prepared, &search).unwrap();
        assert_eq!(ranking.results[0].tile_id, tile.id);
        assert!(ranking.results[0].distance < 1e-9);
        checked += 1;
    }
    assert!(checked > 50);
}

#[test]
fn noiseless_corpus_is_retrieved_exactly() {
    let spec = SyntheticSpec {
        extent: 150.0,
        n_queries: 40,
        jitter: 0.0,
        dropout: 0.0,
        spurious: 0.0,
        seed: 9,
        ..Default::default()
    };
    let corpus = generate(&spec).unwrap();
    let index = build_index(&corpus.map, &IndexConfig::default()).unwrap();
    let queries: Vec<_> = corpus.queries.iter().map(|q| q.query.clone()).collect();
    let truth: Vec<_> = corpus.queries.iter().map(|q| q.tile).collect();
    let run = EvalRun {
        label: "exact".into(),
        query: QueryOptions { mask: MaskMode::Full, ..Default::default() },
        search: SearchOptions::default(),
        concepts: None,
    };
    let out = evaluate_run(&index, &queries, &truth, &run).unwrap();
    assert!(out.curve.ranks.iter().all(|r| *r == 1), "{:?}", out.curve.ranks);
    assert_eq!(out.curve.recall_at(1.0 / index.tiles.len() as f64), 1.0);
}

#[test]
fn random_baseline_median_is_near_half() {
    let spec = SyntheticSpec { extent: 150.0, n_queries: 240, seed: 2, ..Default::default() };
    let corpus = generate(&spec).unwrap();
    let index = build_index(&corpus.map, &IndexConfig::default()).unwrap();
    let queries: Vec<_> = corpus.queries.iter().map(|q| q.query.clone()).collect();
    let truth: Vec<_> = corpus.queries.iter().map(|q| q.tile).collect();
    let run = EvalRun {
        label: "random".into(),
        query: QueryOptions::default(),
        search: SearchOptions { scoring: Scoring::Random { seed: 4 }, ..Default::default() },
        concepts: None,
    };
    let median = evaluate_run(&index, &queries, &truth, &run).unwrap().curve.median_normalized_rank();
    assert!((median - 0.5).abs() <= 0.05, "median {median}");
}

#[test]
fn source_tile_outranks_every_empty_tile() {
    let mut map = small_map(7);
    // widen the map so a band of empty tiles appears on the east side
    map.bounds = Bounds::new(0.0, 0.0, 240.0, 150.0);
    let index = build_index(&map, &IndexConfig::default()).unwrap();
    let empty: Vec<usize> = index.tiles.iter().filter(|t| t.empty).map(|t| t.id).collect();
    assert!(empty.len() >= 20);
    let spec = SyntheticSpec::default();
    for tile in tile_map(&map, 30.0, 15.0).unwrap().iter().filter(|t| !t.empty).step_by(7) {
        let q = tile_query(tile, FRAC_PI_2, &spec.camera);
        let prepared = prepare_query(&q, &index, &ci_full()).unwrap();
        let ranking = rank_query(&index, &prepared, &SearchOptions::default()).unwrap();
        let best_empty = ranking.results.iter().filter(|r| empty.contains(&r.tile_id)).map(|r| r.rank).min().unwrap();
        assert!(best_empty > ranking.rank_of(tile.id).unwrap());
    }
}

#[test]
fn empty_tiles_share_one_cluster() {
    let mut map = small_map(8);
    map.bounds = Bounds::new(0.0, 0.0, 240.0, 150.0);
    let cfg = IndexConfig { tree: Some(TreeParams::default()), ..Default::default() };
    let index = build_index(&map, &cfg).unwrap();
    let tree = index.tree.as_ref().unwrap();
    let empty: Vec<usize> = index.tiles.iter().filter(|t| t.empty).map(|t| t.id).collect();
    let holders: std::collections::BTreeSet<usize> = tree
        .nodes
        .iter()
        .filter(|n| n.layer == 1)
        .filter(|n| n.tiles.iter().any(|t| empty.contains(t)))
        .map(|n| n.id)
        .collect();
    assert_eq!(holders.len(), 1);
}

#[test]
fn index_text_round_trip_and_tree_search() {
    let map = small_map(10);
    let cfg = IndexConfig { tree: Some(TreeParams { leaf_capacity: 4, ..Default::default() }), ..Default::default() };
    let index = build_index(&map, &cfg).unwrap();
    let text = write_index(&index);
    let back = parse_index(&text).unwrap();
    assert_eq!(write_index(&back), text);
    assert_eq!(back.tiles.len(), 81);

    let spec = SyntheticSpec::default();
    let tile = tile_map(&map, 30.0, 15.0).unwrap().into_iter().find(|t| !t.empty).unwrap();
    let prepared = prepare_query(&tile_query(&tile, FRAC_PI_2, &spec.camera), &back, &ci_full()).unwrap();
    let found = tree_query(&back, &prepared, &SearchOptions::default(), TraversalBudget::default()).unwrap();
    assert!(found.comparisons < back.tiles.len());
    assert!(found.scored.windows(2).all(|w| w[0].distance <= w[1].distance));
}

#[test]
fn concept_filter_keeps_requested_blocks() {
    let map = small_map(11);
    let cfg = IndexConfig { active: Some(vec![2]), ..Default::default() };
    let index = build_index(&map, &cfg).unwrap();
    assert!(index.tiles.iter().all(|t| t.descriptor.n_blocks() == 1));
    assert_eq!(index.active, vec![2]);
}

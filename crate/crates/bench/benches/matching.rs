use std::f64::consts::FRAC_PI_2;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use semloc_bench::{index, jitter_descriptor, random_descriptor, rng, world};
use semloc_core::map_model::tile_map;
use semloc_core::matcher::RotationCorrelator;
use semloc_core::matcher::{min_rotation_distance, rank_tiles, TileScorer};
use semloc_core::pipeline::{prepare_query, tree_query};
use semloc_core::synth::tile_query;
use semloc_core::{CombinedScoreParams, FovMask, MaskMode, OriginMode, QueryOptions, Scoring, SearchOptions, SyntheticSpec, TraversalBudget};

fn rotation(c: &mut Criterion) {
    let mut group = c.benchmark_group("min_rotation");
    let mut r = rng(1);
    for sectors in [8, 16, 64] {
        let q = random_descriptor(&mut r, 7, 1, sectors);
        let t = jitter_descriptor(&mut r, &q, 0.1);
        let mask = FovMask::full(1, sectors);
        let fft = RotationCorrelator::new(sectors);
        group.bench_with_input(BenchmarkId::new("brute", sectors), &sectors, |b, _| {
            b.iter(|| min_rotation_distance(black_box(&q), black_box(&t), &mask).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fft", sectors), &sectors, |b, _| {
            b.iter(|| fft.min_rotation_distance(black_box(&q), black_box(&t), &mask).unwrap())
        });
    }
    group.finish();
}

fn ranking(c: &mut Criterion) {
    let map = world(315.0, 3);
    let idx = index(&map, true);
    let tile = tile_map(&map, 30.0, 15.0).unwrap().into_iter().find(|t| !t.empty).unwrap();
    let query = tile_query(&tile, FRAC_PI_2, &SyntheticSpec::default().camera);
    let opts = QueryOptions { origin: OriginMode::ImageCenter, mask: MaskMode::Full, ..Default::default() };
    let prepared = prepare_query(&query, &idx, &opts).unwrap();
    let search = SearchOptions::default();

    let mut group = c.benchmark_group("rank_400_tiles");
    group.bench_function("exhaustive", |b| {
        let scorer = TileScorer::new(&prepared.descriptor, &prepared.mask, Scoring::SslPresence, CombinedScoreParams::default());
        b.iter(|| rank_tiles(&scorer, black_box(&idx.tiles), false).unwrap())
    });
    group.bench_function("tree", |b| {
        b.iter(|| tree_query(&idx, black_box(&prepared), &search, TraversalBudget::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, rotation, ranking);
criterion_main!(benches);

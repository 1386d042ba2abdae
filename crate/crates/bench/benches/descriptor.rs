use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use semloc_bench::{random_polygon, rng, world};
use semloc_core::map_model::{polygon_gaussian, tile_gmms, tile_map};
use semloc_core::ssl_descriptor::{extract_descriptor, NORTH};
use semloc_core::PoolingLayout;

fn moments(c: &mut Criterion) {
    let mut r = rng(5);
    let polys: Vec<_> = (0..100).map(|_| random_polygon(&mut r)).collect();
    c.bench_function("polygon_gaussian_x100", |b| {
        b.iter(|| polys.iter().map(|p| polygon_gaussian(black_box(p)).area).sum::<f64>())
    });
}

fn extraction(c: &mut Criterion) {
    let map = world(315.0, 7);
    let tiles = tile_map(&map, 30.0, 15.0).unwrap();
    let tile = tiles.iter().max_by_key(|t| t.segments.len()).unwrap();
    let gmms = tile_gmms(tile, map.concepts.len());
    let layout = PoolingLayout::default();
    c.bench_function("extract_descriptor", |b| {
        b.iter(|| extract_descriptor(black_box(&gmms), &layout, tile.center, NORTH).unwrap())
    });
    c.bench_function("tile_gmms", |b| b.iter(|| tile_gmms(black_box(tile), map.concepts.len())));
}

criterion_group!(benches, moments, extraction);
criterion_main!(benches);

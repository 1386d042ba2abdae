use std::fmt::Write;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use semloc_core::camera_geometry::{parse_query, write_query};
use semloc_core::map_model::{parse_map, resolve_concepts, write_map};
use semloc_core::matcher::{HeatGrid, MatchResult};
use semloc_core::pipeline::{evaluate_run, rank_query, tree_query, EvalOutcome};
use semloc_core::synth::{generate, QueryStyle};
use semloc_core::{build_index as build, parse_index, prepare_query, write_index, EvalRun, Scoring, SyntheticSpec, TileIndex};

use crate::manifest::{Manifest, ManifestEntry};
use crate::output::{read, Outputs};
use crate::settings::{Flags, Settings};
use crate::{BuildIndexArgs, EvaluateArgs, QueryArgs, SearchMode, SynthArgs, TreeLayersArgs};

fn load_index(path: &Path) -> Result<TileIndex> {
    parse_index(&read(path)?).with_context(|| format!("parsing index {}", path.display()))
}

pub fn build_index(args: &BuildIndexArgs, config: Option<&Path>, sets: &[String]) -> Result<()> {
    let mut flags = Flags::default();
    flags
        .opt("concepts", &args.concepts)
        .opt("tile_side", &args.tile_side)
        .opt("tile_stride", &args.tile_stride)
        .opt("sectors", &args.sectors)
        .opt("seed", &args.seed)
        .on("build_tree", args.tree);
    let settings = Settings::load(config, sets, &flags.0)?;
    let map = parse_map(&read(&args.map)?).with_context(|| format!("parsing map {}", args.map.display()))?;
    let index = build(&map, &settings.config.index_config(&map.concepts)?)?;
    log::info!("indexed {} tiles", index.tiles.len());
    let mut out = Outputs::default();
    out.stage(&args.out, &write_index(&index))?;
    out.commit()
}

fn ranking_csv(results: &[MatchResult], index: &TileIndex) -> String {
    let mut out = String::from("rank,tile_id,distance,shift,x,y\n");
    for r in results {
        let c = index.tile(r.tile_id).map(|t| t.center).unwrap_or_default();
        writeln!(out, "{},{},{},{},{},{}", r.rank, r.tile_id, r.distance, r.best_shift, c.x, c.y).unwrap();
    }
    out
}

pub fn query(args: &QueryArgs, config: Option<&Path>, sets: &[String]) -> Result<()> {
    let mut flags = Flags::default();
    args.matching.flags(&mut flags);
    flags
        .opt("scoring", &args.scoring)
        .opt("top_k", &args.top_k)
        .opt("ranking_out", &args.ranking.as_ref().map(|p| p.display()))
        .opt("heat_out", &args.heat.as_ref().map(|p| p.display()));
    let settings = Settings::load(config, sets, &flags.0)?;
    let cfg = &settings.config;

    let index = load_index(&args.index)?;
    settings.check_compatible(&index)?;
    let query = parse_query(&read(&args.query)?).with_context(|| format!("parsing query {}", args.query.display()))?;
    let prepared = prepare_query(&query, &index, &cfg.query_options())?;
    let search = cfg.search_options()?;

    let (results, heat) = match args.search {
        SearchMode::Exhaustive => {
            let ranking = rank_query(&index, &prepared, &search)?;
            (ranking.results, ranking.heat)
        }
        SearchMode::Tree => {
            let found = tree_query(&index, &prepared, &search, cfg.budget())?;
            log::info!("tree search scored {} tiles", found.comparisons);
            let heat = HeatGrid::from_results(&found.scored, &index.tiles);
            (found.scored, heat)
        }
    };

    let mut out = Outputs::default();
    if let Some(p) = &cfg.ranking_out {
        out.stage(Path::new(p), &ranking_csv(&results, &index))?;
    }
    if let Some(p) = &cfg.heat_out {
        out.stage(Path::new(p), &heat.to_pgm())?;
    }
    out.commit()?;

    let top: Vec<MatchResult> = results.iter().take(cfg.top_k).copied().collect();
    print!("{}", ranking_csv(&top, &index));
    Ok(())
}

pub fn synth(args: &SynthArgs, config: Option<&Path>, sets: &[String]) -> Result<()> {
    let mut flags = Flags::default();
    flags.opt("seed", &args.seed);
    let settings = Settings::load(config, sets, &flags.0)?;
    let cfg = &settings.config;

    let mut spec = SyntheticSpec {
        tile_side: cfg.tile_side,
        tile_stride: cfg.tile_stride,
        sectors: cfg.sectors,
        seed: cfg.seed,
        quantized_heading: args.quantized_heading,
        ..SyntheticSpec::default()
    };
    if let Some(v) = args.queries {
        spec.n_queries = v;
    }
    if let Some(v) = args.extent {
        spec.extent = v;
    }
    if let Some(v) = args.jitter {
        spec.jitter = v;
    }
    if let Some(v) = args.dropout {
        spec.dropout = v;
    }
    if let Some(v) = args.spurious {
        spec.spurious = v;
    }
    if let Some(v) = &args.style {
        spec.style = v.parse::<QueryStyle>()?;
    }
    if let Some(v) = args.district_size {
        spec.district_size = v;
    }
    if let Some(v) = args.district_keep {
        spec.district_keep = v;
    }

    let corpus = generate(&spec)?;
    let mut out = Outputs::default();
    let map_name = "map.semmap";
    out.stage(&args.out_dir.join(map_name), &write_map(&corpus.map))?;
    let mut manifest = Manifest {
        map: Some(map_name.into()),
        entries: Vec::new(),
    };
    let mut empty = 0;
    for (i, q) in corpus.queries.iter().enumerate() {
        let rel = format!("queries/q{i:04}.semq");
        out.stage(&args.out_dir.join(&rel), &write_query(&q.query))?;
        empty += usize::from(q.kept == 0);
        manifest.entries.push(ManifestEntry {
            path: rel,
            tile: q.tile,
            heading: q.heading,
            camera: (q.camera_at.x, q.camera_at.y),
            kept: q.kept,
            dropped: q.dropped,
            spurious: q.spurious,
        });
    }
    if empty > 0 {
        log::warn!("{empty} quer{} kept no segments", if empty == 1 { "y" } else { "ies" });
    }
    out.stage(&args.out_dir.join("manifest.txt"), &manifest.to_text())?;
    out.commit()?;
    println!("{} queries on {} segments", corpus.queries.len(), corpus.map.segments.len());
    Ok(())
}

fn parse_run(spec: &str, index: &TileIndex, base: &EvalRun) -> Result<EvalRun> {
    let parts: Vec<&str> = spec.splitn(4, ':').collect();
    ensure!(parts.len() >= 2, "--run expects LABEL:SCORING[:ORIGIN[:CONCEPTS]], got `{spec}`");
    ensure!(!parts[0].is_empty(), "--run label is empty in `{spec}`");
    let mut run = base.clone();
    run.label = parts[0].to_string();
    run.search.scoring = parts[1].parse()?;
    if let Some(origin) = parts.get(2).filter(|o| !o.is_empty()) {
        run.query.origin = origin.parse()?;
    }
    if let Some(names) = parts.get(3) {
        let names: Vec<String> = names.split(',').map(str::to_string).filter(|s| !s.trim().is_empty()).collect();
        let ids = resolve_concepts(&index.concepts, &names)?;
        if let Some(c) = ids.iter().find(|c| !index.active.contains(c)) {
            bail!("concept `{}` is not carried by the index", index.concepts[*c].name);
        }
        run.concepts = Some(ids);
    }
    Ok(run)
}

fn default_runs(base: &EvalRun, seed: u64) -> Vec<EvalRun> {
    [Scoring::SslPresence, Scoring::Ssl, Scoring::Presence, Scoring::Random { seed }]
        .into_iter()
        .map(|scoring| {
            let mut run = base.clone();
            run.label = match scoring {
                Scoring::Random { .. } => "random".into(),
                s => s.to_string(),
            };
            run.search.scoring = scoring;
            run
        })
        .collect()
}

fn curve_csv(outcomes: &[EvalOutcome]) -> String {
    let mut out = String::from("config,fraction,recall\n");
    for o in outcomes {
        for (f, r) in &o.curve.points {
            writeln!(out, "{},{f},{r}", o.label).unwrap();
        }
    }
    out
}

fn summary_csv(outcomes: &[EvalOutcome]) -> String {
    let mut out = String::from("config,queries,tiles,median_normalized_rank,recall_at_1pct,recall_at_5pct,auc\n");
    for o in outcomes {
        let c = &o.curve;
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6}",
            o.label,
            c.ranks.len(),
            c.n_tiles,
            c.median_normalized_rank(),
            c.recall_at(0.01),
            c.recall_at(0.05),
            c.auc()
        )
        .unwrap();
    }
    out
}

pub fn evaluate(args: &EvaluateArgs, config: Option<&Path>, sets: &[String]) -> Result<()> {
    let mut flags = Flags::default();
    args.matching.flags(&mut flags);
    flags
        .opt("curve_out", &args.curve.as_ref().map(|p| p.display()))
        .opt("summary_out", &args.summary.as_ref().map(|p| p.display()));
    let settings = Settings::load(config, sets, &flags.0)?;
    let cfg = &settings.config;

    let index = load_index(&args.index)?;
    settings.check_compatible(&index)?;
    let (manifest, base_dir) = Manifest::load(&args.manifest)?;
    ensure!(!manifest.entries.is_empty(), "manifest {} lists no queries", args.manifest.display());

    let mut queries = Vec::with_capacity(manifest.entries.len());
    let mut truth = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        if index.tile(e.tile).is_none() {
            bail!("manifest entry {} names tile {} which is not in the index", e.path, e.tile);
        }
        let path = base_dir.join(&e.path);
        let q = parse_query(&read(&path)?).with_context(|| format!("parsing query {}", path.display()))?;
        queries.push(q);
        truth.push(e.tile);
    }
    let empty = manifest.entries.iter().filter(|e| e.kept == 0).count();
    if empty > 0 {
        log::warn!("{empty} manifest {} no segments", if empty == 1 { "query carries" } else { "queries carry" });
    }

    let base = EvalRun {
        label: String::new(),
        query: cfg.query_options(),
        search: cfg.search_options()?,
        concepts: None,
    };
    let runs = if args.runs.is_empty() {
        default_runs(&base, cfg.seed)
    } else {
        args.runs.iter().map(|s| parse_run(s, &index, &base)).collect::<Result<Vec<_>>>()?
    };
    let outcomes = runs
        .iter()
        .map(|run| evaluate_run(&index, &queries, &truth, run).with_context(|| format!("evaluating `{}`", run.label)))
        .collect::<Result<Vec<_>>>()?;

    let summary = summary_csv(&outcomes);
    let mut out = Outputs::default();
    if let Some(p) = &cfg.curve_out {
        out.stage(Path::new(p), &curve_csv(&outcomes))?;
    }
    if let Some(p) = &cfg.summary_out {
        out.stage(Path::new(p), &summary)?;
    }
    out.commit()?;
    print!("{summary}");
    Ok(())
}

pub fn tree_layers(args: &TreeLayersArgs) -> Result<()> {
    let index = load_index(&args.index)?;
    let tree = index
        .tree
        .as_ref()
        .context("index was built without a semantic tree (rebuild with --tree)")?;
    let mut csv = String::from("layer,tile_id,x,y,cluster\n");
    for (layer, tile, node) in tree.layer_assignments() {
        let c = index.tile(tile).map(|t| t.center).unwrap_or_default();
        writeln!(csv, "{layer},{tile},{},{},{node}", c.x, c.y).unwrap();
    }
    match &args.out {
        Some(p) => {
            let mut out = Outputs::default();
            out.stage(p, &csv)?;
            out.commit()
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

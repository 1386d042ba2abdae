use std::path::Path;
use std::process::{Command, Output};

fn semloc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semloc"))
        .args(args)
        .current_dir(dir)
        .env_remove("SEMLOC_THREADS")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = semloc(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// A noiseless 90 m corpus (25 tiles) with its index.
fn corpus(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "synth", "--out-dir", "c", "--extent", "90", "--queries", "8", "--jitter", "0", "--dropout", "0", "--spurious", "0",
    ];
    args.extend_from_slice(extra);
    ok(dir, &args);
    ok(dir, &["build-index", "--map", "c/map.semmap", "--out", "index.txt", "--tree", "--set", "leaf_capacity=3"]);
}

fn manifest_rows(dir: &Path) -> Vec<(String, usize)> {
    std::fs::read_to_string(dir.join("c/manifest.txt"))
        .unwrap()
        .lines()
        .filter(|l| l.starts_with("QUERY"))
        .map(|l| {
            let t: Vec<&str> = l.split_whitespace().collect();
            (format!("c/{}", t[1]), t[2].parse().unwrap())
        })
        .collect()
}

fn vec_len(index: &str) -> usize {
    index.lines().find(|l| l.starts_with("VEC ")).unwrap().split_whitespace().count() - 2
}

#[test]
fn index_has_one_record_per_tile() {
    let d = tempfile::tempdir().unwrap();
    corpus(d.path(), &[]);
    let index = std::fs::read_to_string(d.path().join("index.txt")).unwrap();
    assert_eq!(index.lines().filter(|l| l.starts_with("TILE ")).count(), 25);
    assert_eq!(index.lines().filter(|l| l.starts_with("VEC ")).count(), 25);
    assert_eq!(vec_len(&index), 7 * 8);

    ok(d.path(), &["build-index", "--map", "c/map.semmap", "--out", "b.txt", "--concepts", "Building"]);
    let filtered = std::fs::read_to_string(d.path().join("b.txt")).unwrap();
    assert_eq!(vec_len(&filtered), 8);
}

#[test]
fn verbatim_query_finds_its_tile() {
    let d = tempfile::tempdir().unwrap();
    corpus(d.path(), &[]);
    for (query, tile) in manifest_rows(d.path()) {
        for search in ["exhaustive", "tree"] {
            let out = ok(d.path(), &["query", "--index", "index.txt", "--query", &query, "--mask", "full", "--search", search]);
            let top: usize = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(top, tile, "{search} search for {query}");
        }
    }
}

#[test]
fn query_writes_ranking_and_heat_map() {
    let d = tempfile::tempdir().unwrap();
    corpus(d.path(), &[]);
    let (query, _) = manifest_rows(d.path()).remove(0);
    let out = ok(
        d.path(),
        &["query", "--index", "index.txt", "--query", &query, "--ranking", "out/r.csv", "--heat", "out/h.pgm", "--top-k", "3"],
    );
    assert_eq!(out.lines().count(), 4);
    let ranking = std::fs::read_to_string(d.path().join("out/r.csv")).unwrap();
    assert_eq!(ranking.lines().next().unwrap(), "rank,tile_id,distance,shift,x,y");
    assert_eq!(ranking.lines().count(), 26);
    let heat = std::fs::read_to_string(d.path().join("out/h.pgm")).unwrap();
    assert!(heat.starts_with("P2\n5 5\n255\n"));
}

#[test]
fn missing_query_fails_without_outputs() {
    let d = tempfile::tempdir().unwrap();
    corpus(d.path(), &[]);
    let out = semloc(d.path(), &["query", "--index", "index.txt", "--query", "nope.semq", "--ranking", "r.csv", "--heat", "h.pgm"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.semq"));
    assert!(!d.path().join("r.csv").exists());
    assert!(!d.path().join("h.pgm").exists());
    let leftovers = std::fs::read_dir(d.path()).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().starts_with(".semloc-")
    });
    assert_eq!(leftovers.count(), 0);
}

#[test]
fn layout_mismatch_is_refused() {
    let d = tempfile::tempdir().unwrap();
    corpus(d.path(), &[]);
    let (query, _) = manifest_rows(d.path()).remove(0);
    let out = semloc(d.path(), &["query", "--index", "index.txt", "--query", &query, "--set", "sectors=6"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match the index"));
}

#[test]
fn flags_override_set_which_overrides_the_file() {
    let d = tempfile::tempdir().unwrap();
    corpus(d.path(), &[]);
    let (query, _) = manifest_rows(d.path()).remove(0);
    std::fs::write(d.path().join("run.cfg"), "# run\ntop_k = 2\nlambda = 0.5\n").unwrap();
    let rows = |extra: &[&str]| {
        let mut args = vec!["--config", "run.cfg", "query", "--index", "index.txt", "--query", &query];
        args.extend_from_slice(extra);
        ok(d.path(), &args).lines().count() - 1
    };
    assert_eq!(rows(&[]), 2);
    assert_eq!(rows(&["--set", "top_k=3"]), 3);
    assert_eq!(rows(&["--set", "top_k=3", "--top-k", "4"]), 4);

    std::fs::write(d.path().join("bad.cfg"), "top_k = 2\ntopk = 3\n").unwrap();
    let out = semloc(d.path(), &["--config", "bad.cfg", "query", "--index", "index.txt", "--query", &query]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn evaluate_writes_labelled_curves() {
    let d = tempfile::tempdir().unwrap();
    corpus(d.path(), &[]);
    let summary = ok(
        d.path(),
        &[
            "evaluate",
            "--index",
            "index.txt",
            "--manifest",
            "c/manifest.txt",
            "--mask",
            "full",
            "--run",
            "all:ssl+presence",
            "--run",
            "subset:ssl+presence:cc:Building,Lamp Post,Traffic Signal,Traffic Sign",
            "--curve",
            "curve.csv",
        ],
    );
    let curve = std::fs::read_to_string(d.path().join("curve.csv")).unwrap();
    assert_eq!(curve.lines().next().unwrap(), "config,fraction,recall");
    assert_eq!(curve.lines().filter(|l| l.starts_with("all,")).count(), 26);
    assert_eq!(curve.lines().filter(|l| l.starts_with("subset,")).count(), 26);
    // noiseless queries: everything at rank 1
    let all = summary.lines().find(|l| l.starts_with("all,")).unwrap();
    assert!(all.contains(",1.000000,1.000000,"), "{all}");
    assert!(curve.lines().rfind(|l| l.starts_with("all,")).unwrap().ends_with(",1"));
}

#[test]
fn evaluate_rejects_foreign_manifest() {
    let d = tempfile::tempdir().unwrap();
    corpus(d.path(), &[]);
    ok(d.path(), &["synth", "--out-dir", "big", "--queries", "20"]);
    let out = semloc(d.path(), &["evaluate", "--index", "index.txt", "--manifest", "big/manifest.txt"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not in the index"));
}

#[test]
fn full_dropout_is_flagged() {
    let d = tempfile::tempdir().unwrap();
    let out = semloc(d.path(), &["synth", "--out-dir", "c", "--extent", "90", "--queries", "3", "--dropout", "1", "--spurious", "0"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("kept no segments"));
    let manifest = std::fs::read_to_string(d.path().join("c/manifest.txt")).unwrap();
    assert!(manifest.lines().filter(|l| l.starts_with("QUERY")).all(|l| l.split_whitespace().nth(6) == Some("0")));
}

#[test]
fn tree_layers_lists_every_tile_per_layer() {
    let d = tempfile::tempdir().unwrap();
    corpus(d.path(), &[]);
    let csv = ok(d.path(), &["tree-layers", "--index", "index.txt"]);
    assert_eq!(csv.lines().next().unwrap(), "layer,tile_id,x,y,cluster");
    let layer1 = csv.lines().filter(|l| l.starts_with("1,")).count();
    assert_eq!(layer1, 25);

    ok(d.path(), &["build-index", "--map", "c/map.semmap", "--out", "flat.txt"]);
    assert!(!semloc(d.path(), &["tree-layers", "--index", "flat.txt"]).status.success());
}

#[test]
fn thread_cap_is_validated() {
    let d = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_semloc"))
            .args(["synth", "--out-dir", "c", "--extent", "90", "--queries", "2"])
            .current_dir(d.path())
            .env("SEMLOC_THREADS", threads)
            .output()
            .unwrap()
            .status
            .success()
    };
    assert!(run("2"));
    assert!(!run("0"));
    assert!(!run("many"));
}

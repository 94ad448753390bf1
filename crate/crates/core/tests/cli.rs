use std::path::Path;
use std::process::{Command, Output};

use rrr_ann::bench::{brute_force_knn, load_fvecs, load_ivecs};
use rrr_ann::{Metric, QueryParams, RrrIndex};

fn rrrann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrrann"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("toy");
    ok(&rrrann(&["synth", "--m", "3000", "--q", "40", "--d", "24", "--kind", "clustered:8", "--seed", "5", "--out", p(&prefix)]));
    let base = dir.path().join("toy.base.fvecs");
    let queries = dir.path().join("toy.query.fvecs");
    assert_eq!(load_fvecs(&base).unwrap().rows(), 3000);

    let gt = dir.path().join("gt.ivecs");
    ok(&rrrann(&["gt", "--data", p(&base), "--queries", p(&queries), "--k", "10", "--out", p(&gt)]));
    let truth = load_ivecs(&gt).unwrap();
    let corpus = load_fvecs(&base).unwrap();
    let qs = load_fvecs(&queries).unwrap();
    assert_eq!(truth, brute_force_knn(&corpus, &qs, 10, Metric::Euclidean).unwrap());

    let idx = dir.path().join("toy.idx");
    ok(&rrrann(&[
        "build", "--data", p(&base), "--metric", "euclidean", "--clusters", "20", "--rank", "8", "--reduced-dim", "16",
        "--seed", "1", "--threads", "2", "--out", p(&idx),
    ]));

    let csv = dir.path().join("q.csv");
    let results = dir.path().join("res.ivecs");
    let out = rrrann(&[
        "query", "--index", p(&idx), "--queries", p(&queries), "--k", "10", "--w", "4", "--t", "50", "--gt", p(&gt),
        "--csv", p(&csv), "--results", p(&results),
    ]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("recall@10"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 2);

    // CLI results match the library on the same file
    let index = RrrIndex::load(&idx).unwrap();
    let lib: Vec<Vec<usize>> = index
        .query_batch(&qs, &QueryParams::new(10, 4, 50))
        .unwrap()
        .into_iter()
        .map(|r| r.ids)
        .collect();
    assert_eq!(load_ivecs(&results).unwrap(), lib);

    let grid = dir.path().join("grid.toml");
    std::fs::write(&grid, "clusters = [10, 20]\nreduced_dim = [16]\nrank = [8]\nk = 10\nw = [2, 4]\nt = [20, 50]\n").unwrap();
    let sweep_csv = dir.path().join("sweep.csv");
    let script = dir.path().join("plot.gp");
    ok(&rrrann(&[
        "sweep", "--data", p(&base), "--queries", p(&queries), "--grid", p(&grid), "--repeats", "2", "--csv",
        p(&sweep_csv), "--gnuplot", p(&script),
    ]));
    let text = std::fs::read_to_string(&sweep_csv).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.starts_with(rrr_ann::bench::CSV_HEADER));
    assert!(std::fs::read_to_string(&script).unwrap().contains("plot"));
    // ground truth was cached next to the corpus
    assert!(rrr_ann::bench::ground_truth_path(&base, 10, Metric::Euclidean).exists());
}

#[test]
fn shifted_synth_writes_training_queries() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("ood");
    ok(&rrrann(&["synth", "--m", "500", "--q", "10", "--d", "8", "--kind", "shifted", "--train", "100", "--out", p(&prefix)]));
    let train = dir.path().join("ood.train.fvecs");
    assert_eq!(load_fvecs(&train).unwrap().rows(), 100);
    let idx = dir.path().join("ood.idx");
    ok(&rrrann(&[
        "build", "--data", p(&dir.path().join("ood.base.fvecs")), "--metric", "ip", "--clusters", "5", "--rank", "4",
        "--train", p(&train), "--train-local", "cluster", "--out", p(&idx),
    ]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // usage: unknown subcommand, bad flag value, invalid parameters
    assert_eq!(rrrann(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(rrrann(&["synth", "--m", "x", "--q", "1", "--d", "2", "--out", "a"]).status.code(), Some(2));
    let prefix = dir.path().join("s");
    ok(&rrrann(&["synth", "--m", "200", "--q", "5", "--d", "8", "--out", p(&prefix)]));
    let base = dir.path().join("s.base.fvecs");
    let idx = dir.path().join("s.idx");
    let too_many = rrrann(&["build", "--data", p(&base), "--clusters", "500", "--out", p(&idx)]);
    assert_eq!(too_many.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&too_many.stderr).contains("clusters"));

    ok(&rrrann(&["build", "--data", p(&base), "--clusters", "4", "--rank", "4", "--out", p(&idx)]));
    let q = dir.path().join("s.query.fvecs");
    assert_eq!(rrrann(&["query", "--index", p(&idx), "--queries", p(&q), "--k", "5", "--w", "9", "--t", "20"]).status.code(), Some(2));

    // data: missing file, corrupt index, wrong dimension
    assert_eq!(rrrann(&["build", "--data", "/nonexistent.fvecs", "--out", p(&idx)]).status.code(), Some(3));
    let broken = dir.path().join("broken.idx");
    let bytes = std::fs::read(&idx).unwrap();
    std::fs::write(&broken, &bytes[..bytes.len() - 10]).unwrap();
    assert_eq!(rrrann(&["query", "--index", p(&broken), "--queries", p(&q), "--k", "5", "--w", "2", "--t", "20"]).status.code(), Some(3));
    let garbage = dir.path().join("garbage.fvecs");
    std::fs::write(&garbage, [7u8, 0, 0]).unwrap();
    let out = rrrann(&["gt", "--data", p(&garbage), "--queries", p(&q), "--k", "1", "--out", p(&dir.path().join("g.ivecs"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("record 0"));

    assert_eq!(rrrann(&["--help"]).status.code(), Some(0));
}

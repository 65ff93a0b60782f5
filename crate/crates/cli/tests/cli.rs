use std::path::Path;
use std::process::{Command, Output};

use sublog::keyfile::read_normalized;
use sublog::keys::rank_oracle;

fn sublog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sublog"))
        .args(args)
        .env("SUBLOG_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Parses "rank=<r> ops=<m>".
fn parse_query(o: &Output) -> (usize, u64) {
    let text = stdout(o);
    let mut rank = None;
    let mut ops = None;
    for part in text.split_whitespace() {
        if let Some(v) = part.strip_prefix("rank=") {
            rank = v.parse().ok();
        }
        if let Some(v) = part.strip_prefix("ops=") {
            ops = v.parse().ok();
        }
    }
    (rank.expect("rank printed"), ops.expect("ops printed"))
}

#[test]
fn generate_writes_sorted_unit_keys_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    for path in [&a, &b] {
        let o = sublog(&["generate", "--dist", "uniform", "--n", "100", "--seed", "7", "--out", p(path)]);
        assert!(o.status.success(), "{o:?}");
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let keys = read_normalized(&a).unwrap();
    assert_eq!(keys.len(), 100);
    assert!(keys.keys().iter().all(|&x| (0.0..=1.0).contains(&x)));

    let raw = dir.path().join("raw.bin");
    let o = sublog(&["generate", "--dist", "power:t=4", "--n", "50", "--out", p(&raw), "--format", "raw"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&raw).unwrap().len(), 8 + 8 * 50);
}

#[test]
fn bad_spec_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.bin");
    let o = sublog(&["generate", "--dist", "gauss:sigma=-1", "--n", "10", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn queries_match_the_oracle_for_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("keys.bin");
    let o = sublog(&["generate", "--dist", "gauss:mu=0.5,sigma=0.1", "--n", "5000", "--seed", "3", "--out", p(&data)]);
    assert!(o.status.success());
    let keys = read_normalized(&data).unwrap();

    let pca = dir.path().join("pca.idx");
    let rda = dir.path().join("rda.idx");
    assert!(sublog(&["build", "--method", "pca", "--data", p(&data), "--out", p(&pca), "--rho", "4"]).status.success());
    assert!(sublog(&["build", "--method", "rda", "--data", p(&data), "--out", p(&rda)]).status.success());

    let below = keys.keys()[0] - 1e-6;
    let above = keys.keys()[4999] + 1e-6;
    for q in [below, 0.123, 0.5, 0.61803, keys.keys()[2500], above] {
        let expected = rank_oracle(&keys, q).0;
        let qs = q.to_string();
        for idx in [&pca, &rda] {
            let o = sublog(&["query", "--data", p(&data), "--index", p(idx), "--q", &qs]);
            assert!(o.status.success(), "{o:?}");
            assert_eq!(parse_query(&o).0, expected);
        }
        for method in ["binary", "pca", "rds", "rda", "subexp"] {
            let o = sublog(&[
                "query", "--data", p(&data), "--method", method, "--dist", "gauss:mu=0.5,sigma=0.1", "--q", &qs,
            ]);
            assert!(o.status.success(), "{o:?}");
            let (rank, ops) = parse_query(&o);
            assert_eq!(rank, expected, "{method} at {q}");
            assert!(ops >= 1);
        }
    }
    let o = sublog(&["query", "--data", p(&data), "--q", "-3"]);
    assert_eq!(parse_query(&o).0, 0);
    let o = sublog(&["query", "--data", p(&data), "--q", "7"]);
    assert_eq!(parse_query(&o).0, 5000);
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.bin");
    let o = sublog(&["query", "--data", p(&missing), "--q", "0.5"]);
    assert_eq!(o.status.code(), Some(1));

    let data = dir.path().join("keys.bin");
    sublog(&["generate", "--dist", "uniform", "--n", "300", "--out", p(&data)]);
    let rda = dir.path().join("rda.idx");
    sublog(&["build", "--method", "rda", "--data", p(&data), "--out", p(&rda)]);
    let mut bytes = std::fs::read(&rda).unwrap();
    bytes[8] = 2;
    std::fs::write(&rda, bytes).unwrap();
    let o = sublog(&["query", "--data", p(&data), "--index", p(&rda), "--q", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("version"));
}

#[test]
fn bench_rows_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one.csv");
    let o = sublog(&["bench", "--method", "binary", "--n", "1000", "--arrays", "3", "--queries", "50", "--out", p(&out)]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("method,dist,n,metric_ops,index_size_ints,build_seconds\n"));

    let o = sublog(&["bench", "--method", "btree", "--n", "1000"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sublog(&["bench", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));

    let sweep = dir.path().join("sweep.csv");
    let o = sublog(&[
        "bench", "--method", "pca,rds,rda", "--dist", "uniform", "--dist", "power:t=4", "--n", "500,1000",
        "--arrays", "2", "--queries", "20", "--out", p(&sweep),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(std::fs::read_to_string(&sweep).unwrap().lines().count(), 1 + 3 * 2 * 2);

    let o = sublog(&["report", p(&sweep)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1 + 12);
}

#[test]
fn config_file_with_flag_overrides_and_repeatable_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.conf");
    let first = dir.path().join("first.csv");
    std::fs::write(
        &config,
        format!(
            "# sweep\nmethod = rds,binary\ndist = uniform\ndist = gauss:mu=0.5,sigma=0.1\nn = 800\narrays = 4\nqueries = 30\nseed = 11\nout = {}\n",
            first.display()
        ),
    )
    .unwrap();
    let o = sublog(&["bench", "--config", p(&config)]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(std::fs::read_to_string(&first).unwrap().lines().count(), 5);

    let second = dir.path().join("second.csv");
    let o = sublog(&["bench", "--config", p(&config), "--out", p(&second)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());

    let override_n = dir.path().join("third.csv");
    let o = sublog(&["bench", "--config", p(&config), "--n", "900,1000", "--out", p(&override_n)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&override_n).unwrap().lines().count(), 9);

    std::fs::write(&config, "colour = red\n").unwrap();
    let o = sublog(&["bench", "--config", p(&config)]);
    assert_eq!(o.status.code(), Some(1));
}

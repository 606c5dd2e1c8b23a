use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_imageability");

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Vec<Value> {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn error_record(out: &Output) -> Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("error record on stderr");
    serde_json::from_str(last).unwrap()
}

/// Copies the fixtures into `dir` with a config writing to `dir/out`.
fn fixture_config(dir: &Path) -> PathBuf {
    for name in [
        "mrc_sample.dct",
        "brysbaert_sample.tsv",
        "poems.txt",
        "captions.txt",
        "news.txt",
        "ratings.tsv",
    ] {
        std::fs::copy(fixtures().join(name), dir.join(name)).unwrap();
    }
    let config = std::fs::read_to_string(fixtures().join("run.toml"))
        .unwrap()
        .replace("../target/fixture-run", "out");
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    path
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn config_run_is_resumable_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config_a = fixture_config(a.path());
    let config_b = fixture_config(b.path());

    let summary = ok(&["run", "--config", config_a.to_str().unwrap()]);
    let stages: Vec<&str> = summary
        .iter()
        .map(|s| s["stage"].as_str().unwrap())
        .collect();
    assert_eq!(
        stages,
        ["ingest", "prepare", "deform", "generate", "score", "report"]
    );
    let generate = &summary[3];
    assert_eq!(generate["cache_hits"], 0);
    assert!(generate["rows"].as_u64().unwrap() > 0);

    let rerun = ok(&[
        "run",
        "--config",
        config_a.to_str().unwrap(),
        "--stages",
        "generate",
    ]);
    assert_eq!(rerun[0]["hit_rate"], 1.0);
    assert_eq!(rerun[0]["backend_requests"], 0);

    ok(&["run", "--config", config_b.to_str().unwrap()]);
    let report_a = read_dir_sorted(&a.path().join("out/report"));
    let report_b = read_dir_sorted(&b.path().join("out/report"));
    assert!(report_a.iter().any(|(n, _)| n == "deformance_table.csv"));
    assert!(report_a.iter().any(|(n, _)| n.ends_with(".svg")));
    assert_eq!(report_a, report_b);
    for name in [
        "scores.tsv",
        "deformed.tsv",
        "images.imgb",
        "images.imgb.idx",
    ] {
        assert_eq!(
            std::fs::read(a.path().join("out").join(name)).unwrap(),
            std::fs::read(b.path().join("out").join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn generate_without_predecessor_names_the_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    let record = error_record(&cli(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--stages",
        "generate",
    ]));
    assert_eq!(record["stage"], "generate");
    assert_eq!(record["kind"], "missing_input");
    assert!(record["path"].as_str().unwrap().ends_with("deformed.tsv"));
}

#[test]
fn malformed_inputs_report_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "#prompts v1\nnot\ta\tvalid row\n").unwrap();
    let record = error_record(&cli(&[
        "generate",
        "--manifest",
        bad.to_str().unwrap(),
        "--store",
        dir.path().join("s.imgb").to_str().unwrap(),
    ]));
    assert_eq!(record["kind"], "manifest");
    assert!(record["line"].as_u64().is_some());

    let config = dir.path().join("run.toml");
    std::fs::write(&config, "seed = 1\ncolour = \"blue\"\n").unwrap();
    let record = error_record(&cli(&["run", "--config", config.to_str().unwrap()]));
    assert!(record["message"].as_str().unwrap().contains("colour"));
}

/// Runs the stages one subcommand at a time up to `deformed.tsv`.
fn staged_manifest(dir: &Path) -> PathBuf {
    let fx = fixtures();
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let f = |name: &str| fx.join(name).to_string_lossy().into_owned();
    ok(&[
        "ingest-lexicon",
        "--mrc",
        &f("mrc_sample.dct"),
        "--brysbaert",
        &f("brysbaert_sample.tsv"),
        "--out",
        &p("lexicon.tsv"),
    ]);
    ok(&[
        "prepare-prompts",
        "--poems",
        &f("poems.txt"),
        "--captions",
        &f("captions.txt"),
        "--n-captions",
        "10",
        "--seed",
        "5",
        "--out",
        &p("prompts.tsv"),
    ]);
    ok(&[
        "deform",
        "--manifest",
        &p("prompts.tsv"),
        "--lexicon",
        &p("lexicon.tsv"),
        "--kinds",
        "backward,just-nouns",
        "--seed",
        "5",
        "--out",
        &p("deformed.tsv"),
    ]);
    dir.join("deformed.tsv")
}

fn generate(manifest: &Path, store: &Path, backend: &str) -> Output {
    cli(&[
        "generate",
        "--manifest",
        manifest.to_str().unwrap(),
        "--store",
        store.to_str().unwrap(),
        "--backend",
        backend,
        "--dim",
        "32",
        "--n-images",
        "3",
        "--seed",
        "9",
        "--backoff-ms",
        "1",
    ])
}

#[test]
fn subcommands_chain_and_sidecar_backends_match_in_process_mock() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = staged_manifest(dir.path());
    let mock = dir.path().join("mock.imgb");
    assert!(generate(&manifest, &mock, "mock").status.success());

    let stdio = dir.path().join("stdio.imgb");
    let command = format!("stdio:{BIN} mock-sidecar --seed 9 --dim 32");
    let out = generate(&manifest, &stdio, &command);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        std::fs::read(&mock).unwrap(),
        std::fs::read(&stdio).unwrap()
    );

    let mut server = Command::new(BIN)
        .args([
            "mock-sidecar",
            "--seed",
            "9",
            "--dim",
            "32",
            "--listen",
            "127.0.0.1:0",
        ])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut addr = String::new();
    BufReader::new(server.stdout.take().unwrap())
        .read_line(&mut addr)
        .unwrap();
    let tcp = dir.path().join("tcp.imgb");
    let out = generate(&manifest, &tcp, &format!("tcp:{}", addr.trim()));
    server.kill().ok();
    server.wait().ok();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(std::fs::read(&mock).unwrap(), std::fs::read(&tcp).unwrap());

    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let score = ok(&[
        "score",
        "--manifest",
        &p("deformed.tsv"),
        "--store",
        &p("mock.imgb"),
        "--lexicon",
        &p("lexicon.tsv"),
        "--k-nn",
        "4",
        "--out",
        &p("scores.tsv"),
    ]);
    assert_eq!(score[0]["missing"], 0);
    let report = ok(&[
        "report",
        "--scores",
        &p("scores.tsv"),
        "--q",
        "0.2",
        "--no-svg",
        "--aggregation",
        "change-of-means",
        "--out-dir",
        &p("report"),
    ]);
    let written = report[0]["written"].as_array().unwrap();
    assert!(written
        .iter()
        .all(|w| !w.as_str().unwrap().ends_with(".svg")));
    let table = std::fs::read_to_string(dir.path().join("report/deformance_table.csv")).unwrap();
    assert!(table.contains("#aggregation\tchange_of_means"));
}

#[test]
fn echoing_backend_is_a_protocol_violation_not_a_crash() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = staged_manifest(dir.path());
    let store = dir.path().join("cat.imgb");
    let out = generate(&manifest, &store, "stdio:cat");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["rows"], 0);
    assert_eq!(summary["failed"], summary["requested"]);
    let failures = std::fs::read_to_string(dir.path().join("cat.imgb.failures")).unwrap();
    assert!(failures.lines().filter(|l| !l.starts_with('#')).count() > 0);
}

#[test]
fn unreachable_backend_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = staged_manifest(dir.path());
    let record = error_record(&generate(
        &manifest,
        &dir.path().join("x.imgb"),
        "tcp:127.0.0.1:1",
    ));
    assert_eq!(record["kind"], "backend_unavailable");
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn topmine(workdir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topmine"))
        .arg("--workdir")
        .arg(workdir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = match fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect(),
        Err(_) => Vec::new(),
    };
    names.sort();
    names
}

#[test]
fn missing_input_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let res = topmine(&out, &["ingest", "--input", "/nonexistent/titles.txt"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("not found"));
    assert!(listing(&out).is_empty());
}

#[test]
fn bad_config_exits_with_two_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\ninput = \"titles.txt\"\n[model]\ntopics = 0\n").unwrap();
    let out = tmp.path().join("out");
    let res = topmine(&out, &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("input file"), "{err}");
    assert!(err.contains("topics"), "{err}");
    assert!(listing(&out).is_empty());

    fs::write(&cfg, "seed = 1\ninput = \"x\"\nunknown_key = 3\n").unwrap();
    let res = topmine(&out, &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));

    fs::write(&cfg, "input = \"x\"\n").unwrap();
    let res = topmine(&out, &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2), "a seed is required");
}

#[test]
fn run_stops_after_the_requested_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = fixtures().join("pipeline.toml");
    let res = topmine(&out, &["run", "--config", cfg.to_str().unwrap(), "--stage", "mine"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(listing(&out), ["corpus.json", "phrases.tsv"]);
}

#[test]
fn stage_commands_chain_through_the_workdir() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let input = fixtures().join("titles.txt");
    let steps: &[&[&str]] = &[
        &["ingest", "--input", input.to_str().unwrap()],
        &["mine", "--min-support", "2"],
        &["segment", "--threshold", "1"],
        &["train", "--topics", "3", "--iters", "50", "--seed", "4", "--beta", "0.1"],
    ];
    for args in steps {
        let res = topmine(&out, args);
        assert!(res.status.success(), "{args:?}: {}", String::from_utf8_lossy(&res.stderr));
    }
    let res = topmine(&out, &["topics", "--top-n", "4"]);
    assert!(res.status.success());
    let table = String::from_utf8(res.stdout).unwrap();
    assert!(table.contains("Topic 0") && table.contains("Topic 2"), "{table}");
    assert_eq!(
        listing(&out),
        ["corpus.json", "model.json", "phrases.tsv", "segments.jsonl", "topics.tsv", "topics.txt"]
    );

    let res = topmine(&out, &["perplexity", "--folds", "2", "--min-support", "2", "--topics", "3", "--iters", "30", "--seed", "1", "--fold-in-sweeps", "10"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = String::from_utf8(res.stdout).unwrap();
    assert!(csv.starts_with("fold,model,held_out_tokens,log_likelihood,perplexity,bits\n"));
    assert_eq!(csv.lines().count(), 5);
    assert!(out.join("metrics.csv").is_file());
}

#[test]
fn a_stage_without_its_inputs_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let res = topmine(tmp.path(), &["segment"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("corpus.json"));
}

#[test]
fn workdir_can_come_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let input = fixtures().join("titles.txt");
    let res = Command::new(env!("CARGO_BIN_EXE_topmine"))
        .args(["ingest", "--input", input.to_str().unwrap()])
        .env("TOPMINE_WORKDIR", tmp.path())
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(res.status.success());
    assert_eq!(listing(tmp.path()), ["corpus.json"]);
}

#[test]
fn bench_writes_a_runtime_table() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("bench.csv");
    let res = topmine(
        tmp.path(),
        &["bench", "--sizes", "2e3,4e3", "--topics", "3", "--iters", "5", "--seed", "1", "--repeats", "1", "--out", csv.to_str().unwrap()],
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "tokens,docs,mining_seconds,modeling_seconds");
    assert!(lines[1].starts_with("2000,") && lines[2].starts_with("4000,"));

    let res = topmine(tmp.path(), &["bench", "--sizes", "ten", "--seed", "1"]);
    assert_eq!(res.status.code(), Some(2));
}

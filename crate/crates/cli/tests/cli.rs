use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tsc_cli::formats::{read_dataset, to_json, CoresetFile};
use tsc_core::Coreset;

fn tsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsc")).args(args).env("TSC_THREADS", "1").output().expect("spawn tsc")
}

fn ok(args: &[&str]) -> Output {
    let out = tsc(args);
    assert!(out.status.success(), "tsc {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, seed: &str) -> PathBuf {
    ok(&["generate", "--n", "40", "--t", "12", "--k", "2", "--seed", seed, "--out", s(dir)]);
    dir.join("dataset.csv")
}

#[test]
fn missing_seed_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tsc(&["generate", "--n", "5", "--t", "3", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate(a.path(), "11");
    generate(b.path(), "11");
    for name in ["dataset.csv", "truth.json", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let c = tempfile::tempdir().unwrap();
    generate(c.path(), "12");
    assert_ne!(fs::read(a.path().join("dataset.csv")).unwrap(), fs::read(c.path().join("dataset.csv")).unwrap());
}

#[test]
fn identity_coreset_fit_matches_full_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&dir.path().join("gen"), "3");
    let panel = read_dataset(&data).unwrap();
    let identity = dir.path().join("identity.json");
    fs::write(&identity, to_json(&CoresetFile::new(&Coreset::identity(&panel), "identity", 0, None, None)).unwrap())
        .unwrap();
    let full = dir.path().join("full");
    let sub = dir.path().join("sub");
    let common = ["--k", "2", "--n-init", "1", "--max-iters", "30", "--seed", "5"];
    ok(&[&["fit", "--data", s(&data), "--out", s(&full)][..], &common].concat());
    ok(&[&["fit", "--data", s(&data), "--coreset", s(&identity), "--out", s(&sub)][..], &common].concat());
    assert_eq!(fs::read(full.join("params.json")).unwrap(), fs::read(sub.join("params.json")).unwrap());
}

#[test]
fn eval_on_planted_params_is_finite() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&dir.path().join("gen"), "4");
    let truth = dir.path().join("gen/truth.json");
    let out = dir.path().join("eval");
    ok(&["eval", "--data", s(&data), "--params", s(&truth), "--seed", "0", "--out", s(&out)]);
    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(out.join("metrics.json")).unwrap()).unwrap();
    let objective = metrics["objective"].as_f64().expect("objective field");
    assert!(objective.is_finite());
}

#[test]
fn unknown_schema_major_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&dir.path().join("gen"), "5");
    let truth = dir.path().join("gen/truth.json");
    let text = fs::read_to_string(&truth).unwrap().replace("\"schema_version\": \"1.0\"", "\"schema_version\": \"9.0\"");
    assert!(text.contains("9.0"));
    let bumped = dir.path().join("bumped.json");
    fs::write(&bumped, text).unwrap();
    let out = tsc(&["eval", "--data", s(&data), "--params", s(&bumped), "--seed", "0", "--out", s(&dir.path().join("e"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn dangling_coreset_index_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&dir.path().join("gen"), "6");
    let panel = read_dataset(&data).unwrap();
    let mut file = CoresetFile::new(&Coreset::identity(&panel), "identity", 0, None, None);
    file.time_indices[0][0] = 999;
    let bad = dir.path().join("bad.json");
    fs::write(&bad, to_json(&file).unwrap()).unwrap();
    let out = tsc(&["fit", "--data", s(&data), "--coreset", s(&bad), "--k", "2", "--seed", "0", "--out", s(&dir.path().join("f"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn manifest_hashes_inputs_not_paths() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&dir.path().join("gen"), "7");
    let copy = dir.path().join("elsewhere.csv");
    fs::copy(&data, &copy).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let common = ["--m", "10", "--l", "4", "--k", "2", "--seed", "1"];
    ok(&[&["coreset", "--data", s(&data), "--out", s(&a)][..], &common].concat());
    ok(&[&["coreset", "--data", s(&copy), "--out", s(&b)][..], &common].concat());
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["inputs"]["data"].is_string());
}

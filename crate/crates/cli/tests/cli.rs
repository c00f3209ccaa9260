use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn smoothset(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoothset"))
        .args(args)
        .env_remove("SMOOTHSET_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["gen", "--out", p(&out)];
    args.extend_from_slice(extra);
    let o = smoothset(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn gen_then_modulus() {
    let dir = tempfile::tempdir().unwrap();
    let grid = gen(dir.path(), "a.mgr", &["--n", "1", "--K", "12", "--seed", "7"]);
    assert_eq!(fs::read(&grid).unwrap()[..4], *b"MGR1");
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a.mgr.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["schedule"]["levels"], 12);
    assert!(meta["undecidedMass"].is_number());

    let o = smoothset(&["modulus", "--in", p(&grid), "--scales", "2..9"]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["mode", "j", "t", "omega", "pairCount"]);
    assert_eq!(rows.len(), 8);
    let js: Vec<u32> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(js, (2..=9).collect::<Vec<_>>());
}

#[test]
fn halfspace_modulus_is_a_measurement() {
    let dir = tempfile::tempdir().unwrap();
    let grid = gen(dir.path(), "h.mgr", &["--n", "2", "--K", "8", "--fixture", "halfspace"]);
    let o = smoothset(&["modulus", "--in", p(&grid), "--mode", "dyadic", "--scales", "1..6"]);
    assert_eq!(code(&o), 0);
    let (_, rows) = csv_rows(&stdout(&o));
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() == 1.0));
}

#[test]
fn witnesses_written_next_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let grid = gen(dir.path(), "a.mgr", &["--n", "2", "--K", "6", "--seed", "1"]);
    let out = dir.path().join("m.csv");
    assert_eq!(code(&smoothset(&["modulus", "--in", p(&grid), "--out", p(&out)])), 0);
    let w: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m.csv.witness.json")).unwrap()).unwrap();
    assert_eq!(w["witnesses"].as_array().unwrap().len(), 6);
}

#[test]
fn scaffold_on_constant_set() {
    let dir = tempfile::tempdir().unwrap();
    let grid = gen(dir.path(), "c.mgr", &["--n", "1", "--K", "8", "--fixture", "constant"]);
    let o = smoothset(&["scaffold", "--in", p(&grid), "--alpha", "0.5", "--maxgen", "4"]);
    assert_eq!(code(&o), 0);
    let s: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["generations", "perGenP", "perGenC", "dimBound", "undecided"] {
        assert!(s.get(key).is_some(), "{key}");
    }
    assert_eq!(s["noOscillation"], true);
    assert_eq!(s["generations"][0][0]["density"], 0.5);
}

#[test]
fn scaffold_without_start_level_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let grid = gen(dir.path(), "a.mgr", &["--n", "1", "--K", "12", "--seed", "7"]);
    let o = smoothset(&["scaffold", "--in", p(&grid), "--alpha", "0.5", "--maxgen", "4"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no admissible start level"));
}

#[test]
fn exit_codes() {
    assert_eq!(code(&smoothset(&["bogus"])), 64);
    assert_eq!(code(&smoothset(&[])), 64);
    assert_eq!(code(&smoothset(&["modulus", "--in", "/nonexistent/a.mgr"])), 2);
    assert_eq!(code(&smoothset(&["modulus"])), 2);
    assert_eq!(code(&smoothset(&["modulus", "--scales", "9..2", "--in", "x"])), 2);
    assert_eq!(code(&smoothset(&["--help"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let grid = gen(dir.path(), "a.mgr", &["--n", "2", "--K", "6"]);
    assert_eq!(code(&smoothset(&["transform", "--in", p(&grid), "--check", "nothing"])), 2);
    assert_eq!(code(&smoothset(&["modulus", "--in", p(&grid), "--mode", "spiral"])), 2);
    let bad = dir.path().join("bad.mgr");
    fs::write(&bad, b"MGR0 not a grid").unwrap();
    assert_eq!(code(&smoothset(&["modulus", "--in", p(&bad)])), 2);
}

#[test]
fn failed_check_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let grid = gen(dir.path(), "h.mgr", &["--n", "2", "--K", "8", "--fixture", "halfspace"]);
    let o = smoothset(&["transform", "--in", p(&grid), "--check", "image", "--samples", "256"]);
    assert_eq!(code(&o), 3);
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["check", "scale", "measured", "bound", "stderr", "pass"]);
    assert_eq!(rows.len(), 15);
}

#[test]
fn transform_checks_pass_on_martingale_set() {
    let dir = tempfile::tempdir().unwrap();
    let grid = gen(dir.path(), "a.mgr", &["--n", "2", "--K", "9", "--seed", "3"]);
    for check in ["dilation", "lemma3a", "lemma3b"] {
        let o = smoothset(&["transform", "--in", p(&grid), "--check", check, "--scales", "3..5"]);
        assert_eq!(code(&o), 0, "{check}: {}", String::from_utf8_lossy(&o.stderr));
        let (_, rows) = csv_rows(&stdout(&o));
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r[5] == "true"), "{check}");
    }
    let o = smoothset(&["transform", "--in", p(&grid), "--check", "rotation", "--scales", "3..4", "--samples", "128"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn config_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let grid = gen(dir.path(), "a.mgr", &["--n", "1", "--K", "10", "--seed", "2"]);
    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"scales": "2..4", "mode": "dyadic"}"#).unwrap();
    let o = smoothset(&["modulus", "--in", p(&grid), "--scales", "1..9", "--config", p(&config)]);
    assert_eq!(code(&o), 0);
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[0] == "dyadic"));

    fs::write(&config, r#"{"scales": "2..4", "colour": "blue"}"#).unwrap();
    assert_eq!(code(&smoothset(&["modulus", "--in", p(&grid), "--config", p(&config)])), 2);
    fs::write(&config, "[1, 2]").unwrap();
    assert_eq!(code(&smoothset(&["modulus", "--in", p(&grid), "--config", p(&config)])), 2);

    let fixture_config = dir.path().join("f.json");
    fs::write(&fixture_config, r#"{"fixture": {"name": "constant", "d": 0.25}, "K": 4}"#).unwrap();
    let out = dir.path().join("f.mgr");
    let o = smoothset(&["gen", "--out", p(&out), "--config", p(&fixture_config)]);
    assert_eq!(code(&o), 0);
    let o = smoothset(&["modulus", "--in", p(&out)]);
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[3] == "0.0"));
}

#[test]
fn outputs_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let grid = dir.path().join(format!("a{workers}.mgr"));
        let run = |args: &[&str]| {
            Command::new(env!("CARGO_BIN_EXE_smoothset"))
                .args(args)
                .env("SMOOTHSET_WORKERS", workers)
                .output()
                .unwrap()
        };
        assert_eq!(code(&run(&["gen", "--n", "2", "--K", "8", "--seed", "5", "--out", p(&grid)])), 0);
        let m = run(&["modulus", "--in", p(&grid)]);
        let t = run(&["transform", "--in", p(&grid), "--check", "image", "--scales", "3..4", "--samples", "256"]);
        outputs.push((fs::read(&grid).unwrap(), m.stdout, t.stdout));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn boxdim_and_eset() {
    let dir = tempfile::tempdir().unwrap();
    let grid = gen(dir.path(), "a.mgr", &["--n", "1", "--K", "12", "--seed", "7"]);
    let out = dir.path().join("b.csv");
    let o = smoothset(&["boxdim", "--in", p(&grid), "--band", "0.25,0.75", "--scales", "4..10", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv_rows(&fs::read_to_string(&out).unwrap());
    assert_eq!(header, ["j", "count", "logCount"]);
    assert_eq!(rows.len(), 7);
    for r in &rows {
        let count: f64 = r[1].parse().unwrap();
        assert!((r[2].parse::<f64>().unwrap() - count.log2()).abs() < 1e-12);
    }
    let fit: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("b.csv.json")).unwrap()).unwrap();
    assert!(fit["fit"]["slope"].as_f64().unwrap() > 0.5);

    let o = smoothset(&["eset", "--in", p(&grid), "--alpha", "0.5", "--tau", "0.2"]);
    assert_eq!(code(&o), 0);
    let e: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(e["boxCounts"].as_array().unwrap().len(), 13);
}

#[test]
fn report_manifest_hashes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = smoothset(&["report", "--n", "1", "--K", "12", "--seed", "4", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    let mut listed: Vec<String> = files.iter().map(|f| f["path"].as_str().unwrap().to_string()).collect();
    for f in files {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    let mut on_disk: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    listed.sort();
    on_disk.sort();
    assert_eq!(listed, on_disk);
    assert_eq!(manifest["config"]["seed"], 4);
    let steps = manifest["steps"].as_array().unwrap();
    assert!(steps.iter().all(|s| s["seconds"].is_number()));
    let scaffold = steps.iter().find(|s| s["name"] == "scaffold").unwrap();
    assert!(scaffold["status"].as_str().unwrap().starts_with("skipped: no admissible start level"));

    let again = dir.path().join("again");
    let o = smoothset(&["report", "--n", "1", "--K", "12", "--seed", "4", "--out", p(&again)]);
    assert_eq!(code(&o), 0);
    for f in files {
        let name = f["path"].as_str().unwrap();
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(again.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn report_records_check_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = smoothset(&["report", "--n", "2", "--K", "8", "--seed", "4", "--samples", "256", "--out", p(&out)]);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let steps = manifest["steps"].as_array().unwrap();
    let names: Vec<&str> = steps.iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["gen", "modulus", "scaffold", "eset", "boxdim", "dilation", "lemma3a", "image"]);
    let failed = steps.iter().any(|s| s["status"].as_str().unwrap().starts_with("check failed"));
    assert_eq!(code(&o), if failed { 3 } else { 0 });
    for name in ["dilation", "lemma3a"] {
        let step = steps.iter().find(|s| s["name"] == name).unwrap();
        assert_eq!(step["status"], "ok", "{name}");
    }
}

//! End-to-end runs of the `deid-audit` binary on a tiny configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deid_audit_cli::manifest::{Manifest, StageStatus};
use tempfile::TempDir;

const TINY: &str = r#"
seed = 3
synth_reports = 16
dict_surnames = 80
dict_male = 60
dict_female = 60
embedding_dim = 8
char_dim = 4
char_hidden = 4
token_hidden = 8
epochs_crf = 3
epochs_no_crf = 3
num_shadow = 4
shadow_epochs = 2
brute_dict_size = 20
attack_epochs = 5
kde_grid = 20
"#;

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, format!("{TINY}{extra}")).unwrap();
    path
}

fn deid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deid-audit")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn run_ok(args: &[&str]) {
    let out = deid(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Every bundle file except the manifest, keyed by relative path.
fn bundle(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                if rel != "manifest.json" {
                    files.insert(rel, fs::read(&p).unwrap());
                }
            }
        }
    }
    files
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn all_is_deterministic_and_resumable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        run_ok(&["--config", path_str(&cfg), "--out", path_str(out), "all"]);
    }
    let (fa, fb) = (bundle(&a), bundle(&b));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(v == &fb[k], "{k} differs between runs");
    }
    for required in [
        "corpus.conll",
        "model_nocrf.json",
        "model_crf.json",
        "metrics.json",
        "ks_table.csv",
        "cutoff.json",
        "brute.json",
        "mia_report.json",
        "report.md",
        "variants/SNGN2.plan",
        "curves/crf_SN2_kde.csv",
    ] {
        assert!(fa.contains_key(required), "missing {required}");
    }

    let m = Manifest::read(&a).unwrap();
    assert_eq!(m.master_seed, 3);
    assert_eq!(m.stages.len(), 9);
    assert!(m.stages.iter().all(|s| s.status == StageStatus::Done));
    for art in &m.artifacts {
        let (sha, bytes) = deid_audit_cli::manifest::sha256_file(&a.join(&art.path)).unwrap();
        assert_eq!((sha.as_str(), bytes), (art.sha256.as_str(), art.bytes), "{}", art.path);
    }

    run_ok(&["--config", path_str(&cfg), "--out", path_str(&a)]);
    let m2 = Manifest::read(&a).unwrap();
    assert!(m2.stages.iter().all(|s| s.status == StageStatus::Resumed));
    assert_eq!(m2.artifacts, m.artifacts);
    assert_eq!(bundle(&a), fa);
}

#[test]
fn missing_dictionary_fails_before_compute() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "surnames_path = \"absent.txt\"\nmale_path = \"m.txt\"\nfemale_path = \"f.txt\"\n");
    let out = tmp.path().join("out");
    let r = deid(&["--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("surnames_path"));
    assert!(!out.exists());
}

#[test]
fn unknown_stage_and_bad_config_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(deid(&["--out", path_str(&out), "everything"]).status.code(), Some(2));
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "sede = 1\n").unwrap();
    assert_eq!(deid(&["--config", path_str(&bad), "--out", path_str(&out)]).status.code(), Some(2));
}

#[test]
fn single_stage_runs_only_its_prerequisites() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("out");
    run_ok(&["--config", path_str(&cfg), "--out", path_str(&out), "--stage", "perturb"]);
    let names: Vec<String> = Manifest::read(&out).unwrap().stages.into_iter().map(|s| s.name).collect();
    assert_eq!(names, ["gen-corpus", "perturb"]);
    assert!(out.join("variants/SN1.conll").is_file());
    assert!(!out.join("model_crf.json").exists());
}

#[test]
fn corrupt_model_is_a_stage_failure() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "crf = \"off\"\n");
    let out = tmp.path().join("out");
    run_ok(&["--config", path_str(&cfg), "--out", path_str(&out), "train"]);
    let model = out.join("model_nocrf.json");
    let bytes = fs::read(&model).unwrap();
    fs::write(&model, &bytes[..bytes.len() / 2]).unwrap();
    let r = deid(&["--config", path_str(&cfg), "--out", path_str(&out), "extract"]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("stage extract failed"));
    let m = Manifest::read(&out).unwrap();
    let entry = m.stages.iter().find(|s| s.name == "extract").unwrap();
    assert_eq!(entry.status, StageStatus::Failed);
    assert!(entry.error.as_deref().unwrap().contains("corrupt"));
}

#[test]
fn flags_override_the_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("out");
    run_ok(&["--config", path_str(&cfg), "--out", path_str(&out), "--seed", "11", "--crf", "off", "--overfit-dial", "4", "ks"]);
    let m = Manifest::read(&out).unwrap();
    assert_eq!(m.master_seed, 11);
    assert!(m.config.contains("overfit_dial = 4"));
    assert!(!out.join("model_crf.json").exists());
    let table = fs::read_to_string(out.join("ks_table.csv")).unwrap();
    assert!(table.lines().skip(1).all(|l| l.ends_with(",NA,NA")), "{table}");
    let stats: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("corpus_stats.json")).unwrap()).unwrap();
    assert!(stats["reports"]["train"].as_u64().unwrap() > 4);
}

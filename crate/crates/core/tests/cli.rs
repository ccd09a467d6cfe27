mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::synth;
use moodnet::cli::{featurize, write_raw_manifest, FeaturizeOptions, RawRecord, CACHE_ENV, FAILURES_FILE};
use moodnet::tensor::peek_shape;
use moodnet::train::{DatasetManifest, MoodCluster, Split};

fn moodnet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moodnet"))
        .args(args)
        .current_dir(cwd)
        .env_remove(CACHE_ENV)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn subset(dir: &Path, n: usize) -> synth::Corpus {
    let mut corpus = synth::write_corpus(dir, 1, 3);
    corpus.records.truncate(n);
    write_raw_manifest(&corpus.raw_manifest, &corpus.records).unwrap();
    corpus
}

const PATHS: &str = r#"embeddings = "raw/embeddings.txt"
raw_manifest = "raw/raw.jsonl"
cache_dir = "cache"
checkpoint_dir = "ckpt""#;

#[test]
fn featurize_three_clips_then_rerun_is_noop() {
    let dir = tempfile::tempdir().unwrap();
    subset(&dir.path().join("raw"), 3);
    fs::write(dir.path().join("run.toml"), synth::run_config_toml(&["audio", "lyrics"], 3, 0, 1, PATHS)).unwrap();

    let out = moodnet(&["featurize", "--config", "run.toml"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("6 files written"), "{}", stdout(&out));
    let cache = dir.path().join("cache");
    let feats: Vec<_> = fs::read_dir(&cache)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".mnt"))
        .collect();
    assert_eq!(feats.len(), 6);
    let manifest = DatasetManifest::load(&cache.join("features.jsonl")).unwrap();
    assert_eq!(manifest.records.len(), 3);
    assert_eq!(peek_shape(&cache.join("song000.mel.mnt")).unwrap(), vec![96, 1366, 1]);
    assert_eq!(
        peek_shape(&cache.join("song000.lyr.mnt")).unwrap(),
        vec![manifest.grid.lines, manifest.grid.words, 100]
    );

    let mtimes = |names: &[String]| -> Vec<_> {
        names.iter().map(|n| fs::metadata(cache.join(n)).unwrap().modified().unwrap()).collect()
    };
    let mut all = feats.clone();
    all.push("features.jsonl".into());
    let before = mtimes(&all);
    std::thread::sleep(std::time::Duration::from_millis(20));
    let again = moodnet(&["featurize", "--config", "run.toml"], dir.path());
    assert!(again.status.success());
    assert!(stdout(&again).contains("0 files written, 3 up to date"), "{}", stdout(&again));
    assert_eq!(mtimes(&all), before);

    // touching an input invalidates just that clip
    let lyr = dir.path().join("raw/song001.txt");
    let text = fs::read_to_string(&lyr).unwrap();
    fs::write(&lyr, format!("{text}the\n")).unwrap();
    let third = moodnet(&["featurize", "--config", "run.toml"], dir.path());
    assert!(stdout(&third).contains("2 files written, 2 up to date"), "{}", stdout(&third));
}

#[test]
fn corpus_grid_is_max_over_songs() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let corpus = subset(&raw, 2);
    let line = "the the the";
    fs::write(raw.join("song000.txt"), [line; 7].join("\n")).unwrap();
    fs::write(raw.join("song001.txt"), [line; 20].join("\n")).unwrap();
    let s = featurize(&FeaturizeOptions {
        raw_manifest: corpus.raw_manifest,
        embeddings: corpus.embeddings,
        out_dir: dir.path().join("out"),
        grid: None,
    })
    .unwrap();
    assert_eq!(s.grid.lines, 20);
    let header = fs::read_to_string(&s.manifest_path).unwrap();
    assert!(header.starts_with(r#"{"lines_max":20,"words_max":4}"#), "{header}");
}

#[test]
fn failures_are_reported_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let mut corpus = subset(&raw, 2);
    corpus.records.push(RawRecord {
        clip_id: "broken".into(),
        audio: "missing.wav".into(),
        lyrics: "song000.txt".into(),
        label: MoodCluster::IV,
        split: Split::Train,
    });
    fs::write(raw.join("garbage.wav"), b"not a wav").unwrap();
    corpus.records.push(RawRecord {
        clip_id: "garbage".into(),
        audio: "garbage.wav".into(),
        lyrics: "song000.txt".into(),
        label: MoodCluster::I,
        split: Split::Train,
    });
    write_raw_manifest(&corpus.raw_manifest, &corpus.records).unwrap();
    fs::write(dir.path().join("run.toml"), synth::run_config_toml(&["audio"], 3, 0, 1, PATHS)).unwrap();

    let out = moodnet(&["featurize", "--config", "run.toml", "--out", "elsewhere"], dir.path());
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("2 record(s) failed") && err.contains("broken") && err.contains("garbage"), "{err}");
    let report = fs::read_to_string(dir.path().join("elsewhere").join(FAILURES_FILE)).unwrap();
    assert!(report.contains("broken"));
    let manifest = DatasetManifest::load(&dir.path().join("elsewhere/features.jsonl")).unwrap();
    assert_eq!(manifest.records.len(), 2);
}

#[test]
fn cache_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    subset(&dir.path().join("raw"), 1);
    fs::write(dir.path().join("run.toml"), synth::run_config_toml(&["audio"], 3, 0, 1, PATHS)).unwrap();
    let env_cache = dir.path().join("env_cache");
    let out = Command::new(env!("CARGO_BIN_EXE_moodnet"))
        .args(["featurize", "--config", "run.toml"])
        .current_dir(dir.path())
        .env(CACHE_ENV, &env_cache)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(env_cache.join("features.jsonl").is_file());
    assert!(!dir.path().join("cache").exists());
}

#[test]
fn train_eval_inspect_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    synth::write_corpus(&dir.path().join("raw"), 2, 4);
    fs::write(dir.path().join("run.toml"), synth::run_config_toml(&["audio", "lyrics"], 3, 2, 1, PATHS)).unwrap();
    assert!(moodnet(&["featurize", "--config", "run.toml"], dir.path()).status.success());

    let tr = moodnet(&["train", "--config", "run.toml"], dir.path());
    assert!(tr.status.success(), "{}", stderr(&tr));
    assert!(stdout(&tr).contains("epoch    1"), "{}", stdout(&tr));
    let log = fs::read_to_string(dir.path().join("ckpt/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);

    let ev = moodnet(&["eval", "--config", "run.toml", "--out", "report"], dir.path());
    assert!(ev.status.success(), "{}", stderr(&ev));
    let text = stdout(&ev);
    assert!(text.contains("macro F1"), "{text}");
    let json_start = text.find('{').unwrap();
    let json: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    assert_eq!(json["samples"], 10);
    let f1 = json["macro_f1"].as_f64().unwrap();
    assert_eq!(format!("{f1:.2}").parse::<f64>().unwrap(), f1);
    assert!(dir.path().join("report/eval_report.json").is_file());

    let val = moodnet(&["eval", "--config", "run.toml", "--split", "val"], dir.path());
    let text = stdout(&val);
    let json: serde_json::Value = serde_json::from_str(&text[text.find('{').unwrap()..]).unwrap();
    assert_eq!(json["samples"], 0);

    let ins = moodnet(&["inspect", "--checkpoint", "ckpt"], dir.path());
    assert!(ins.status.success(), "{}", stderr(&ins));
    let listing = stdout(&ins);
    assert!(listing.contains("epoch 2"), "{listing}");
    assert!(listing.contains("head.out.weight"));
    assert!(listing.contains("total parameters:"));
}

#[test]
fn eval_rejects_mismatched_config() {
    let dir = tempfile::tempdir().unwrap();
    synth::write_corpus(&dir.path().join("raw"), 1, 5);
    fs::write(dir.path().join("run.toml"), synth::run_config_toml(&["audio"], 3, 0, 1, PATHS)).unwrap();
    fs::write(dir.path().join("other.toml"), synth::run_config_toml(&["audio"], 4, 0, 1, PATHS)).unwrap();
    assert!(moodnet(&["featurize", "--config", "run.toml"], dir.path()).status.success());
    let tr = moodnet(&["train", "--config", "run.toml"], dir.path());
    assert!(tr.status.success(), "{}", stderr(&tr));
    assert!(dir.path().join("ckpt/checkpoint.json").is_file());

    let ev = moodnet(&["eval", "--config", "other.toml"], dir.path());
    assert!(!ev.status.success());
    assert!(stderr(&ev).contains("depth: config 4 vs checkpoint 3"), "{}", stderr(&ev));
}

#[test]
fn bad_config_and_missing_checkpoint_fail_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let text = synth::run_config_toml(&["audio"], 3, 0, 1, PATHS).replace("[optim]", "[optim]\nmomentum = 0.9");
    fs::write(dir.path().join("run.toml"), text).unwrap();
    let out = moodnet(&["train", "--config", "run.toml"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("momentum"), "{}", stderr(&out));

    let out = moodnet(&["inspect", "--checkpoint", "nowhere"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("checkpoint.json"));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use matt_core::dsp::{all_feature_set_names, AudioSignal};
use matt_core::formats::write_wav;

fn matt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matt"))
        .args(args)
        .env("MATT_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = matt(args);
    assert!(
        out.status.success(),
        "matt {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tone(freq: f64, seconds: f64) -> AudioSignal {
    let rate = 44_100;
    let n = (seconds * rate as f64) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            (0.5 * (2.0 * std::f64::consts::PI * freq * t).sin() + 0.05 * (7.0 * t).sin()) as f32
        })
        .collect();
    AudioSignal::new(samples, rate).unwrap()
}

fn small_synth(dir: &Path, seed: &str) {
    ok(&[
        "gen-synth", "--out", p(dir), "--seed", seed, "--genres", "5", "--head-count", "30", "--dim", "6",
        "--val-bags", "4", "--test-bags", "10",
    ]);
}

#[test]
fn extract_features_writes_one_row_per_track_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let audio = dir.path().join("audio");
    fs::create_dir(&audio).unwrap();
    write_wav(&audio.join("a.wav"), &tone(440.0, 2.0)).unwrap();
    write_wav(&audio.join("b.wav"), &tone(261.6, 1.5)).unwrap();
    let features = dir.path().join("features");
    ok(&["extract-features", "--audio-dir", p(&audio), "--feature-dir", p(&features), "--workers", "2"]);

    let mut first = Vec::new();
    for name in all_feature_set_names() {
        let text = fs::read_to_string(features.join(format!("{name}.csv"))).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 2, "{name}");
        assert!(rows[0].starts_with("a,") && rows[1].starts_with("b,"));
        first.push(text);
    }
    assert_eq!(fs::read_to_string(features.join("1to9.csv")).unwrap().lines().next().unwrap().split(',').count(), 519);
    assert!(features.join("mel").join("a.mel").exists());

    ok(&["extract-features", "--audio-dir", p(&audio), "--feature-dir", p(&features)]);
    for (name, before) in all_feature_set_names().iter().zip(&first) {
        assert_eq!(&fs::read_to_string(features.join(format!("{name}.csv"))).unwrap(), before);
    }
}

#[test]
fn extract_features_reports_a_corrupt_track_as_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let audio = dir.path().join("audio");
    fs::create_dir(&audio).unwrap();
    write_wav(&audio.join("ok.wav"), &tone(440.0, 1.0)).unwrap();
    fs::write(audio.join("broken.wav"), b"RIFF not really").unwrap();
    let features = dir.path().join("features");
    let out = matt(&["extract-features", "--audio-dir", p(&audio), "--feature-dir", p(&features)]);
    assert_eq!(out.status.code(), Some(2));
    let text = fs::read_to_string(features.join("mfcc.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn gen_synth_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    small_synth(&a, "7");
    small_synth(&b, "7");
    small_synth(&c, "8");
    for file in ["metadata.csv", "synth.csv", "oracle.csv"] {
        let first = fs::read(a.join(file)).unwrap();
        assert_eq!(first, fs::read(b.join(file)).unwrap(), "{file}");
        if file != "metadata.csv" {
            assert_ne!(first, fs::read(c.join(file)).unwrap(), "{file}");
        }
    }
}

#[test]
fn help_lists_every_flag() {
    let expected: &[(&str, &[&str])] = &[
        (
            "extract-features",
            &["--audio-dir", "--metadata", "--feature-dir", "--workers", "--sample-rate", "--n-fft", "--hop",
              "--n-mels", "--mel-frames", "--force", "--config"],
        ),
        ("build-bags", &["--metadata", "--label-policy", "--out", "--config"]),
        (
            "gen-synth",
            &["--out", "--seed", "--genres", "--zipf", "--head-count", "--bag-size-min", "--bag-size-max", "--dim",
              "--separation", "--noise-rate", "--val-bags", "--test-bags"],
        ),
        (
            "train",
            &["--metadata", "--feature-dir", "--feature-set", "--label-policy", "--checkpoint-dir", "--aggregator",
              "--hidden", "--embedding-dim", "--epochs", "--batch-size", "--optimizer", "--learning-rate",
              "--patience", "--class-reweighting", "--segment-level", "--seed"],
        ),
        ("evaluate", &["--report-dir", "--mode", "--oracle", "--subsets", "--ks", "--checkpoint-dir"]),
        ("predict", &["--mode", "--split", "--out", "--checkpoint-dir"]),
        (
            "grad-check",
            &["--seed", "--input-dim", "--hidden", "--embedding-dim", "--genres", "--bag-sizes", "--aggregator",
              "--tolerance"],
        ),
    ];
    let top = ok(&["--help"]);
    for (cmd, flags) in expected {
        assert!(top.contains(cmd), "{cmd} missing from top-level help");
        let help = ok(&[cmd, "--help"]);
        for flag in *flags {
            assert!(help.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}

#[test]
fn exit_codes_distinguish_usage_validation_and_runtime_errors() {
    assert_eq!(matt(&["--help"]).status.code(), Some(0));
    assert_eq!(matt(&["frobnicate"]).status.code(), Some(1));
    let bad_flag = matt(&["train", "--no-such-flag"]);
    assert_eq!(bad_flag.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_flag.stderr).contains("Usage"));
    assert_eq!(matt(&["train", "--metadata", "/definitely/missing.csv"]).status.code(), Some(1));
    assert_eq!(matt(&["grad-check", "--aggregator", "max"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "1");
    let ckpt = dir.path().join("ckpt");
    let meta = dir.path().join("metadata.csv");
    ok(&["train", "--metadata", p(&meta), "--feature-dir", p(dir.path()), "--feature-set", "synth",
         "--checkpoint-dir", p(&ckpt), "--epochs", "1"]);
    fs::write(ckpt.join("model.matt"), b"MATT garbage").unwrap();
    let out = matt(&["evaluate", "--metadata", p(&meta), "--feature-dir", p(dir.path()), "--checkpoint-dir",
                     p(&ckpt), "--report-dir", p(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(2));

    let config = dir.path().join("bad.toml");
    fs::write(&config, "[train]\nepoch = 3\n").unwrap();
    assert_eq!(matt(&["--config", p(&config), "grad-check"]).status.code(), Some(1));
}

#[test]
fn train_at_bag_level_then_evaluate_per_segment() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "3");
    let meta = dir.path().join("metadata.csv");
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "seed = 5\n[paths]\nmetadata = \"{}\"\nfeature_dir = \"{}\"\ncheckpoint_dir = \"{}\"\nreport_dir = \"{}\"\n\
             [features]\nset = \"synth\"\n[model]\naggregator = \"matt\"\nembedding_dim = 6\n[train]\nepochs = 3\n",
            p(&meta),
            p(dir.path()),
            p(&dir.path().join("ckpt")),
            p(&dir.path().join("report")),
        ),
    )
    .unwrap();
    let c = p(&config);
    ok(&["--config", c, "train", "--aggregator", "matt", "--epochs", "4"]);
    let log = fs::read_to_string(dir.path().join("ckpt/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 5, "flag overrides the config's epoch count");
    let checkpoint = fs::read(dir.path().join("ckpt/model.matt")).unwrap();

    let report = ok(&["--config", c, "evaluate", "--mode", "segment", "--oracle", p(&dir.path().join("oracle.csv"))]);
    assert!(report.contains("mode: segment"));
    let topk = fs::read_to_string(dir.path().join("report/topk.csv")).unwrap();
    assert!(topk.starts_with("subset,K,accuracy\n"));
    assert!(dir.path().join("report/oracle/pr.csv").exists());

    let segments = meta_rows(&meta, "test");
    let predictions = ok(&["--config", c, "predict", "--mode", "segment"]);
    assert_eq!(predictions.lines().count(), segments + 1);
    let row: Vec<&str> = predictions.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row.len(), 5);
    assert_eq!(row[3].split(',').count(), 5);
    assert_eq!(row[4], "1.000000");

    ok(&["--config", c, "train", "--aggregator", "matt", "--epochs", "4"]);
    assert_eq!(fs::read(dir.path().join("ckpt/model.matt")).unwrap(), checkpoint);
}

fn meta_rows(path: &Path, split: &str) -> usize {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| l.ends_with(&format!(",{split}")))
        .count()
}

#[test]
fn build_bags_groups_by_artist_and_album() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("m.csv");
    fs::write(
        &meta,
        "track_id,album_id,artist_id,genre,split\n\
         t1,al1,ar1,rock,train\nt2,al1,ar1,rock,train\nt3,,ar1,jazz,train\nt4,al1,ar1,rock,test\n",
    )
    .unwrap();
    let out = ok(&["build-bags", "--metadata", p(&meta)]);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "artist_id,album_id,split,genre,size,segments");
    assert_eq!(rows.len(), 4);
    assert!(rows.contains(&"ar1,al1,train,rock,2,t1;t2"));
    assert!(rows.contains(&"ar1,,train,jazz,1,t3"));
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::SystemTime;

use tempfile::TempDir;

const MID_HEADER: &str =
    "song_id,melodiousness,articulation,rhythmic_stability,rhythmic_complexity,dissonance,tonal_stability,minorness";
const EMO_HEADER: &str = "song_id,valence,energy,tension,anger,fear,happy,sad,tender";

const CONFIG: &str = r#"
output_dir = "out"
runs = 2
test_ratio = 0.25
plus_test_ratio = 0.25

[data]
audio_dirs = ["audio"]
emotion = "emotion.csv"
midlevel = "midlevel.csv"

[spectrogram]
sample_rate = 8000
frame_size = 256
hop = 128
n_bands = 16
n_frames = 12
crop_seconds = 0.2
fmin = 50.0
fmax = 4000.0

[trunk]
widths = [2, 2, 3, 3, 4]
pool_after = [2, 4]
embedding_dim = 4
dropout = 0.0

[training]
batch_size = 4
patience = 2
max_epochs = 3
validation_fraction = 0.2
"#;

/// Sixteen soundtrack songs with both annotations and four corpus-only songs.
fn project() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::create_dir(root.join("audio")).unwrap();
    let mut mid = vec![MID_HEADER.to_string()];
    let mut emo = vec![EMO_HEADER.to_string()];
    let ids: Vec<String> = (0..16).map(|i| format!("s{i:02}")).chain((0..4).map(|i| format!("c{i:02}"))).collect();
    for (k, id) in ids.iter().enumerate() {
        write_tone(&root.join("audio").join(format!("{id}.wav")), 110.0 * (1.0 + k as f64 * 0.37), k);
        let m: Vec<f64> = (0..7).map(|j| 1.0 + 9.0 * noise(k, j)).collect();
        mid.push(format!("{id},{}", join(&m)));
        if id.starts_with('s') {
            let e: Vec<f64> =
                (0..8).map(|j| 1.0 + 0.4 * m[j % 7] + 1.5 * noise(k, j + 7)).collect();
            emo.push(format!("{id},{}", join(&e)));
        }
    }
    fs::write(root.join("midlevel.csv"), mid.join("\n") + "\n").unwrap();
    fs::write(root.join("emotion.csv"), emo.join("\n") + "\n").unwrap();
    fs::write(root.join("xemo.toml"), CONFIG).unwrap();
    dir
}

/// Deterministic values in [0, 1).
fn noise(k: usize, j: usize) -> f64 {
    let v = ((k as f64) * 12.9898 + (j as f64) * 78.233).sin() * 43758.5453;
    v - v.floor()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(",")
}

fn write_tone(path: &Path, freq: f64, k: usize) {
    let spec = hound::WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for n in 0..8000 {
        let t = n as f64 / 8000.0;
        let s = 0.4 * (2.0 * std::f64::consts::PI * freq * t).sin()
            + 0.2 * (2.0 * std::f64::consts::PI * freq * (2 + k % 3) as f64 * t).sin();
        w.write_sample((s * 20000.0) as i16).unwrap();
    }
    w.finalize().unwrap();
}

fn xemo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xemo")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = xemo(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str], code: i32) -> String {
    let out = xemo(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stderr).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, (Vec<u8>, SystemTime)> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let mtime = fs::metadata(&p).unwrap().modified().unwrap();
                out.insert(p.clone(), (fs::read(&p).unwrap(), mtime));
            }
        }
    }
    out
}

#[test]
fn prepare_is_idempotent_and_rebuilds_corrupt_cache_entries() {
    let p = project();
    let first = ok(p.path(), &["prepare"]);
    assert!(first.contains("prepared 20 songs: 20 spectrograms computed"), "{first}");
    let out = p.path().join("out");
    for key in ["a2e", "a2mid2e", "joint", "a2mid", "a2mid-plus", "mid2e"] {
        assert!(out.join("splits").join(format!("{key}.json")).exists(), "{key}");
    }
    let before = snapshot(&out);
    let second = ok(p.path(), &["prepare"]);
    assert!(second.contains("0 spectrograms computed, 20 up to date"), "{second}");
    assert_eq!(snapshot(&out), before);

    let spec = out.join("cache").join("s03.spec");
    let mut bytes = fs::read(&spec).unwrap();
    let n = bytes.len();
    bytes[n - 1] ^= 0xff;
    fs::write(&spec, &bytes).unwrap();
    let third = ok(p.path(), &["prepare"]);
    assert!(third.contains("1 spectrograms computed, 19 up to date"), "{third}");
    assert_eq!(fs::read(&spec).unwrap(), before[&spec].0);
}

#[test]
fn unannotated_audio_is_reported_with_exit_code_2() {
    let p = project();
    write_tone(&p.path().join("audio").join("stray.wav"), 300.0, 0);
    let err = fails(p.path(), &["prepare"], 2);
    assert!(err.contains("stray"), "{err}");
    let report = fs::read_to_string(p.path().join("out/cache/validation_report.txt")).unwrap();
    assert!(report.contains("audio without annotation: stray"), "{report}");
}

#[test]
fn usage_errors_exit_with_1() {
    let p = project();
    let err = fails(p.path(), &["train", "--scheme", "a3e"], 1);
    assert!(err.contains("a2mid-plus"), "{err}");
    fails(p.path(), &["prepare", "--set", "nokey"], 1);
    assert_eq!(xemo(p.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_config_values_exit_with_2() {
    let p = project();
    let err = fails(p.path(), &["prepare", "--set", "training.learning_rate=0.1"], 2);
    assert!(err.contains("learning_rate"), "{err}");
    fails(p.path(), &["prepare", "--set", "test_ratio=1.5"], 2);
}

#[test]
fn train_eval_explain_and_report() {
    let p = project();
    let dir = p.path();
    ok(dir, &["prepare"]);

    let mid2e = ok(dir, &["train", "--scheme", "mid2e"]);
    assert!(mid2e.contains("Mid2E,"), "{mid2e}");
    let joint = ok(dir, &["train", "--scheme", "joint", "--runs", "1"]);
    assert!(joint.contains("A2Mid2E-Joint,"), "{joint}");
    let results = dir.join("out/results");
    let csv = fs::read(results.join("joint.csv")).unwrap();
    assert!(results.join("joint/run00.json").exists());
    ok(dir, &["train", "--scheme", "joint", "--runs", "1"]);
    assert_eq!(fs::read(results.join("joint.csv")).unwrap(), csv, "retraining is not reproducible");
    ok(dir, &["train", "--scheme", "a2e", "--runs", "1"]);

    let report = ok(dir, &["report"]);
    assert!(report.contains("CoE_A2Mid2E-Joint,"), "{report}");
    assert!(results.join("table_emotion.csv").exists());

    let ckpt = dir.join("out/checkpoints/joint_run00.ckpt");
    let ckpt = ckpt.to_str().unwrap();
    let eval = ok(dir, &["eval", "--checkpoint", ckpt]);
    assert!(eval.contains("A2Mid2E-Joint,"), "{eval}");
    assert!(results.join("eval_joint_run00.csv").exists());

    let text = ok(dir, &["explain", "--checkpoint", ckpt, "--songs", "s01,s02", "--pair-mode", "paper", "--format", "svg"]);
    assert!(text.contains("song s01") && text.contains("pair (paper)"), "{text}");
    let ex = dir.join("out/explain/joint_run00");
    for f in ["effects.csv", "boxplot.csv", "correlation.csv", "weights.csv", "weights.svg", "song_s02.json", "profile.txt", "pair_paper.json"] {
        assert!(ex.join(f).exists(), "{f}");
    }
    let before = snapshot(&ex);
    ok(dir, &["explain", "--checkpoint", ckpt, "--songs", "s01,s02", "--pair-mode", "paper", "--format", "svg"]);
    assert_eq!(snapshot(&ex), before);

    let err = fails(dir, &["explain", "--checkpoint", ckpt, "--songs", "nope"], 2);
    assert!(err.contains("nope"), "{err}");
    let a2e = dir.join("out/checkpoints/a2e_run00.ckpt");
    let err = fails(dir, &["explain", "--checkpoint", a2e.to_str().unwrap()], 2);
    assert!(err.contains("no linear layer"), "{err}");

    ok(dir, &["explain", "--songs", "s05", "--pair-mode", "intent"]);
    assert!(dir.join("out/explain/mid2e/pair_intent.json").exists());
}

fn table(dir: &Path, name: &str, header: &str, row: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, format!("{header}\n{row}\n")).unwrap();
    p
}

#[test]
fn coe_between_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let header = "model,valence,energy,tension,anger,fear,happy,sad,tender";
    let base = table(dir.path(), "a2e.csv", header, "A2E,.81,.79,.84,.82,.81,.66,.60,.75");
    let cand = table(dir.path(), "two.csv", header, "A2Mid2E,.79,.74,.78,.72,.77,.64,.58,.67");
    let (b, c) = (base.to_str().unwrap(), cand.to_str().unwrap());

    let out = ok(dir.path(), &["coe", b, c]);
    let short = out.lines().find(|l| l.contains(",2dp,")).unwrap();
    assert_eq!(short, "CoE_A2Mid2E,2dp,0.02,0.05,0.06,0.10,0.04,0.02,0.02,0.08,0.05");

    let same = ok(dir.path(), &["coe", b, b, "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&same).unwrap();
    assert!(v["costs"].as_array().unwrap().iter().all(|c| c.as_f64() == Some(0.0)), "{same}");

    let short_header = "model,valence,energy,tension,anger,fear,happy,sad";
    let broken = table(dir.path(), "broken.csv", short_header, "X,.1,.1,.1,.1,.1,.1,.1");
    let err = fails(dir.path(), &["coe", b, broken.to_str().unwrap()], 2);
    assert!(err.contains("tender"), "{err}");
}

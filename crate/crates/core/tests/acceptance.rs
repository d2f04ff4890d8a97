//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line.
//!
//! The report lines bypass output capture, so they appear in plain `cargo test` output.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use xemo_core::data::{load_annotations, Waveform};
use xemo_core::dsp::{compute_spectrogram, Filterbank, Spectrogram, SpectrogramConfig};
use xemo_core::eval::{cost_of_explainability, pearson, ResultsRow};
use xemo_core::explain::{compute_effects, fit_ols, select_contrast_pair, FeatureSource, LinearMap, PairMode};
use xemo_core::features::{Schema, EMOTION_NAMES, MIDLEVEL_NAMES};
use xemo_core::models::{build_model, joint_loss, Architecture, TrunkConfig};
use xemo_core::train::{fit, mid2e_protocol, CropSpec, Dataset, Example, Learner, NetLearner, StopRule, TrainingConfig};
use xemo_core::Result;
use xemo_nn::{grad_check, mse, GradCheckConfig, LayerSpec, Mode, NnRng, Sequential, Tensor};

/// Written straight to the stdout handle so the line shows up without `--nocapture`.
fn line(text: &str) {
    let _ = std::io::stdout().lock().write_all(format!("{text}\n").as_bytes());
}

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    line(&format!("criterion {id:>2} {:<4} {name}: {detail}", if pass { "PASS" } else { "FAIL" }));
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn rng(seed: u64) -> NnRng {
    NnRng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- criterion 1

/// A random network containing every layer kind.
fn random_network(r: &mut NnRng) -> (Vec<LayerSpec>, Vec<usize>) {
    let c_in = r.random_range(1..=2);
    let c1 = r.random_range(2..=4);
    let c2 = r.random_range(2..=3);
    let hidden = r.random_range(3..=5);
    let out = r.random_range(1..=3);
    let h = r.random_range(4..=6);
    let w = r.random_range(4..=6);
    let batch = r.random_range(2..=3);
    let mut specs = vec![LayerSpec::conv3x3(c_in, c1), LayerSpec::batch_norm(c1), LayerSpec::Relu];
    if r.random_bool(0.5) {
        specs.push(LayerSpec::max_pool(2));
        specs.push(LayerSpec::conv1x1(c1, c2));
    } else {
        specs.push(LayerSpec::conv1x1(c1, c2));
        specs.push(LayerSpec::max_pool(2));
    }
    specs.extend([
        LayerSpec::AdaptiveAvgPool,
        LayerSpec::dropout(r.random_range(0.1..0.5)),
        LayerSpec::dense(c2, hidden),
        LayerSpec::batch_norm(hidden),
        LayerSpec::Relu,
        LayerSpec::dense(hidden, out),
    ]);
    (specs, vec![batch, c_in, h, w, out])
}

#[test]
fn criterion_01_gradient_correctness() {
    let start = Instant::now();
    let mut r = rng(2024);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut kinds = std::collections::BTreeSet::new();
    let (mut checked, mut skipped) = (0, 0);
    let networks = 24;
    for k in 0..networks {
        let (specs, dims) = random_network(&mut r);
        kinds.extend(specs.iter().map(|s| s.kind()));
        let net = Sequential::<f64>::new(&specs, &mut r).unwrap();
        let (batch, c_in, h, w, out) = (dims[0], dims[1], dims[2], dims[3], dims[4]);
        let x = Tensor::from_vec(&[batch, c_in, h, w], (0..batch * c_in * h * w).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let t = Tensor::from_vec(&[batch, out], (0..batch * out).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let mode = if k % 4 == 3 { Mode::Eval } else { Mode::Train };
        let cfg = GradCheckConfig { mode, seed: k as u64, ..GradCheckConfig::default() };
        let rep = grad_check(&net, &x, &t, &cfg).unwrap();
        worst = worst.max(rep.max_rel_error);
        checked += rep.checked;
        skipped += rep.skipped;
        if !rep.passed() {
            failures.push(k);
        }
    }
    let elapsed = start.elapsed();
    let all_kinds = kinds.len() == 7;
    let pass = failures.is_empty() && all_kinds && within(elapsed, 60.0);
    report(
        1,
        "gradient correctness",
        pass,
        &format!(
            "{networks} networks, {} layer kinds, {checked} entries checked, {skipped} kink-excluded, max rel error {worst:.2e} (tol 1e-4), failing {failures:?}, {:.1}s",
            kinds.len(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 2

/// Normal equations `[X|1]^T [X|1] B = [X|1]^T Y` solved by Gauss-Jordan with partial pivoting.
fn normal_equations_oracle(x: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = x[0].len() + 1;
    let q = y[0].len();
    let row = |i: usize| -> Vec<f64> { x[i].iter().copied().chain([1.0]).collect() };
    let mut aug = vec![vec![0.0; m + q]; m];
    for i in 0..x.len() {
        let a = row(i);
        for j in 0..m {
            for k in 0..m {
                aug[j][k] += a[j] * a[k];
            }
            for t in 0..q {
                aug[j][m + t] += a[j] * y[i][t];
            }
        }
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs())).unwrap();
        aug.swap(col, piv);
        let d = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        for r in 0..m {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..m + q {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    aug.into_iter().map(|r| r[m..].to_vec()).collect()
}

#[test]
fn criterion_02_ols_oracle_equivalence() {
    let start = Instant::now();
    let mut r = rng(7);
    let (mut worst_oracle, mut worst_planted) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = r.random_range(9..=80);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..7).map(|_| r.random_range(0.1..1.0)).collect()).collect();
        let w: Vec<Vec<f64>> = (0..7).map(|_| (0..8).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let b: Vec<f64> = (0..8).map(|_| r.random_range(-0.5..0.5)).collect();
        let y: Vec<Vec<f64>> = x
            .iter()
            .map(|xi| (0..8).map(|e| b[e] + (0..7).map(|f| xi[f] * w[f][e]).sum::<f64>()).collect())
            .collect();
        let map = fit_ols(&x, &y, &MIDLEVEL_NAMES, &EMOTION_NAMES).unwrap();
        let oracle = normal_equations_oracle(&x, &y);
        for f in 0..7 {
            for e in 0..8 {
                worst_oracle = worst_oracle.max((map.weights[f][e] - oracle[f][e]).abs());
                worst_planted = worst_planted.max((map.weights[f][e] - w[f][e]).abs());
            }
        }
        for e in 0..8 {
            worst_oracle = worst_oracle.max((map.intercepts[e] - oracle[7][e]).abs());
            worst_planted = worst_planted.max((map.intercepts[e] - b[e]).abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_oracle < 1e-8 && worst_planted < 1e-8 && within(elapsed, 10.0);
    report(
        2,
        "OLS oracle equivalence",
        pass,
        &format!(
            "100 instances, max |fit - oracle| {worst_oracle:.2e}, max |fit - planted| {worst_planted:.2e} (tol 1e-8), {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_03_decomposition_identity() {
    let start = Instant::now();
    let mut r = rng(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let weights = (0..7).map(|_| (0..8).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let intercepts = (0..8).map(|_| r.random_range(-1.0..1.0)).collect();
        let map = LinearMap::new(&MIDLEVEL_NAMES, &EMOTION_NAMES, weights, intercepts).unwrap();
        let n = r.random_range(1..=20);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..7).map(|_| r.random_range(0.0..1.0)).collect()).collect();
        let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let e = compute_effects(&map, &x, &ids, FeatureSource::Annotations).unwrap();
        for (s, xs) in x.iter().enumerate() {
            let direct = map.apply(xs).unwrap();
            for (t, d) in direct.iter().enumerate() {
                worst = worst.max((e.prediction(s, t) - d).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-9 && within(elapsed, 5.0);
    report(
        3,
        "decomposition identity",
        pass,
        &format!("1000 instances, max |intercept + sum effects - prediction| {worst:.2e} (tol 1e-9), {:.2}s", elapsed.as_secs_f64()),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_04_coe_arithmetic() {
    let a2e = ResultsRow::new("A2E", &EMOTION_NAMES, vec![0.81, 0.79, 0.84, 0.82, 0.81, 0.66, 0.60, 0.75]).unwrap();
    let two_stage = ResultsRow::new("A2Mid2E", &EMOTION_NAMES, vec![0.79, 0.74, 0.78, 0.72, 0.77, 0.64, 0.58, 0.67]).unwrap();
    let joint = ResultsRow::new("A2Mid2E-Joint", &EMOTION_NAMES, vec![0.82, 0.78, 0.82, 0.76, 0.79, 0.65, 0.64, 0.72]).unwrap();
    let published_two_stage = ["0.02", "0.05", "0.06", "0.10", "0.03", "0.02", "0.02", "0.08"];
    let published_joint = ["-0.02", "0.01", "0.02", "0.06", "0.02", "0.01", "-0.04", "0.03"];

    let c1 = cost_of_explainability(&a2e, &two_stage).unwrap();
    let c2 = cost_of_explainability(&a2e, &joint).unwrap();
    let anger = c1.rounded()[3].clone();
    let valence = c1.rounded()[0].clone();
    let pass = anger == "0.10" && valence == "0.02";

    let diffs = |c: &xemo_core::eval::CoEReport, published: &[&str]| -> Vec<String> {
        c.rounded()
            .iter()
            .zip(published)
            .zip(&c.columns)
            .filter(|((a, b), _)| a != *b)
            .map(|((a, b), col)| format!("{col} computed {a} published {b}"))
            .collect()
    };
    report(
        4,
        "CoE arithmetic",
        pass,
        &format!(
            "A2Mid2E anger {anger} (published 0.10), valence {valence} (published 0.02); documented rounding differences: A2Mid2E [{}], Joint [{}]",
            diffs(&c1, &published_two_stage).join("; "),
            diffs(&c2, &published_joint).join("; ")
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 5

/// Directory with `midlevel.csv` (song_id + 7 mid-level columns) and `emotion.csv`
/// (song_id + 8 emotion columns), raw ratings in the layout the annotation loader reads.
fn dataset_dir() -> Option<PathBuf> {
    std::env::var_os("XEMO_DATA_DIR").map(PathBuf::from)
}

#[test]
fn criterion_05_mid2e_reproduction() {
    let Some(dir) = dataset_dir() else {
        line("criterion  5 SKIP Mid2E reproduction: set XEMO_DATA_DIR to a directory holding midlevel.csv and emotion.csv");
        return;
    };
    let start = Instant::now();
    let run = || -> Result<_> {
        let mid = load_annotations(dir.join("midlevel.csv"), Schema::Midlevel)?;
        let emo = load_annotations(dir.join("emotion.csv"), Schema::Emotion)?;
        mid2e_protocol(&mid, &emo, 10, 0, 0.2)
    };
    let result = run().expect("datasets load and fit");
    let published = [0.88, 0.80, 0.84, 0.65, 0.82, 0.81, 0.74, 0.73];
    let worst = result.mean.values.iter().zip(published).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let avg = result.mean.average();
    let elapsed = start.elapsed();
    let pass = worst <= 0.05 && (avg - 0.79).abs() <= 0.03 && within(elapsed, 60.0);
    report(
        5,
        "Mid2E reproduction",
        pass,
        &format!("mean r {:?}, max deviation {worst:.3} (tol 0.05), average {avg:.4} (0.79 +/- 0.03), {:.1}s", result.mean.values, elapsed.as_secs_f64()),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 6

fn brute_force_pair(e: &[Vec<f64>], m: &[Vec<f64>], mode: PairMode) -> (usize, usize) {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let pairs: Vec<(usize, usize)> = (0..e.len()).flat_map(|i| (i + 1..e.len()).map(move |j| (i, j))).collect();
    let de: Vec<f64> = pairs.iter().map(|&(i, j)| dist(&e[i], &e[j])).collect();
    let dm: Vec<f64> = pairs.iter().map(|&(i, j)| dist(&m[i], &m[j])).collect();
    let scale = |d: &[f64]| -> Vec<f64> {
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        d.iter().map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }).collect()
    };
    let (se, sm) = (scale(&de), scale(&dm));
    let score = |k: usize| match mode {
        PairMode::Paper => se[k] - (1.0 - sm[k]),
        PairMode::Intent => sm[k] - se[k],
    };
    let best = (0..pairs.len()).map(score).fold(f64::NEG_INFINITY, f64::max);
    let mut winners: Vec<(usize, usize)> = (0..pairs.len()).filter(|&k| score(k) == best).map(|k| pairs[k]).collect();
    winners.sort();
    winners[0]
}

#[test]
fn criterion_06_pair_selection() {
    let start = Instant::now();
    let mut r = rng(99);
    let mut mismatches = 0;
    for inst in 0..200 {
        let n = r.random_range(2..=50);
        // a coarse grid on some instances forces ties
        let coarse = inst % 5 == 0;
        let value = |r: &mut NnRng| if coarse { r.random_range(0..3) as f64 * 0.25 } else { r.random_range(0.1..1.0) };
        let e: Vec<Vec<f64>> = (0..n).map(|_| (0..8).map(|_| value(&mut r)).collect()).collect();
        let m: Vec<Vec<f64>> = (0..n).map(|_| (0..7).map(|_| value(&mut r)).collect()).collect();
        for mode in [PairMode::Paper, PairMode::Intent] {
            let p = select_contrast_pair(&e, &m, mode).unwrap();
            if (p.i, p.j) != brute_force_pair(&e, &m, mode) {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && within(elapsed, 10.0);
    report(
        6,
        "pair selection",
        pass,
        &format!("200 instances x 2 modes, {mismatches} mismatches against exhaustive enumeration, {:.2}s", elapsed.as_secs_f64()),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 7

fn tone(freq: f64, seconds: f64) -> Waveform {
    let n = (seconds * 22_050.0) as usize;
    Waveform {
        samples: (0..n).map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / 22_050.0).sin() as f32 * 0.8).collect(),
        sample_rate: 22_050,
        source_id: format!("{freq}"),
    }
}

/// Band energies of frame `t` computed with a direct DFT of the center-padded, Hann-windowed crop.
fn direct_dft_bands(w: &Waveform, cfg: &SpectrogramConfig, fb: &Filterbank, t: usize) -> Vec<f64> {
    let n = cfg.frame_size;
    let frame: Vec<f64> = (0..n)
        .map(|i| {
            let k = (t * cfg.hop + i) as isize - (n / 2) as isize;
            let s = if k >= 0 && (k as usize) < w.samples.len().min(cfg.crop_len()) { w.samples[k as usize] as f64 } else { 0.0 };
            s * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        })
        .collect();
    let power: Vec<f64> = (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, s) in frame.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * i % n) as f64 / n as f64;
                re += s * ang.cos();
                im += s * ang.sin();
            }
            re * re + im * im
        })
        .collect();
    (0..fb.len()).map(|b| power.iter().enumerate().map(|(k, p)| fb.weight(b, k) * p).sum()).collect()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}

#[test]
fn criterion_07_spectrogram_contract() {
    let start = Instant::now();
    let cfg = SpectrogramConfig::default();
    let fb = Filterbank::new(&cfg);
    let mut notes = Vec::new();

    let shapes_ok = [1.0, 3.7, 10.0, 14.2].iter().all(|&secs| {
        let s = compute_spectrogram(&tone(1000.0, secs), &cfg, 0).unwrap();
        s.frames == 313 && s.bands == 149 && s.values.len() == 313 * 149 && s.values.iter().all(|v| v.is_finite() && *v >= -100.0)
    });
    notes.push(format!("shapes {}", if shapes_ok { "313x149" } else { "wrong" }));

    let bin = 22_050.0 / 2048.0;
    let mut localized = true;
    for k in [10.0, 40.0, 150.0, 400.0, 740.0] {
        let f = k * bin;
        let s = compute_spectrogram(&tone(f, 10.0), &cfg, 0).unwrap();
        let want = fb.nearest_band(f);
        let hits = (0..s.frames).filter(|&t| s.argmax_band(t) == want).count();
        localized &= hits == s.frames;
        notes.push(format!("{f:.1} Hz {hits}/{} frames in band {want}", s.frames));
    }

    let w440 = tone(440.0, 10.0);
    let s440 = compute_spectrogram(&w440, &cfg, 0).unwrap();
    let probe: Vec<usize> = (0..313).step_by(13).collect();
    let agree = probe.iter().filter(|&&t| argmax(&direct_dft_bands(&w440, &cfg, &fb, t)) == s440.argmax_band(t)).count();
    let band440 = fb.nearest_band(440.0);
    let in_band = (0..313).filter(|&t| s440.argmax_band(t) == band440).count();
    let oracle_ok = agree == probe.len() && in_band as f64 >= 0.95 * 313.0;
    notes.push(format!("440 Hz: {in_band}/313 frames in band {band440}, direct DFT agrees on {agree}/{} frames", probe.len()));

    let silence = compute_spectrogram(&Waveform { samples: vec![0.0; 22_050 * 2], sample_rate: 22_050, source_id: "s".into() }, &cfg, 0).unwrap();
    let silent_ok = silence.values.iter().all(|&v| v == -100.0);
    notes.push(format!("silence at floor: {silent_ok}"));

    let elapsed = start.elapsed();
    let pass = shapes_ok && localized && oracle_ok && silent_ok && within(elapsed, 10.0);
    report(7, "spectrogram contract", pass, &format!("{}, {:.2}s", notes.join("; "), elapsed.as_secs_f64()));
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 8

struct Stalling {
    losses: Vec<f64>,
    epoch: usize,
}

impl Learner for Stalling {
    type Snapshot = usize;

    fn train_epoch(&mut self, epoch: usize) -> Result<f64> {
        self.epoch = epoch;
        Ok(0.0)
    }

    fn validation_loss(&mut self) -> Result<f64> {
        Ok(self.losses[(self.epoch - 1).min(self.losses.len() - 1)])
    }

    fn snapshot(&self) -> usize {
        self.epoch
    }

    fn restore(&mut self, s: usize) {
        self.epoch = s;
    }
}

fn synthetic_examples(n: usize, frames: usize, bands: usize, seed: u64) -> Vec<Example> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| Example {
            id: format!("syn{i}"),
            spec: Arc::new(Spectrogram {
                frames,
                bands,
                values: (0..frames * bands).map(|_| r.random_range(-80.0..0.0)).collect(),
                source_id: format!("syn{i}"),
                crop_offset: 0,
            }),
            midlevel: None,
            emotion: Some((0..8).map(|_| r.random_range(0.1..0.783)).collect()),
        })
        .collect()
}

#[test]
fn criterion_08_overfit_and_early_stopping() {
    let start = Instant::now();
    // 8 training songs plus one validation song the learner requires
    let ds = Dataset::from_examples(synthetic_examples(9, 313, 149, 1)).unwrap();
    let ids = ds.ids();
    let trunk = TrunkConfig { widths: vec![8, 8, 16, 16, 32], pool_after: vec![2, 4], embedding_dim: 32, dropout: 0.0 };
    let model = build_model::<f32>(Architecture::A2E, &trunk, 3).unwrap();
    let crop = CropSpec { n_frames: 313, hop: 705, floor: -100.0 };
    let mut learner =
        NetLearner::new(model, ds.select(&ids[..8]).unwrap(), ds.select(&ids[8..]).unwrap(), crop, &TrainingConfig::default(), 5).unwrap();
    let mut reached = None;
    let mut last = f64::NAN;
    for epoch in 1..=500 {
        last = learner.train_epoch(epoch).unwrap();
        if last < 1e-3 {
            reached = Some(epoch);
            break;
        }
    }

    let mut stops = Vec::new();
    let mut stop_ok = true;
    for (patience, k) in [(50, 1), (50, 17), (5, 3), (1, 9)] {
        let mut losses: Vec<f64> = (0..k).map(|e| 1.0 / (e + 1) as f64).collect();
        losses.push(1.0);
        let mut l = Stalling { losses, epoch: 0 };
        let s = fit(&mut l, StopRule { patience, max_epochs: 1000 }, |_| {}).unwrap();
        stop_ok &= s.epochs == patience + k && s.best_epoch == k && l.epoch == k;
        stops.push(format!("patience {patience} best {k} -> stopped at {}", s.epochs));
    }

    let elapsed = start.elapsed();
    let pass = reached.is_some() && stop_ok && within(elapsed, 600.0);
    report(
        8,
        "overfit sanity and early stopping",
        pass,
        &format!(
            "train MSE {last:.2e} {} (tol 1e-3 within 500 epochs, 313x149 inputs, widths 8,8,16,16,32, dropout 0); {}; {:.1}s",
            reached.map(|e| format!("at epoch {e}")).unwrap_or_else(|| "not reached".into()),
            stops.join(", "),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_09_joint_structure() {
    let trunk = TrunkConfig { widths: vec![4, 4, 8, 8, 16], pool_after: vec![2, 4], embedding_dim: 16, dropout: 0.3 };
    let mut model = build_model::<f32>(Architecture::Joint, &trunk, 21).unwrap();
    // perturb the weights, then let batch-norm running statistics settle on random inputs
    let mut r = rng(5);
    for p in model.params_mut() {
        for v in p.data_mut() {
            *v += r.random_range(-0.05..0.05);
        }
    }
    for _ in 0..30 {
        let x = Tensor::from_vec(&[8, 1, 313, 149], (0..8 * 313 * 149).map(|_| r.random_range(-1.7f32..1.7)).collect()).unwrap();
        let (_, pass) = model.forward(&x, Mode::Train, Some(&mut r)).unwrap();
        model.update_running_stats(&pass);
    }
    let map = model.joint_linear().unwrap();
    let n = 50;
    let x = Tensor::from_vec(&[n, 1, 313, 149], (0..n * 313 * 149).map(|_| r.random_range(-1.7f32..1.7)).collect()).unwrap();
    let out = model.predict_batch(&x).unwrap();
    let (mid, emo) = (out.midlevel.unwrap(), out.emotion.unwrap());
    let mut worst = 0.0f64;
    for s in 0..n {
        let m: Vec<f64> = mid.data()[s * 7..(s + 1) * 7].iter().map(|&v| v as f64).collect();
        let recomputed = map.apply(&m).unwrap();
        for e in 0..8 {
            worst = worst.max((emo.data()[s * 8 + e] as f64 - recomputed[e]).abs());
        }
    }

    let mid_t = Tensor::from_vec(&[n, 7], (0..n * 7).map(|_| r.random_range(0.1f32..1.0)).collect()).unwrap();
    let emo_t = Tensor::from_vec(&[n, 8], (0..n * 8).map(|_| r.random_range(0.1f32..0.783)).collect()).unwrap();
    let joint = joint_loss(&mid, &mid_t, &emo, &emo_t).unwrap();
    let sum = mse(&mid, &mid_t).unwrap() as f64 + mse(&emo, &emo_t).unwrap() as f64;
    let pass = worst <= 1e-6 && joint == sum;
    report(
        9,
        "joint-model structure",
        pass,
        &format!("50 inputs, max |emotion - (W mid + b)| {worst:.2e} (tol 1e-6); joint loss {joint} vs mse_mid + mse_emo {sum}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 10

#[test]
fn criterion_10_pearson_properties() {
    let mut r = rng(31);
    let mut worst_affine = 0.0f64;
    let mut worst_self = 0.0f64;
    for _ in 0..200 {
        let n = r.random_range(3..100);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let base = pearson(&x, &y).unwrap();
        let a = r.random_range(0.1..10.0);
        let b = r.random_range(-5.0..5.0);
        let pos: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let neg: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
        worst_affine = worst_affine.max((pearson(&pos, &y).unwrap() - base).abs());
        worst_affine = worst_affine.max((pearson(&neg, &y).unwrap() + base).abs());
        worst_affine = worst_affine.max((pearson(&x, &pos.iter().map(|v| 3.0 * v - 1.0).collect::<Vec<_>>()).unwrap() - 1.0).abs());
        worst_self = worst_self.max((pearson(&x, &x).unwrap() - 1.0).abs());
    }
    let example = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    let pass = worst_affine <= 1e-12 && worst_self <= 1e-12 && (example - 0.8).abs() <= 1e-12;
    report(
        10,
        "Pearson properties",
        pass,
        &format!("affine invariance error {worst_affine:.2e}, self-correlation error {worst_self:.2e}, r([1,2,3,4],[1,3,2,4]) = {example} (tol 1e-12)"),
    );
    assert!(pass);
}

use std::collections::BTreeSet;
use std::path::Path;

use proptest::prelude::*;
use xemo_core::data::{load_annotations, load_audio, make_splits, resample, AnnotationTable, TARGET_RATE};
use xemo_core::features::Schema;
use xemo_core::Error;

fn write_wav(path: &Path, rate: u32, channels: u16, samples: &[i16]) {
    let spec = hound::WavSpec { channels, sample_rate: rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample(s).unwrap();
    }
    w.finalize().unwrap();
}

/// Magnitude of the DFT of `x` at frequency `f`.
fn dft_magnitude(x: &[f32], rate: f64, f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &s) in x.iter().enumerate() {
        let ang = 2.0 * std::f64::consts::PI * f * i as f64 / rate;
        re += s as f64 * ang.cos();
        im -= s as f64 * ang.sin();
    }
    (re * re + im * im).sqrt()
}

#[test]
fn tone_at_44100_resamples_to_same_pitch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tone.wav");
    let samples: Vec<i16> =
        (0..44_100).map(|i| ((2.0 * std::f64::consts::PI * 440.0 * i as f64 / 44_100.0).sin() * 12_000.0) as i16).collect();
    write_wav(&path, 44_100, 1, &samples);
    let w = load_audio(&path, TARGET_RATE).unwrap();
    assert_eq!(w.sample_rate, 22_050);
    assert_eq!(w.samples.len(), 22_050);
    assert_eq!(w.source_id, "tone");
    assert!((w.peak() - 1.0).abs() < 1e-6);
    let body = &w.samples[1000..21_000];
    let at = dft_magnitude(body, 22_050.0, 440.0);
    for off in [300.0, 600.0, 2000.0] {
        assert!(at > 50.0 * dft_magnitude(body, 22_050.0, off), "energy leaked to {off} Hz");
    }
}

#[test]
fn stereo_is_averaged_and_silence_stays_silent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stereo.wav");
    // left = +x, right = -x cancels to silence
    let samples: Vec<i16> = (0..2000).flat_map(|i| [(i % 100) as i16 * 50, -((i % 100) as i16 * 50)]).collect();
    write_wav(&path, 22_050, 2, &samples);
    let w = load_audio(&path, TARGET_RATE).unwrap();
    assert_eq!(w.samples.len(), 2000);
    assert!(w.samples.iter().all(|&s| s == 0.0));
}

#[test]
fn undecodable_file_is_a_decode_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.wav");
    std::fs::write(&path, b"not a wav file at all").unwrap();
    assert!(matches!(load_audio(&path, TARGET_RATE), Err(Error::Decode { .. })));
}

#[test]
fn identity_resample_copies() {
    let x: Vec<f32> = (0..100).map(|i| (i as f32 * 0.1).sin()).collect();
    assert_eq!(resample(&x, 22_050, 22_050), x);
}

#[test]
fn out_of_range_ratings_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let header = "song_id,valence,energy,tension,anger,fear,happy,sad,tender\n";
    for (row, ok) in [("s1,1,2,3,4,5,6,7,7.83\n", true), ("s1,1,2,3,4,5,6,7,7.9\n", false), ("s1,0.9,2,3,4,5,6,7,7\n", false)] {
        let path = dir.path().join("e.csv");
        std::fs::write(&path, format!("{header}{row}")).unwrap();
        let r = load_annotations(&path, Schema::Emotion);
        assert_eq!(r.is_ok(), ok, "{row}");
        if let Ok(t) = r {
            assert!((t.get("s1").unwrap()[7] - 0.783).abs() < 1e-12);
        }
    }
    let path = dir.path().join("m.csv");
    std::fs::write(
        &path,
        "song_id,melodiousness,articulation,rhythmic_stability,rhythmic_complexity,dissonance,tonal_stability,minorness\ns,1,2,3,4,5,6,10.5\n",
    )
    .unwrap();
    assert!(matches!(load_annotations(&path, Schema::Midlevel), Err(Error::OutOfRange { ref column, .. }) if column == "minorness"));
}

#[test]
fn paper_sized_split_holds_out_72() {
    let ids: Vec<String> = (0..360).map(|i| format!("{i:03}")).collect();
    let splits = make_splits(&ids, 0.2, 7, 10).unwrap();
    assert!(splits.iter().all(|s| s.test_ids.len() == 72 && s.train_ids.len() == 288));
    assert_eq!(splits, make_splits(&ids, 0.2, 7, 10).unwrap());
    assert!(splits.iter().enumerate().all(|(k, s)| s.seed == 7 + k as u64));
}

fn table_strategy(schema: Schema) -> impl Strategy<Value = AnnotationTable> {
    let (lo, hi) = schema.raw_range();
    prop::collection::vec(prop::collection::vec(lo..=hi, schema.width()), 1..30).prop_map(move |rows| {
        let rows = rows.into_iter().enumerate().map(|(i, r)| (format!("song{i}"), r.iter().map(|v| v * 0.1).collect())).collect();
        AnnotationTable::from_rows(schema, rows).unwrap()
    })
}

proptest! {
    #[test]
    fn annotation_csv_round_trip(table in prop_oneof![table_strategy(Schema::Emotion), table_strategy(Schema::Midlevel)]) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        table.write_csv(&path).unwrap();
        let back = load_annotations(&path, table.schema()).unwrap();
        prop_assert_eq!(back.ids(), table.ids());
        for r in 0..table.len() {
            for (a, b) in back.row(r).iter().zip(table.row(r)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn every_split_is_an_exact_partition(n in 2usize..200, ratio in 0.05f64..0.95, seed in any::<u64>(), runs in 1usize..5) {
        let ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
        let expected = (ratio * n as f64).round() as usize;
        match make_splits(&ids, ratio, seed, runs) {
            Ok(splits) => {
                prop_assert_eq!(splits.len(), runs);
                for s in splits {
                    prop_assert_eq!(s.test_ids.len(), expected);
                    let train: BTreeSet<_> = s.train_ids.iter().collect();
                    let test: BTreeSet<_> = s.test_ids.iter().collect();
                    prop_assert!(train.is_disjoint(&test));
                    prop_assert_eq!(train.len() + test.len(), n);
                }
            }
            Err(_) => prop_assert!(expected == 0 || expected >= n),
        }
    }
}

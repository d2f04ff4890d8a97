//! `xemo prepare`: validate inputs, cache spectrograms, write split manifests.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use xemo_core::data::{load_audio, SplitManifest};
use xemo_core::dsp::{cache, SpectrogramExtractor};
use xemo_core::train::{splits_for_population, Scheme};

use crate::config::Loaded;
use crate::workspace::{scan_audio, write_if_changed, Layout, Tables};
use crate::CliError;

pub fn run(loaded: &Loaded) -> Result<()> {
    let layout = Layout::new(loaded);
    let tables = Tables::load(loaded)?;
    let audio = scan_audio(loaded)?;
    let annotated = tables.all_ids();

    let unannotated: Vec<&String> = audio.keys().filter(|id| annotated.binary_search(id).is_err()).collect();
    let silent: Vec<&String> = annotated.iter().filter(|id| !audio.contains_key(*id)).collect();
    let report_path = layout.cache().join("validation_report.txt");
    if !unannotated.is_empty() || !silent.is_empty() {
        let mut report = String::new();
        for id in &unannotated {
            let _ = writeln!(report, "audio without annotation: {id} ({})", audio[*id].display());
        }
        for id in &silent {
            let _ = writeln!(report, "annotation without audio: {id}");
        }
        write_if_changed(&report_path, &report)?;
        eprint!("{report}");
        bail!(CliError::Validation(format!(
            "{} audio files lack annotations and {} annotated songs lack audio; see {}",
            unannotated.len(),
            silent.len(),
            report_path.display()
        )));
    }
    if report_path.exists() {
        std::fs::remove_file(&report_path)?;
    }

    let cfg_hash = loaded.cfg.spectrogram.hash();
    let extractor = SpectrogramExtractor::new(&loaded.cfg.spectrogram)?;
    let (mut computed, mut fresh) = (0usize, 0usize);
    for (id, path) in &audio {
        let audio_sha = cache::file_sha256(path)?;
        if cache::is_fresh(layout.cache(), id, &cfg_hash, &audio_sha) {
            fresh += 1;
            continue;
        }
        let wave = load_audio(path, loaded.cfg.spectrogram.sample_rate).with_context(|| format!("song `{id}`"))?;
        let spec = extractor.compute_full(&wave).with_context(|| format!("song `{id}`"))?;
        cache::write(layout.cache(), &spec, &cfg_hash, &audio_sha)?;
        computed += 1;
    }

    let protocol = loaded.protocol();
    let mut manifests = Vec::new();
    for scheme in Scheme::ALL {
        let Some(ids) = tables.population(scheme) else { continue };
        let splits = splits_for_population(scheme, &ids, &protocol).with_context(|| format!("splitting for {scheme}"))?;
        let manifest = SplitManifest::new(splits, loaded.hash.clone());
        let path = layout.splits().join(format!("{}.json", scheme.key()));
        let wrote = write_if_changed(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        manifests.push(format!("{}{}", scheme.key(), if wrote { " (written)" } else { "" }));
    }
    println!(
        "prepared {} songs: {computed} spectrograms computed, {fresh} up to date; splits: {}",
        audio.len(),
        manifests.join(", ")
    );
    Ok(())
}

//! Output directory layout and loading of prepared inputs.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use xemo_core::data::{load_annotations, AnnotationTable};
use xemo_core::dsp::{cache, Spectrogram};
use xemo_core::features::Schema;
use xemo_core::train::{Dataset, Example, ProtocolData, Scheme};

use crate::config::Loaded;
use crate::CliError;

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(loaded: &Loaded) -> Layout {
        Layout { root: loaded.output_dir() }
    }

    pub fn cache(&self) -> PathBuf {
        self.root.join("cache")
    }

    pub fn splits(&self) -> PathBuf {
        self.root.join("splits")
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn results(&self) -> PathBuf {
        self.root.join("results")
    }

    pub fn explain(&self) -> PathBuf {
        self.root.join("explain")
    }
}

/// Writes `contents` unless the file already holds exactly these bytes. Returns whether it wrote.
pub fn write_if_changed(path: &Path, contents: impl AsRef<[u8]>) -> Result<bool> {
    let contents = contents.as_ref();
    if fs::read(path).is_ok_and(|old| old == contents) {
        return Ok(false);
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(true)
}

pub struct Tables {
    pub emotion: Option<AnnotationTable>,
    pub midlevel: Option<AnnotationTable>,
}

impl Tables {
    pub fn load(loaded: &Loaded) -> Result<Tables> {
        let read = |p: &Option<PathBuf>, schema: Schema| -> Result<Option<AnnotationTable>> {
            match p {
                None => Ok(None),
                Some(p) => {
                    let path = loaded.resolve(p);
                    if !path.exists() {
                        bail!(CliError::Validation(format!("annotation file {} does not exist", path.display())));
                    }
                    Ok(Some(load_annotations(&path, schema).with_context(|| format!("loading {}", path.display()))?))
                }
            }
        };
        let t = Tables {
            emotion: read(&loaded.cfg.data.emotion, Schema::Emotion)?,
            midlevel: read(&loaded.cfg.data.midlevel, Schema::Midlevel)?,
        };
        if t.emotion.is_none() && t.midlevel.is_none() {
            bail!(CliError::Validation("the config names no annotation file (data.emotion / data.midlevel)".into()));
        }
        Ok(t)
    }

    pub fn emotion(&self) -> Result<&AnnotationTable> {
        self.emotion.as_ref().ok_or_else(|| CliError::Validation("data.emotion is required for this command".into()).into())
    }

    pub fn midlevel(&self) -> Result<&AnnotationTable> {
        self.midlevel.as_ref().ok_or_else(|| CliError::Validation("data.midlevel is required for this command".into()).into())
    }

    /// Every annotated song id, sorted.
    pub fn all_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> =
            self.emotion.iter().chain(&self.midlevel).flat_map(|t| t.ids().iter().cloned()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Songs the protocol splits for `scheme`, or `None` when an annotation table is missing.
    pub fn population(&self, scheme: Scheme) -> Option<Vec<String>> {
        let mut ids: Vec<String> = match scheme {
            Scheme::A2E | Scheme::A2Mid2E => self.emotion.as_ref()?.ids().to_vec(),
            Scheme::Joint | Scheme::Mid2E | Scheme::A2Mid => {
                let mid = self.midlevel.as_ref()?;
                self.emotion.as_ref()?.ids().iter().filter(|id| mid.contains(id)).cloned().collect()
            }
            Scheme::A2MidPlus => self.midlevel.as_ref()?.ids().to_vec(),
        };
        if scheme == Scheme::A2Mid2E && self.midlevel.is_none() {
            return None;
        }
        ids.sort();
        Some(ids)
    }
}

/// `<song_id>.wav` files in the configured directories.
pub fn scan_audio(loaded: &Loaded) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for dir in &loaded.cfg.data.audio_dirs {
        let dir = loaded.resolve(dir);
        let entries = fs::read_dir(&dir)
            .map_err(|e| CliError::Validation(format!("cannot read audio directory {}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry?.path();
            if !path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else { continue };
            if let Some(prev) = out.insert(id.clone(), path.clone()) {
                bail!(CliError::Validation(format!(
                    "song id `{id}` has two audio files: {} and {}",
                    prev.display(),
                    path.display()
                )));
            }
        }
    }
    Ok(out)
}

/// Cached spectrograms of `ids`, checked against the current spectrogram settings.
pub fn load_specs(layout: &Layout, loaded: &Loaded, ids: &[String]) -> Result<HashMap<String, Arc<Spectrogram>>> {
    let expected = loaded.cfg.spectrogram.hash();
    let mut out = HashMap::with_capacity(ids.len());
    for id in ids {
        let (spec, sidecar) = cache::read(layout.cache(), id).map_err(|e| {
            CliError::Validation(format!("no usable cached spectrogram for `{id}` ({e}); run `xemo prepare` first"))
        })?;
        if sidecar.config_hash != expected {
            bail!(CliError::Validation(format!(
                "cached spectrogram for `{id}` was made with other settings; run `xemo prepare` again"
            )));
        }
        out.insert(id.clone(), Arc::new(spec));
    }
    Ok(out)
}

/// Datasets a scheme trains on. The mid-level corpus is only loaded when the scheme uses it.
pub fn protocol_data(layout: &Layout, loaded: &Loaded, tables: &Tables, scheme: Scheme) -> Result<ProtocolData> {
    let needs_corpus = matches!(scheme, Scheme::A2Mid2E | Scheme::A2MidPlus);
    let mut ids: Vec<String> = tables.emotion.as_ref().map(|t| t.ids().to_vec()).unwrap_or_default();
    if needs_corpus {
        ids.extend(tables.midlevel()?.ids().iter().cloned());
        ids.sort();
        ids.dedup();
    }
    let specs = load_specs(layout, loaded, &ids)?;
    let soundtracks = match &tables.emotion {
        Some(e) => Dataset::assemble(&specs, tables.midlevel.as_ref(), Some(e))?,
        None => Dataset::default(),
    };
    let midlevel = if needs_corpus { Some(Dataset::assemble(&specs, tables.midlevel.as_ref(), None)?) } else { None };
    Ok(ProtocolData { soundtracks, midlevel })
}

/// Examples for explicit song ids, annotated from whichever tables know them.
pub fn examples_for(layout: &Layout, loaded: &Loaded, tables: &Tables, ids: &[String]) -> Result<Vec<Example>> {
    let known = tables.all_ids();
    if let Some(id) = ids.iter().find(|id| known.binary_search(id).is_err()) {
        bail!(xemo_core::Error::Lookup(format!("unknown song id `{id}`")));
    }
    let specs = load_specs(layout, loaded, ids)?;
    Ok(ids
        .iter()
        .map(|id| Example {
            id: id.clone(),
            spec: specs[id].clone(),
            midlevel: tables.midlevel.as_ref().and_then(|t| t.get(id)).map(<[f64]>::to_vec),
            emotion: tables.emotion.as_ref().and_then(|t| t.get(id)).map(<[f64]>::to_vec),
        })
        .collect())
}

//! Experiment configuration: one TOML file plus `--set key=value` overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use xemo_core::dsp::SpectrogramConfig;
use xemo_core::models::TrunkConfig;
use xemo_core::train::{CropSpec, ProtocolConfig, TrainingConfig};
use xemo_core::Provenance;

use crate::CliError;

/// Where annotations and audio live. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directories scanned for `<song_id>.wav` files.
    pub audio_dirs: Vec<PathBuf>,
    /// Emotion annotations of the soundtrack songs.
    pub emotion: Option<PathBuf>,
    /// Mid-level annotations; the soundtrack songs are expected to be a subset.
    pub midlevel: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    pub runs: usize,
    pub scheme: String,
    pub jobs: usize,
    pub test_ratio: f64,
    pub plus_test_ratio: f64,
    pub data: DataConfig,
    pub spectrogram: SpectrogramConfig,
    pub trunk: TrunkConfig,
    pub training: TrainingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("xemo-out"),
            seed: 0,
            runs: 10,
            scheme: "a2e".into(),
            jobs: 1,
            test_ratio: 0.2,
            plus_test_ratio: 0.08,
            data: DataConfig::default(),
            spectrogram: SpectrogramConfig::default(),
            trunk: TrunkConfig::default(),
            training: TrainingConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub sets: Vec<String>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub cfg: ExperimentConfig,
    /// Directory relative paths resolve against.
    pub base: PathBuf,
    pub hash: String,
}

impl Loaded {
    pub fn provenance(&self) -> Provenance {
        Provenance::new(self.hash.clone(), self.cfg.seed)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.cfg.output_dir)
    }

    pub fn crop(&self) -> CropSpec {
        CropSpec::from(&self.cfg.spectrogram)
    }

    pub fn protocol(&self) -> ProtocolConfig {
        let c = &self.cfg;
        ProtocolConfig {
            training: c.training.clone(),
            trunk: c.trunk.clone(),
            crop: self.crop(),
            runs: c.runs,
            base_seed: c.seed,
            test_ratio: c.test_ratio,
            plus_test_ratio: c.plus_test_ratio,
            jobs: c.jobs.max(1),
            checkpoint_dir: None,
            log_dir: None,
            metadata: serde_json::json!({ "config_hash": self.hash, "base_seed": c.seed }),
        }
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn toml_value(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

fn apply_set(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let Some((key, value)) = assignment.split_once('=') else {
        bail!(CliError::Usage(format!("--set expects KEY=VALUE, got `{assignment}`")));
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!(CliError::Usage(format!("invalid key `{key}` in --set")));
    }
    let mut t = table;
    for p in &parts[..parts.len() - 1] {
        let entry = t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| CliError::Usage(format!("`{p}` in `{key}` is not a table")))?;
    }
    t.insert(parts[parts.len() - 1].to_string(), toml_value(value.trim()));
    Ok(())
}

/// SHA-256 over the settings that affect results; output location and job count are excluded.
fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    let obj = v.as_object_mut().expect("config is an object");
    obj.remove("output_dir");
    obj.remove("jobs");
    let digest = Sha256::digest(serde_json::to_string(&v).expect("json").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads the config file (or `xemo.toml` in the working directory, or defaults) and applies overrides.
pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Loaded> {
    let default_path = Path::new("xemo.toml");
    let path = path.or_else(|| default_path.exists().then_some(default_path));
    let (mut table, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", p.display())))?;
            let table: toml::Table =
                toml::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", p.display())))?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (table, if base.as_os_str().is_empty() { PathBuf::from(".") } else { base })
        }
        None => (toml::Table::new(), PathBuf::from(".")),
    };
    for s in &ov.sets {
        apply_set(&mut table, s)?;
    }
    let mut cfg: ExperimentConfig =
        toml::Value::Table(table).try_into().map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
    if let Some(r) = ov.runs {
        cfg.runs = r;
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(j) = ov.jobs {
        cfg.jobs = j;
    }
    validate(&cfg)?;
    let hash = config_hash(&cfg);
    Ok(Loaded { cfg, base, hash })
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    cfg.spectrogram.validate().context("spectrogram settings")?;
    cfg.trunk.validate().context("trunk settings")?;
    cfg.training.validate().context("training settings")?;
    if cfg.runs == 0 {
        bail!(CliError::Validation("runs must be at least 1".into()));
    }
    for (name, r) in [("test_ratio", cfg.test_ratio), ("plus_test_ratio", cfg.plus_test_ratio)] {
        if !(r > 0.0 && r < 1.0) {
            bail!(CliError::Validation(format!("{name} must be in (0, 1), got {r}")));
        }
    }
    Ok(())
}

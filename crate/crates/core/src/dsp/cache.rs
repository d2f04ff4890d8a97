//! Binary spectrogram cache with a JSON sidecar.
//!
//! `<id>.spec` holds `XSPC`, a little-endian `u32` version, `u32` frames,
//! `u32` bands and then `frames * bands` little-endian `f32` values.
//! `<id>.json` records the config hash, the source audio hash and the hash
//! of the binary file so stale or corrupted entries can be detected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::{sha256_hex, Spectrogram};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"XSPC";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheSidecar {
    pub source_id: String,
    pub config_hash: String,
    pub audio_sha256: String,
    pub data_sha256: String,
    pub frames: usize,
    pub bands: usize,
    /// Values are unstandardized dB; standardization happens per crop.
    pub standardization: String,
}

pub fn cache_paths(dir: impl AsRef<Path>, source_id: &str) -> (PathBuf, PathBuf) {
    let dir = dir.as_ref();
    (dir.join(format!("{source_id}.spec")), dir.join(format!("{source_id}.json")))
}

pub fn encode(spec: &Spectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + spec.values.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.frames as u32).to_le_bytes());
    out.extend_from_slice(&(spec.bands as u32).to_le_bytes());
    for v in &spec.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], source_id: &str, path: &Path) -> Result<Spectrogram> {
    let bad = |m: String| Error::Cache { path: path.to_path_buf(), message: m };
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(bad("missing XSPC header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    if word(4) != VERSION {
        return Err(bad(format!("unsupported version {}", word(4))));
    }
    let (frames, bands) = (word(8) as usize, word(12) as usize);
    let body = &bytes[16..];
    if body.len() != frames * bands * 4 {
        return Err(bad(format!("expected {} values, found {} bytes", frames * bands, body.len())));
    }
    let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Spectrogram { frames, bands, values, source_id: source_id.to_string(), crop_offset: 0 })
}

/// Writes the spectrogram and its sidecar into `dir`.
pub fn write(dir: impl AsRef<Path>, spec: &Spectrogram, config_hash: &str, audio_sha256: &str) -> Result<CacheSidecar> {
    fs::create_dir_all(dir.as_ref())?;
    let (bin, json) = cache_paths(&dir, &spec.source_id);
    let bytes = encode(spec);
    let sidecar = CacheSidecar {
        source_id: spec.source_id.clone(),
        config_hash: config_hash.to_string(),
        audio_sha256: audio_sha256.to_string(),
        data_sha256: sha256_hex(&bytes),
        frames: spec.frames,
        bands: spec.bands,
        standardization: "none; zero mean and unit variance per crop at network input".into(),
    };
    fs::write(&bin, &bytes)?;
    fs::write(&json, serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(sidecar)
}

/// Reads a cached spectrogram, verifying the data hash against the sidecar.
pub fn read(dir: impl AsRef<Path>, source_id: &str) -> Result<(Spectrogram, CacheSidecar)> {
    let (bin, json) = cache_paths(&dir, source_id);
    let sidecar: CacheSidecar = serde_json::from_slice(&fs::read(&json)?)
        .map_err(|e| Error::Cache { path: json.clone(), message: e.to_string() })?;
    let bytes = fs::read(&bin)?;
    if sha256_hex(&bytes) != sidecar.data_sha256 {
        return Err(Error::Cache { path: bin, message: "data hash does not match sidecar".into() });
    }
    let spec = decode(&bytes, source_id, &bin)?;
    Ok((spec, sidecar))
}

/// True when a readable entry exists for this config and source audio.
pub fn is_fresh(dir: impl AsRef<Path>, source_id: &str, config_hash: &str, audio_sha256: &str) -> bool {
    matches!(read(dir, source_id), Ok((_, s)) if s.config_hash == config_hash && s.audio_sha256 == audio_sha256)
}

/// Hex SHA-256 of a file's contents.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let spec = Spectrogram {
            frames: 3,
            bands: 2,
            values: vec![0.5, -1.0, 2.0, 3.25, -100.0, 7.0],
            source_id: "song".into(),
            crop_offset: 0,
        };
        write(dir.path(), &spec, "cfg", "aud").unwrap();
        let (back, side) = read(dir.path(), "song").unwrap();
        assert_eq!(back, spec);
        assert_eq!(side.frames, 3);
        assert!(is_fresh(dir.path(), "song", "cfg", "aud"));
        assert!(!is_fresh(dir.path(), "song", "other", "aud"));

        let (bin, _) = cache_paths(dir.path(), "song");
        let mut bytes = fs::read(&bin).unwrap();
        bytes[20] ^= 0xff;
        fs::write(&bin, bytes).unwrap();
        assert!(matches!(read(dir.path(), "song"), Err(Error::Cache { .. })));
        assert!(!is_fresh(dir.path(), "song", "cfg", "aud"));
    }
}

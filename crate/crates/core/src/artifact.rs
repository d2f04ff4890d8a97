//! Provenance stamped into every emitted artifact.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Provenance { config_hash: config_hash.into(), seed }
    }

    /// `# config_hash=<hash> seed=<seed>`, the first line of every CSV artifact.
    pub fn comment_line(&self) -> String {
        format!("# config_hash={} seed={}", self.config_hash, self.seed)
    }

    /// Parses a line produced by [`Provenance::comment_line`].
    pub fn parse_comment(line: &str) -> Option<Provenance> {
        let rest = line.trim().strip_prefix('#')?.trim();
        let mut hash = None;
        let mut seed = None;
        for part in rest.split_whitespace() {
            if let Some(h) = part.strip_prefix("config_hash=") {
                hash = Some(h.to_string());
            } else if let Some(s) = part.strip_prefix("seed=") {
                seed = s.parse().ok();
            }
        }
        Some(Provenance { config_hash: hash?, seed: seed? })
    }

    pub(crate) fn write_comment(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{}", self.comment_line())?;
        Ok(())
    }
}

/// Reads the provenance comment from the first line of a CSV artifact, if present.
pub fn read_csv_provenance(text: &str) -> Option<Provenance> {
    text.lines().next().and_then(Provenance::parse_comment)
}

/// Two-decimal presentation without a negative zero.
pub fn fmt2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_round_trip() {
        let p = Provenance::new("abc123", 7);
        assert_eq!(Provenance::parse_comment(&p.comment_line()), Some(p));
        assert_eq!(Provenance::parse_comment("model,valence"), None);
    }

    #[test]
    fn fmt2_rounding() {
        assert_eq!(fmt2(0.82 - 0.72), "0.10");
        assert_eq!(fmt2(-0.001), "0.00");
        assert_eq!(fmt2(-0.0149), "-0.01");
    }
}

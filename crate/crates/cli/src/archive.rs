//! Versioned JSON archive of a trained hybrid model.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! loading an archive reproduces every weight bit for bit.

use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use hybreg::mlp::Candidate;
use hybreg::{ClusterKind, GridSpec, HybridMode, HybridModel, SplitSpec};
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::{CliError, Result};
use crate::fsio::write_atomic;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format_version: u32,
    pub model: HybridModel,
    pub provenance: ArchiveProvenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveProvenance {
    pub tool_version: String,
    pub created_unix_seconds: u64,
    /// CSV path, or `synthetic:<rows>`.
    pub data: String,
    pub clustering: ClusterKind,
    pub k: usize,
    pub mode: HybridMode,
    pub seed: u64,
    pub grid: GridSpec,
    pub split: SplitSpec,
    /// Winning grid candidate of each local model.
    pub grid_winners: Vec<Candidate>,
}

impl ArchiveProvenance {
    pub fn now(
        data: String,
        model: &HybridModel,
        kind: ClusterKind,
        seed: u64,
        grid: GridSpec,
        split: SplitSpec,
    ) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            data,
            clustering: kind,
            k: model.k(),
            mode: model.mode,
            seed,
            grid,
            split,
            grid_winners: model.locals.iter().map(|l| l.winner).collect(),
        }
    }
}

/// Compact JSON with every float as `d.dddddddddddddddde±x`. serde_json
/// writes non-finite values as `null` without consulting the formatter, and
/// such an archive fails to load.
struct SeventeenDigits;

impl Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> std::result::Result<Vec<u8>, serde_json::Error> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SeventeenDigits);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

impl ModelArchive {
    pub fn new(model: HybridModel, provenance: ArchiveProvenance) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            model,
            provenance,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = to_json(self).map_err(|e| CliError::Numeric(format!("archive: {e}")))?;
        write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read archive {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| format!("not a model archive: {e}"))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(format!(
                    "archive format version {v} is not supported (expected {FORMAT_VERSION})"
                ))
            }
            None => return Err("archive has no format_version".into()),
        }
        serde_json::from_value(value).map_err(|e| format!("malformed archive: {e}"))
    }
}

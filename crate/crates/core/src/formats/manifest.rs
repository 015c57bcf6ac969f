//! Mixture manifest and source catalog documents (JSON).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::MixtureRecord;

use super::{FormatError, Result};

/// Dataset description emitted next to synthesized mixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sample_rate: u32,
    pub mixtures: Vec<MixtureRecord>,
}

/// One source utterance available for mixing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub utterance_id: String,
    pub speaker_id: String,
    /// Path to the source WAV, absolute or relative to the catalog file.
    pub path: String,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
}

/// A set of source utterances keyed by opaque ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub entries: Vec<CatalogEntry>,
}

impl Catalog {
    pub fn entry(&self, utterance_id: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.utterance_id == utterance_id)
    }

    /// Speaker ids present, sorted and deduplicated.
    pub fn speakers(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.entries.iter().map(|e| e.speaker_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Entries of one speaker in catalog order.
    pub fn entries_of(&self, speaker_id: &str) -> Vec<&CatalogEntry> {
        self.entries.iter().filter(|e| e.speaker_id == speaker_id).collect()
    }

    /// Resolve an entry's wav path relative to the catalog file location.
    pub fn resolve_path(&self, base: &Path, entry: &CatalogEntry) -> std::path::PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

/// Read a manifest document.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let text = fs::read_to_string(path.as_ref())?;
    serde_json::from_str(&text).map_err(|e| {
        FormatError::Document(format!("{}: {e}", path.as_ref().display()))
    })
}

/// Write a manifest document with stable formatting.
pub fn write_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| FormatError::Document(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Read a source catalog document.
pub fn read_catalog(path: impl AsRef<Path>) -> Result<Catalog> {
    let text = fs::read_to_string(path.as_ref())?;
    serde_json::from_str(&text).map_err(|e| {
        FormatError::Document(format!("{}: {e}", path.as_ref().display()))
    })
}

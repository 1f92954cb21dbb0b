//! Corpus manifest: one header line with corpus-level settings, then one
//! line per utterance with its id, feature file path (relative to the
//! manifest), and reference text.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    frame_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Feature file path, relative to the manifest location.
    pub features: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    frame_ms: f64,
    entries: Vec<ManifestEntry>,
    base_dir: PathBuf,
}

impl Manifest {
    pub fn new(frame_ms: f64, entries: Vec<ManifestEntry>, base_dir: PathBuf) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Manifest(format!(
                    "duplicate utterance id {:?}",
                    e.id
                )));
            }
        }
        Ok(Self {
            frame_ms,
            entries,
            base_dir,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        use std::io::BufRead;
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
        let mut lines = std::io::BufReader::new(file).lines();

        let header_line = lines
            .next()
            .ok_or_else(|| Error::format(&display, "missing header line"))?
            .map_err(|e| Error::io(&display, e))?;
        let header: Header = serde_json::from_str(&header_line)
            .map_err(|e| Error::format(&display, format!("bad header: {e}")))?;

        let mut entries = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(&display, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line)
                .map_err(|e| Error::format(&display, format!("line {}: {e}", lineno + 2)))?;
            entries.push(entry);
        }
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let manifest = Self::new(header.frame_ms, entries, base_dir)?;
        for entry in &manifest.entries {
            let p = manifest.features_path(entry);
            if !p.is_file() {
                return Err(Error::Manifest(format!(
                    "feature file {} for utterance {:?} does not exist",
                    p.display(),
                    entry.id
                )));
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let display = path.as_ref().display().to_string();
        let mut body = serde_json::to_string(&Header {
            frame_ms: self.frame_ms,
        })
        .map_err(|e| Error::format(&display, e.to_string()))?;
        body.push('\n');
        for entry in &self.entries {
            body.push_str(
                &serde_json::to_string(entry)
                    .map_err(|e| Error::format(&display, e.to_string()))?,
            );
            body.push('\n');
        }
        std::fs::write(path, body).map_err(|e| Error::io(&display, e))
    }

    pub fn frame_ms(&self) -> f64 {
        self.frame_ms
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn features_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.features)
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ari_core::arena::{load_layout_str, preset, Point};
use ari_core::ArenaLayout;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub experiment_id: String,
    pub layout: String,
    pub calibration_corners: Option<[Point; 4]>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<FileEntry>,
    /// SHA-256 over the concatenated input digests, in listed order.
    pub input_hash: String,
    pub outputs: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(command: &str, experiment_id: &str, layout: &str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            experiment_id: experiment_id.to_string(),
            layout: layout.to_string(),
            calibration_corners: None,
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            input_hash: sha256_hex(b""),
            outputs: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.to_string(), serde_json::to_value(value).expect("serialisable"));
    }

    pub fn add_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(FileEntry {
            path: path.display().to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        let joined: String = self.inputs.iter().map(|e| e.sha256.as_str()).collect();
        self.input_hash = sha256_hex(joined.as_bytes());
    }
}

/// Collects output files under one directory and records their digests.
pub struct OutputDir {
    pub root: PathBuf,
    written: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let bytes = contents.as_ref();
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(FileEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(mut self, mut manifest: RunManifest) -> Result<()> {
        self.written.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.outputs = std::mem::take(&mut self.written);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// A preset name, or a path to a layout JSON document.
pub fn resolve_layout(name: &str, manifest: Option<&mut RunManifest>) -> Result<ArenaLayout> {
    if let Ok(layout) = preset(name) {
        return Ok(layout);
    }
    let path = Path::new(name);
    if !path.exists() {
        anyhow::bail!("layout {name:?} is neither a preset (exp1a, exp1b, exp2, exp3) nor a file");
    }
    let bytes = read_input(path)?;
    let text = String::from_utf8(bytes.clone()).with_context(|| format!("{name} is not UTF-8"))?;
    let layout = load_layout_str(&text).with_context(|| format!("loading layout {name}"))?;
    if let Some(m) = manifest {
        m.add_input(path, &bytes);
    }
    Ok(layout)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationDoc {
    pixel_corners: [Point; 4],
}

pub fn read_calibration(path: &Path, manifest: &mut RunManifest) -> Result<[Point; 4]> {
    let bytes = read_input(path)?;
    let doc: CalibrationDoc =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing calibration {}", path.display()))?;
    manifest.add_input(path, &bytes);
    Ok(doc.pixel_corners)
}

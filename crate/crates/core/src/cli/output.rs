//! Output directory bookkeeping and the hashed manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
/// Written alongside the outputs but never hashed.
pub const TIMINGS: &str = "timings.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects the files written by one command.
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<OutputDir> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if name == MANIFEST || name == TIMINGS {
            return Err(Error::InvalidArgument(format!("{name} is reserved")));
        }
        fs::write(self.root.join(name), bytes)?;
        self.record(name, bytes);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    /// Registers a file already written under the root.
    pub fn adopt(&mut self, path: &Path) -> Result<()> {
        let rel = path
            .strip_prefix(&self.root)
            .map_err(|_| Error::InvalidArgument(format!("{} is outside the output directory", path.display())))?;
        let name = rel.to_string_lossy().into_owned();
        let bytes = fs::read(path)?;
        self.record(&name, &bytes);
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.entries.retain(|e| e.path != name);
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
    }

    pub fn write_timings<T: Serialize>(&self, value: &T) -> Result<()> {
        fs::write(self.root.join(TIMINGS), serde_json::to_vec_pretty(value)?)?;
        Ok(())
    }

    /// Writes `manifest.json` with entries sorted by path.
    pub fn finish(mut self, command: &str) -> Result<Manifest> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            files: self.entries,
        };
        let mut text = serde_json::to_vec_pretty(&m)?;
        text.push(b'\n');
        fs::write(self.root.join(MANIFEST), text)?;
        Ok(m)
    }
}

/// Re-hashes every manifest entry; returns the paths that are missing or differ.
pub fn verify_manifest(root: &Path) -> Result<Vec<String>> {
    let m: Manifest = serde_json::from_slice(&fs::read(root.join(MANIFEST))?)?;
    let mut bad = Vec::new();
    for e in &m.files {
        match fs::read(root.join(&e.path)) {
            Ok(b) if sha256_hex(&b) == e.sha256 && b.len() as u64 == e.bytes => {}
            _ => bad.push(e.path.clone()),
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write("b.txt", b"beta").unwrap();
        out.write("a.txt", b"alpha").unwrap();
        out.write_timings(&1.5).unwrap();
        assert!(out.write(MANIFEST, b"x").is_err());
        let m = out.finish("test").unwrap();
        assert_eq!(m.files[0].path, "a.txt");
        assert_eq!(m.files[1].sha256, sha256_hex(b"beta"));
        assert!(!m.files.iter().any(|e| e.path == TIMINGS));
        assert!(verify_manifest(dir.path()).unwrap().is_empty());
        fs::write(dir.path().join("a.txt"), b"changed").unwrap();
        assert_eq!(verify_manifest(dir.path()).unwrap(), vec!["a.txt".to_string()]);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}

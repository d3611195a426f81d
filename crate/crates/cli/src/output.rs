//! Artifact staging and the run manifest.
//!
//! Commands accumulate their output files in memory and hand them over in one
//! [`Artifacts::write`] call, so a failing run leaves no partial files behind
//! and every emitted file is listed — with its SHA-256 — in `manifest.json`.
//! The manifest carries no timestamps: a rerun with the same scenario and
//! seed reproduces every byte, manifest included.

use crate::CliError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

/// Staged output files of one command run.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

/// Run identity recorded in the manifest.
#[derive(Debug, Clone)]
pub struct ManifestMeta {
    pub command: &'static str,
    /// SHA-256 of the scenario file bytes, when a scenario was loaded.
    pub scenario_sha256: Option<String>,
    pub base_seed: Option<u64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    tool_version: &'static str,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario_sha256: &'a Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_seed: &'a Option<u64>,
    files: Vec<ManifestFile>,
}

#[derive(Serialize)]
struct ManifestFile {
    name: String,
    bytes: usize,
    sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

impl Artifacts {
    pub fn new() -> Self {
        Artifacts::default()
    }

    /// Stage a file. Names must be unique within a run.
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        assert!(
            self.files.iter().all(|(n, _)| n != name),
            "duplicate artifact name {name}"
        );
        self.files.push((name.to_string(), bytes));
    }

    /// Stage a pretty-printed JSON file.
    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Numeric(format!("serialising {name}: {e}")))?;
        text.push('\n');
        self.add(name, text.into_bytes());
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[u8])> {
        self.files.iter().map(|(n, b)| (n.as_str(), b.as_slice()))
    }

    /// Write all staged files plus `manifest.json` into `out_dir`. On an I/O
    /// error, files already written by this call are removed again.
    pub fn write(self, out_dir: &Path, meta: ManifestMeta) -> Result<(), CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::Config(format!("output dir {}: {e}", out_dir.display())))?;
        let manifest = Manifest {
            tool: "pillarsim",
            tool_version: env!("CARGO_PKG_VERSION"),
            command: meta.command,
            scenario_sha256: &meta.scenario_sha256,
            base_seed: &meta.base_seed,
            files: self
                .files
                .iter()
                .map(|(name, bytes)| ManifestFile {
                    name: name.clone(),
                    bytes: bytes.len(),
                    sha256: sha256_hex(bytes),
                })
                .collect(),
        };
        let mut manifest_text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Numeric(format!("serialising manifest: {e}")))?;
        manifest_text.push('\n');

        let mut written: Vec<std::path::PathBuf> = Vec::new();
        let mut try_write = |name: &str, bytes: &[u8]| -> std::io::Result<()> {
            let path = out_dir.join(name);
            std::fs::write(&path, bytes)?;
            written.push(path);
            Ok(())
        };
        let result = self
            .files
            .iter()
            .map(|(name, bytes)| try_write(name, bytes))
            .collect::<std::io::Result<()>>()
            .and_then(|()| try_write("manifest.json", manifest_text.as_bytes()));
        if let Err(e) = result {
            for path in written {
                let _ = std::fs::remove_file(path);
            }
            return Err(CliError::Config(format!(
                "writing outputs to {}: {e}",
                out_dir.display()
            )));
        }
        Ok(())
    }
}

/// Assemble a CSV file from a header line and preformatted rows. Plain
/// numeric columns only — no quoting — and floats printed with the shortest
/// round-trip representation, so reruns are byte-identical.
pub fn csv<I: IntoIterator<Item = String>>(header: &str, rows: I) -> Vec<u8> {
    let mut text = String::with_capacity(4096);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    text.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_every_file_with_its_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut art = Artifacts::new();
        art.add("a.csv", b"x,y\n1,2\n".to_vec());
        art.add_json("b.json", &serde_json::json!({"k": 1})).unwrap();
        art.write(
            dir.path(),
            ManifestMeta {
                command: "test",
                scenario_sha256: Some(sha256_hex(b"scenario")),
                base_seed: Some(7),
            },
        )
        .unwrap();

        let manifest: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        let files = manifest["files"].as_array().unwrap();
        assert_eq!(files.len(), 2);
        let a = std::fs::read(dir.path().join("a.csv")).unwrap();
        assert_eq!(files[0]["name"], "a.csv");
        assert_eq!(files[0]["sha256"], sha256_hex(&a));
        assert_eq!(files[0]["bytes"], a.len());
        // No timestamps anywhere: a rerun with identical inputs is
        // byte-identical, manifest included.
        let first = std::fs::read(dir.path().join("manifest.json")).unwrap();
        let mut art = Artifacts::new();
        art.add("a.csv", b"x,y\n1,2\n".to_vec());
        art.add_json("b.json", &serde_json::json!({"k": 1})).unwrap();
        art.write(
            dir.path(),
            ManifestMeta {
                command: "test",
                scenario_sha256: Some(sha256_hex(b"scenario")),
                base_seed: Some(7),
            },
        )
        .unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("manifest.json")).unwrap());
    }

    #[test]
    fn csv_rows_are_newline_terminated() {
        let bytes = csv("x,y", vec!["1,2".to_string(), "3,4".to_string()]);
        assert_eq!(bytes, b"x,y\n1,2\n3,4\n");
    }
}

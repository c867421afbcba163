//! Run manifests: enough about a command invocation to re-run it and check
//! that it reproduced its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    /// Hex SHA-256 of the file contents.
    pub sha256: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Subcommand name.
    pub command: String,
    /// Full argument vector, program name excluded.
    pub argv: Vec<String>,
    /// Resolved settings, defaults included.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    /// Seconds since the Unix epoch at start.
    pub started_at: f64,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// Inputs whose current contents differ from the recorded hash.
    pub fn changed_inputs(&self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for f in &self.inputs {
            if !f.path.exists() || sha256_file(&f.path)? != f.sha256 {
                out.push(f.path.clone());
            }
        }
        Ok(out)
    }

    /// Outputs whose current contents differ from the recorded hash.
    pub fn mismatched_outputs(&self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for f in &self.outputs {
            if !f.path.exists() || sha256_file(&f.path)? != f.sha256 {
                out.push(f.path.clone());
            }
        }
        Ok(out)
    }
}

/// `<output>.manifest.json` next to the primary output.
pub fn manifest_path(primary_output: &Path) -> PathBuf {
    let mut name = primary_output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    primary_output.with_file_name(name)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(manifest_path(Path::new("out/graph.json")), PathBuf::from("out/graph.json.manifest.json"));
        assert_eq!(manifest_path(Path::new("data.csv")), PathBuf::from("data.csv.manifest.json"));
    }

    #[test]
    fn hashes_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.txt");
        fs::write(&f, "abc").unwrap();
        // Published SHA-256 test vector for "abc".
        assert_eq!(
            sha256_file(&f).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let m = RunManifest {
            tool: "camuv".into(),
            version: "0".into(),
            command: "simulate".into(),
            argv: vec!["simulate".into()],
            config: serde_json::json!({"seed": 1}),
            seed: Some(1),
            inputs: vec![FileRecord::of(&f).unwrap()],
            outputs: vec![],
            started_at: 0.0,
            wall_clock_seconds: 0.5,
        };
        let path = dir.path().join("m.json");
        m.write(&path).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap(), m);
        assert!(m.changed_inputs().unwrap().is_empty());
        fs::write(&f, "abd").unwrap();
        assert_eq!(m.changed_inputs().unwrap(), vec![f]);
    }
}

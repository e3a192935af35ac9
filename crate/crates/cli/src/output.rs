//! Artifact directory with a hash manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with a header row and `\n` line endings.
pub fn csv(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.iter().map(|&v| num(v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
        if !self.written.iter().any(|n| n == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json` listing every artifact with its SHA-256.
    pub fn finish(mut self, command: &str, status: &str) -> Result<PathBuf, CliError> {
        let mut files = Vec::new();
        for name in &self.written {
            let bytes = fs::read(self.dir.join(name)).map_err(|e| CliError::Io(format!("read {name}: {e}")))?;
            files.push(json!({ "name": name, "bytes": bytes.len(), "sha256": sha256_hex(&bytes) }));
        }
        let manifest = json!({ "command": command, "status": status, "files": files });
        self.written.clear();
        self.write_json("manifest.json", &manifest)?;
        Ok(self.dir)
    }
}

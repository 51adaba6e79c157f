use std::path::{Path, PathBuf};

use glovekit::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetVersion {
    pub name: String,
    /// File path, or `builtin`.
    pub source: String,
    pub sha256: String,
}

/// Provenance of one CLI invocation, written next to every output as `<file>.manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub datasets: Vec<DatasetVersion>,
    pub parameters: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Collects outputs of a command and writes their manifests on `finish`.
pub struct Run {
    out: PathBuf,
    manifest: RunManifest,
}

impl Run {
    pub fn new(out: &Path, command: &str, config: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        std::fs::create_dir_all(out)?;
        Ok(Self {
            out: out.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                argv: std::env::args().collect(),
                config: config.map(Path::to_path_buf),
                seed,
                datasets: Vec::new(),
                parameters: serde_json::Value::Null,
                outputs: Vec::new(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
            },
        })
    }

    pub fn dataset(&mut self, name: &str, source: &str, bytes: &[u8]) {
        self.manifest.datasets.push(DatasetVersion {
            name: name.to_string(),
            source: source.to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    /// Reads a dataset file and records its hash.
    pub fn read_dataset(&mut self, name: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
        self.dataset(name, &path.display().to_string(), &bytes);
        Ok(bytes)
    }

    pub fn parameters<P: Serialize>(&mut self, params: &P) -> Result<()> {
        self.manifest.parameters = serde_json::to_value(params)?;
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out.join(name);
        std::fs::write(&path, bytes)?;
        self.manifest.outputs.push(path.clone());
        Ok(path)
    }

    pub fn write_json<V: Serialize>(&mut self, name: &str, value: &V) -> Result<PathBuf> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    pub fn finish(self) -> Result<RunManifest> {
        for output in &self.manifest.outputs {
            let mut sidecar = output.clone().into_os_string();
            sidecar.push(".manifest.json");
            let mut text = serde_json::to_vec_pretty(&self.manifest)?;
            text.push(b'\n');
            std::fs::write(sidecar, text)?;
        }
        Ok(self.manifest)
    }
}

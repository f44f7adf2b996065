use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Twelve significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

/// Files written by one command plus the provenance recorded beside them.
pub struct Outputs {
    dir: Option<PathBuf>,
    written: Vec<FileDigest>,
}

impl Outputs {
    pub fn new(dir: Option<&Path>) -> Result<Self, CliError> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| CliError::Input(format!("cannot create {}: {e}", d.display())))?;
        }
        Ok(Outputs { dir: dir.map(Path::to_path_buf), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(FileDigest { path: name.to_string(), sha256: digest(contents.as_bytes()) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json`; the wall-clock runtime lives only here so the
    /// other outputs stay byte-identical across reruns.
    pub fn finish(self, manifest: Manifest) -> Result<(), CliError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        #[derive(Serialize)]
        struct Full<'a> {
            tool: &'static str,
            version: &'static str,
            subcommand: &'a str,
            config: &'a serde_json::Value,
            inputs: &'a [FileDigest],
            outputs: &'a [FileDigest],
            runtime_seconds: f64,
        }
        let full = Full {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: manifest.subcommand,
            config: &manifest.config,
            inputs: &manifest.inputs,
            outputs: &self.written,
            runtime_seconds: manifest.runtime_seconds,
        };
        let text = serde_json::to_string_pretty(&full).expect("manifest serializes") + "\n";
        let path = dir.join("manifest.json");
        fs::write(&path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
    }
}

pub struct Manifest {
    pub subcommand: &'static str,
    pub config: serde_json::Value,
    inputs: Vec<FileDigest>,
    pub runtime_seconds: f64,
}

impl Manifest {
    pub fn new(subcommand: &'static str) -> Self {
        Manifest { subcommand, config: serde_json::Value::Null, inputs: Vec::new(), runtime_seconds: 0.0 }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: digest(bytes) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(digest(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(0.21279), "2.12790000000e-1");
        assert_eq!(num(1.0 / 3.0), "3.33333333333e-1");
    }
}

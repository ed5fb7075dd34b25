//! Run manifests: what was run, on which inputs, and what it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub argv: Vec<String>,
    /// Working directory the command ran in; relative paths in `argv` resolve against it.
    pub cwd: String,
    pub version: String,
    pub seed: u64,
    pub rng: String,
    pub inputs: Vec<FileHash>,
    /// Paths relative to the output directory unless absolute.
    pub outputs: Vec<FileHash>,
    pub exit_code: u8,
    pub error: Option<String>,
    pub elapsed_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Collects input and output files as a command runs.
#[derive(Debug)]
pub struct Recorder {
    pub out_dir: PathBuf,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

impl Recorder {
    pub fn new(out_dir: PathBuf) -> Self {
        Recorder {
            out_dir,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    /// Writes `contents` to `name`, relative to the output directory.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = output_path(&self.out_dir, name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        self.write_at(&path, name.to_string(), contents)?;
        Ok(path)
    }

    fn write_at(&mut self, path: &Path, label: String, contents: &[u8]) -> Result<()> {
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.retain(|o| o.path != label);
        self.outputs.push(FileHash {
            path: label,
            sha256: sha256_hex(contents),
        });
        Ok(())
    }
}

pub fn load(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a manifest", path.display()))
}

/// Resolves an output path against the output directory.
pub fn output_path(out_dir: &Path, recorded: &str) -> PathBuf {
    let p = Path::new(recorded);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out_dir.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn rewriting_a_file_keeps_one_entry() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Recorder::new(dir.path().to_path_buf());
        r.write("a.txt", b"1").unwrap();
        r.write("a.txt", b"2").unwrap();
        assert_eq!(r.outputs.len(), 1);
        assert_eq!(r.outputs[0].sha256, sha256_hex(b"2"));
    }
}

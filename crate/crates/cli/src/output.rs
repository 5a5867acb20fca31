//! Output directory handling and the manifest line stamped on every file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::config_hash;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct Manifest {
    pub command: &'static str,
    pub seed: Option<u64>,
    pub hash: String,
}

impl Manifest {
    pub fn new<T: Serialize>(command: &'static str, seed: Option<u64>, opts: &T) -> Result<Self> {
        Ok(Self {
            command,
            seed,
            hash: config_hash(opts)?,
        })
    }

    pub fn line(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!(
            "tbayes {VERSION} command={} seed={seed} config_sha256={}",
            self.command, self.hash
        )
    }
}

/// Files written by one command. Unless [`Outputs::commit`] is called, everything
/// created is removed again when the value is dropped.
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
            committed: false,
        })
    }

    /// Path for `name` inside the output directory, registered for cleanup.
    pub fn file(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        path
    }

    /// Writes `manifest.toml` with the manifest and the effective options.
    pub fn write_manifest<T: Serialize>(&mut self, manifest: &Manifest, opts: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            tool: &'a str,
            version: &'a str,
            command: &'a str,
            seed: Option<u64>,
            config_sha256: &'a str,
            options: &'a T,
        }
        let doc = Doc {
            tool: "tbayes",
            version: VERSION,
            command: manifest.command,
            seed: manifest.seed,
            config_sha256: &manifest.hash,
            options: opts,
        };
        let path = self.file("manifest.toml");
        fs::write(&path, toml::to_string(&doc)?)?;
        Ok(())
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_outputs_are_removed() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        {
            let mut out = Outputs::create(&dir).unwrap();
            fs::write(out.file("a.csv"), "x").unwrap();
        }
        assert!(!dir.exists());
        {
            let mut out = Outputs::create(&dir).unwrap();
            fs::write(out.file("a.csv"), "x").unwrap();
            out.commit();
        }
        assert!(dir.join("a.csv").exists());
    }

    #[test]
    fn manifest_line_mentions_seed_and_hash() {
        let m = Manifest {
            command: "fit",
            seed: Some(7),
            hash: "abc".into(),
        };
        assert_eq!(m.line(), format!("tbayes {VERSION} command=fit seed=7 config_sha256=abc"));
    }
}

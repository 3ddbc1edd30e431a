//! Run manifests: what was run, with which constants, and the checksum of
//! every file it produced.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{FrozenConstants, Tolerances, FROZEN, TOLERANCES};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub versions: BTreeMap<String, String>,
    pub certify: bool,
    pub jobs: usize,
    /// Reductions over ensemble members are collected in member order, so
    /// results do not depend on the worker count.
    pub reduction_order: String,
    pub tolerances: Tolerances,
    pub constants: FrozenConstants,
    pub config: serde_json::Value,
    pub summary: serde_json::Value,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, config_hash: String, master_seed: u64, certify: bool, jobs: usize) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("cbf-core".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self {
            command: command.to_string(),
            config_hash,
            master_seed,
            versions,
            certify,
            jobs,
            reduction_order: "member-ordered".to_string(),
            tolerances: TOLERANCES,
            constants: FROZEN,
            config,
            summary: serde_json::Value::Null,
            files: Vec::new(),
        }
    }

    /// Hash the listed files under `dir` into the inventory, in sorted order.
    pub fn inventory(&mut self, dir: &Path, files: &[PathBuf]) -> Result<()> {
        let mut out = Vec::with_capacity(files.len());
        for f in files {
            let rel = f.strip_prefix(dir).unwrap_or(f);
            let bytes = fs::read(dir.join(rel))?;
            out.push(FileEntry {
                path: rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            });
        }
        out.sort_by(|a, b| a.path.cmp(&b.path));
        out.dedup_by(|a, b| a.path == b.path);
        self.files = out;
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let p = dir.join(MANIFEST_NAME);
        fs::write(&p, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(p)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let p = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&p).map_err(|e| Error::Integrity(format!("cannot read {}: {e}", p.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Integrity(format!("malformed manifest: {e}")))
    }

    /// Check every listed file against its checksum.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for f in &self.files {
            let bytes = fs::read(dir.join(&f.path)).map_err(|e| Error::Integrity(format!("{} missing: {e}", f.path)))?;
            if sha256_hex(&bytes) != f.sha256 {
                return Err(Error::Integrity(format!("{} does not match its checksum", f.path)));
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn walk(dir: &Path, root: &Path, out: &mut Vec<String>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if e.file_type()?.is_dir() {
            walk(&p, root, out)?;
        } else {
            let rel = p.strip_prefix(root).unwrap_or(&p);
            out.push(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
        }
    }
    Ok(())
}

/// Files under `root` that no manifest in the tree lists, and manifest entries
/// listed more than once across manifests.
pub fn orphan_scan(root: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let mut all = Vec::new();
    walk(root, root, &mut all)?;
    let mut listed: BTreeMap<String, usize> = BTreeMap::new();
    let mut manifests = BTreeSet::new();
    for f in all.iter().filter(|f| f.ends_with(MANIFEST_NAME)) {
        manifests.insert(f.clone());
        let dir = Path::new(f).parent().map(|p| p.to_string_lossy().replace('\\', "/")).unwrap_or_default();
        let m = RunManifest::read(&root.join(&dir))?;
        for e in m.files {
            let full = if dir.is_empty() { e.path } else { format!("{dir}/{}", e.path) };
            *listed.entry(full).or_default() += 1;
        }
    }
    let orphans = all.into_iter().filter(|f| !manifests.contains(f) && !listed.contains_key(f)).collect();
    let doubles = listed.into_iter().filter(|(_, n)| *n > 1).map(|(f, _)| f).collect();
    Ok((orphans, doubles))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orphans_are_found() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        fs::write(dir.path().join("b.csv"), "x\n2\n").unwrap();
        let mut m = RunManifest::new("test", serde_json::Value::Null, String::new(), 0, true, 1);
        m.inventory(dir.path(), &[dir.path().join("a.csv")]).unwrap();
        m.write(dir.path()).unwrap();
        let (orphans, doubles) = orphan_scan(dir.path()).unwrap();
        assert_eq!(orphans, vec!["b.csv".to_string()]);
        assert!(doubles.is_empty());
        m.verify(dir.path()).unwrap();
        fs::write(dir.path().join("a.csv"), "x\n3\n").unwrap();
        assert!(matches!(m.verify(dir.path()), Err(Error::Integrity(_))));
    }
}

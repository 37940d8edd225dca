use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persist;

/// Bumped whenever an on-disk artifact layout changes.
pub const FORMAT_VERSION: u32 = 1;
const RECORD: &str = "stage.json";

/// Root of all cached stage outputs and run manifests.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
    busy: Arc<(Mutex<BTreeSet<String>>, Condvar)>,
}

/// Completed stage: where it lives and the sha256 of every file it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub key: String,
    /// Relative to the store root.
    pub dir: String,
    pub files: BTreeMap<String, String>,
}

/// A stage directory claimed by the current thread. Other threads asking for the same
/// stage block until this handle drops, then usually find it cached.
#[derive(Debug)]
pub struct Stage {
    pub name: &'static str,
    pub key: String,
    pub dir: PathBuf,
    rel: String,
    busy: Arc<(Mutex<BTreeSet<String>>, Condvar)>,
}

impl Drop for Stage {
    fn drop(&mut self) {
        let (lock, cv) = &*self.busy;
        lock.lock().unwrap_or_else(|p| p.into_inner()).remove(&self.rel);
        cv.notify_all();
    }
}

impl Store {
    pub fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Store { root: root.to_path_buf(), busy: Arc::default() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Stage directory `<name>-<key>` where the key hashes the stage name, format and inputs.
    pub fn stage<T: Serialize>(&self, name: &'static str, inputs: &T) -> Result<Stage> {
        let material = serde_json::json!({ "stage": name, "format": FORMAT_VERSION, "inputs": inputs });
        let key = persist::sha256_json(&material)?[..16].to_string();
        let rel = format!("{name}-{key}");
        let (lock, cv) = &*self.busy;
        let mut busy = lock.lock().unwrap_or_else(|p| p.into_inner());
        while busy.contains(&rel) {
            busy = cv.wait(busy).unwrap_or_else(|p| p.into_inner());
        }
        busy.insert(rel.clone());
        drop(busy);
        Ok(Stage { name, dir: self.root.join(&rel), key, rel, busy: Arc::clone(&self.busy) })
    }

    pub fn resolve(&self, record: &StageRecord) -> PathBuf {
        self.root.join(&record.dir)
    }

    /// Re-hashes every file of a record.
    pub fn verify(&self, record: &StageRecord) -> Result<()> {
        let dir = self.resolve(record);
        for (file, hash) in &record.files {
            let actual = persist::sha256_file(&dir.join(file))?;
            if &actual != hash {
                return Err(Error::Integrity(format!("{}/{file} hash mismatch", record.dir)));
            }
        }
        Ok(())
    }
}

impl Stage {
    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    /// The completed record, if the stage finished earlier and its files still verify.
    pub fn cached(&self, store: &Store) -> Option<StageRecord> {
        let record: StageRecord = persist::read_json(&self.path(RECORD)).ok()?;
        (record.key == self.key && store.verify(&record).is_ok()).then_some(record)
    }

    /// Clears partial output from an interrupted attempt.
    pub fn begin(&self) -> Result<()> {
        if self.dir.exists() {
            std::fs::remove_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        }
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))
    }

    /// Hashes the produced files and writes the completion record last.
    pub fn finish(&self, files: &[&str]) -> Result<StageRecord> {
        let mut hashes = BTreeMap::new();
        for f in files {
            hashes.insert(f.to_string(), persist::sha256_file(&self.path(f))?);
        }
        let record =
            StageRecord { name: self.name.into(), key: self.key.clone(), dir: self.rel.clone(), files: hashes };
        persist::write_json(&self.path(RECORD), &record)?;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_depend_on_inputs_and_detect_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path()).unwrap();
        let key = store.stage("encoder", &(1, "x")).unwrap().key.clone();
        let a = store.stage("encoder", &(1, "x")).unwrap();
        assert_eq!(a.key, key);
        assert_ne!(a.key, store.stage("encoder", &(2, "x")).unwrap().key);
        assert_ne!(a.key, store.stage("kernel", &(1, "x")).unwrap().key);
        assert!(a.cached(&store).is_none());
        a.begin().unwrap();
        std::fs::write(a.path("w.bin"), b"abc").unwrap();
        let rec = a.finish(&["w.bin"]).unwrap();
        assert_eq!(a.cached(&store), Some(rec));
        std::fs::write(a.path("w.bin"), b"abd").unwrap();
        assert!(a.cached(&store).is_none());
    }
}

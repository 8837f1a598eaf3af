//! The data directory: long-term store, working memory, the log of
//! everything ingested, and the lock that keeps commands serial.

use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use epilog_core::json::to_canonical_string;
use epilog_core::store::{write_event_log, Event, Store, WorkingMemory};

const STORE_FILE: &str = "store.json";
const WM_FILE: &str = "working_memory.json";
const LOG_FILE: &str = "events.jsonl";
const LOCK_FILE: &str = "lock";

/// Exclusive hold on a data directory, released on drop.
pub struct DataDir {
    root: PathBuf,
    lock: PathBuf,
}

impl DataDir {
    pub fn open(root: &Path) -> Result<DataDir> {
        fs::create_dir_all(root).with_context(|| format!("IoError: {}", root.display()))?;
        let lock = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                bail!("DataDirLocked: {} is held by another process (remove it if stale)", lock.display())
            }
            Err(e) => return Err(anyhow!("IoError: {}: {e}", lock.display())),
        }
        Ok(DataDir { root: root.to_path_buf(), lock })
    }

    pub fn load(&self) -> Result<(Store, WorkingMemory)> {
        let store_path = self.root.join(STORE_FILE);
        let store = if store_path.exists() { Store::load(&store_path)? } else { Store::new() };
        let wm_path = self.root.join(WM_FILE);
        let wm = if wm_path.exists() {
            let text = fs::read_to_string(&wm_path).with_context(|| format!("IoError: {}", wm_path.display()))?;
            serde_json::from_str(&text).map_err(|e| anyhow!("CorruptSnapshot: {}: {e}", wm_path.display()))?
        } else {
            WorkingMemory::new()
        };
        Ok((store, wm))
    }

    pub fn save(&self, store: &Store, wm: &WorkingMemory) -> Result<()> {
        write_atomic(&self.root.join(STORE_FILE), &store.to_snapshot_string())?;
        write_atomic(&self.root.join(WM_FILE), &to_canonical_string(wm)?)
    }

    pub fn append_log(&self, events: &[Event]) -> Result<()> {
        let path = self.root.join(LOG_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .with_context(|| format!("IoError: {}", path.display()))?;
        f.write_all(write_event_log(events).as_bytes()).with_context(|| format!("IoError: {}", path.display()))
    }
}

impl Drop for DataDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).with_context(|| format!("IoError: {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("IoError: {}", path.display()))
}

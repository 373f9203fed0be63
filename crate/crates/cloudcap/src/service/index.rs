//! The archive index: one JSON document at `data/index`, rewritten whole on
//! every change through a temporary file, fsync and rename, so a crash
//! leaves either the old or the new version on disk.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Received,
    Parsing,
    Analyzing,
    Complete,
    Failed,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        matches!(self, Status::Complete | Status::Failed)
    }

    /// One step along received, parsing, analyzing, complete, or from any
    /// non-terminal state to failed.
    pub fn can_move_to(self, next: Status) -> bool {
        matches!(
            (self, next),
            (Status::Received, Status::Parsing)
                | (Status::Parsing, Status::Analyzing)
                | (Status::Analyzing, Status::Complete)
                | (Status::Received | Status::Parsing | Status::Analyzing, Status::Failed)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Received => "received",
            Status::Parsing => "parsing",
            Status::Analyzing => "analyzing",
            Status::Complete => "complete",
            Status::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub capture_id: String,
    pub original_name: String,
    pub uploaded_at: String,
    pub pcap_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    pub packet_count: Option<u64>,
    pub status: Status,
    pub failure_reason: Option<String>,
    pub truncated: bool,
    /// Every status the entry has been in, oldest first.
    pub history: Vec<Status>,
}

#[derive(Debug, thiserror::Error)]
#[error("illegal status change for {id}: {from:?} -> {to:?}")]
pub struct IllegalTransition {
    pub id: String,
    pub from: Status,
    pub to: Status,
}

impl ArchiveEntry {
    pub fn new(capture_id: String, original_name: String, uploaded_at: String, pcap_bytes: u64) -> Self {
        ArchiveEntry {
            capture_id,
            original_name,
            uploaded_at,
            pcap_bytes,
            sha256: None,
            packet_count: None,
            status: Status::Received,
            failure_reason: None,
            truncated: false,
            history: vec![Status::Received],
        }
    }

    /// Moves to `next`. Re-entering the current state is a no-op, which lets
    /// a restarted job walk the pipeline again without rewriting history.
    pub fn advance(&mut self, next: Status) -> Result<(), IllegalTransition> {
        if next == self.status {
            return Ok(());
        }
        if !self.status.can_move_to(next) {
            return Err(IllegalTransition {
                id: self.capture_id.clone(),
                from: self.status,
                to: next,
            });
        }
        self.status = next;
        self.history.push(next);
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("index file {path} is corrupt: {detail}; refusing to start (move it aside to rebuild from scratch)")]
    Corrupt { path: PathBuf, detail: String },
    #[error("index i/o on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    version: u32,
    entries: Vec<ArchiveEntry>,
}

const INDEX_VERSION: u32 = 1;

pub struct Index {
    path: PathBuf,
    entries: RwLock<BTreeMap<String, ArchiveEntry>>,
}

impl Index {
    /// Opens the index at `path`, starting empty when the file does not exist.
    pub fn open(path: impl Into<PathBuf>) -> Result<Index, IndexError> {
        let path = path.into();
        let entries = match fs::read(&path) {
            Ok(bytes) => parse(&path, &bytes)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(source) => return Err(IndexError::Io { path, source }),
        };
        Ok(Index {
            path,
            entries: RwLock::new(entries),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, id: &str) -> Option<ArchiveEntry> {
        self.entries.read().unwrap().get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All entries, newest upload first, ties by capture id.
    pub fn scan(&self) -> Vec<ArchiveEntry> {
        let mut all: Vec<ArchiveEntry> = self.entries.read().unwrap().values().cloned().collect();
        all.sort_by(|a, b| b.uploaded_at.cmp(&a.uploaded_at).then_with(|| a.capture_id.cmp(&b.capture_id)));
        all
    }

    pub fn put(&self, entry: ArchiveEntry) -> Result<(), IndexError> {
        let mut entries = self.entries.write().unwrap();
        let previous = entries.insert(entry.capture_id.clone(), entry.clone());
        if let Err(e) = self.persist(&entries) {
            match previous {
                Some(old) => entries.insert(entry.capture_id, old),
                None => entries.remove(&entry.capture_id),
            };
            return Err(e);
        }
        Ok(())
    }

    /// Applies `f` to the entry under the write lock and persists the result.
    /// Returns `None` for an unknown id.
    pub fn update<T>(&self, id: &str, f: impl FnOnce(&mut ArchiveEntry) -> T) -> Result<Option<(ArchiveEntry, T)>, IndexError> {
        let mut entries = self.entries.write().unwrap();
        let Some(current) = entries.get(id).cloned() else {
            return Ok(None);
        };
        let mut changed = current.clone();
        let out = f(&mut changed);
        if changed == current {
            return Ok(Some((changed, out)));
        }
        entries.insert(id.to_string(), changed.clone());
        if let Err(e) = self.persist(&entries) {
            entries.insert(id.to_string(), current);
            return Err(e);
        }
        Ok(Some((changed, out)))
    }

    fn persist(&self, entries: &BTreeMap<String, ArchiveEntry>) -> Result<(), IndexError> {
        let doc = IndexFile {
            version: INDEX_VERSION,
            entries: entries.values().cloned().collect(),
        };
        let bytes = serde_json::to_vec(&doc).expect("index entries serialize");
        write_atomic(&self.path, &bytes).map_err(|source| IndexError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

fn parse(path: &Path, bytes: &[u8]) -> Result<BTreeMap<String, ArchiveEntry>, IndexError> {
    let corrupt = |detail: String| IndexError::Corrupt {
        path: path.to_path_buf(),
        detail,
    };
    let doc: IndexFile = serde_json::from_slice(bytes).map_err(|e| corrupt(e.to_string()))?;
    if doc.version != INDEX_VERSION {
        return Err(corrupt(format!("unknown version {}", doc.version)));
    }
    let mut map = BTreeMap::new();
    for entry in doc.entries {
        if map.contains_key(&entry.capture_id) {
            return Err(corrupt(format!("duplicate capture id {}", entry.capture_id)));
        }
        map.insert(entry.capture_id.clone(), entry);
    }
    Ok(map)
}

/// Writes `bytes` to a sibling temporary file, syncs it and renames it over
/// `path`, then syncs the directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    sync_dir(dir)
}

pub fn sync_dir(dir: &Path) -> io::Result<()> {
    #[cfg(unix)]
    File::open(dir)?.sync_all()?;
    Ok(())
}

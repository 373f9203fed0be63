//! On-disk layout and the file coordinator that moves uploads from staging
//! into the archive.

use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::index::sync_dir;

pub const RAW_PCAP: &str = "raw.pcap";
pub const REPORT_JSON: &str = "report.json";
pub const PACKETS_NDJSON: &str = "packets.ndjson";
pub const FLOWS_CSV: &str = "flows.csv";

/// data/staging/, data/archive/{id}/ and data/index.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Layout {
        Layout { root: root.into() }
    }

    pub fn create(&self) -> io::Result<()> {
        fs::create_dir_all(self.staging_dir())?;
        fs::create_dir_all(self.archive_root())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index_path(&self) -> PathBuf {
        self.root.join("index")
    }

    pub fn staging_dir(&self) -> PathBuf {
        self.root.join("staging")
    }

    pub fn staged(&self, id: &str) -> PathBuf {
        self.staging_dir().join(format!("{id}.pcap"))
    }

    pub fn archive_root(&self) -> PathBuf {
        self.root.join("archive")
    }

    pub fn archive_dir(&self, id: &str) -> PathBuf {
        self.archive_root().join(id)
    }

    pub fn artifact(&self, id: &str, name: &str) -> PathBuf {
        self.archive_dir(id).join(name)
    }

    pub fn artifacts_present(&self, id: &str) -> bool {
        [REPORT_JSON, PACKETS_NDJSON, FLOWS_CSV]
            .iter()
            .all(|name| self.artifact(id, name).is_file())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("staged upload for {0} is missing")]
    StagingMissing(String),
    #[error("moving {id} into the archive: {source}")]
    Io { id: String, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ingested {
    pub path: PathBuf,
    pub pcap_bytes: u64,
    pub sha256: String,
}

/// Writes an upload into staging and syncs it.
pub fn stage(layout: &Layout, id: &str, body: &[u8]) -> io::Result<PathBuf> {
    let path = layout.staged(id);
    let mut f = File::create(&path)?;
    f.write_all(body)?;
    f.sync_all()?;
    Ok(path)
}

/// Moves the staged upload to archive/{id}/raw.pcap. When the archive copy
/// already exists and nothing is staged the call is a no-op that reports the
/// archived file again.
pub fn ingest(layout: &Layout, id: &str) -> Result<Ingested, IngestError> {
    let io_err = |source| IngestError::Io { id: id.to_string(), source };
    let staged = layout.staged(id);
    let target = layout.artifact(id, RAW_PCAP);
    if staged.exists() {
        let dir = layout.archive_dir(id);
        fs::create_dir_all(&dir).map_err(io_err)?;
        fs::rename(&staged, &target).map_err(io_err)?;
        sync_dir(&dir).map_err(io_err)?;
        sync_dir(&layout.staging_dir()).map_err(io_err)?;
    } else if !target.is_file() {
        return Err(IngestError::StagingMissing(id.to_string()));
    }
    let (pcap_bytes, sha256) = checksum(&target).map_err(io_err)?;
    Ok(Ingested {
        path: target,
        pcap_bytes,
        sha256,
    })
}

/// Size and hex SHA-256 of a file, read in chunks.
pub fn checksum(path: &Path) -> io::Result<(u64, String)> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 64 * 1024];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((total, hex::encode(hasher.finalize())))
}

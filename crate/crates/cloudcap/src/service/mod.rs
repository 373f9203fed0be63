//! The analysis service: upload intake, archive, job queue and REST API.

pub mod analysis;
pub mod api;
pub mod config;
pub mod error;
pub mod index;
pub mod jobs;
pub mod store;

use std::io;
use std::sync::Arc;

use cloudcap_core::dissect::PortTableError;
use cloudcap_core::pcap::{parse_header, GLOBAL_HEADER_LEN};
use cloudcap_core::time::{iso_micros, now_micros};
use cloudcap_core::PortTable;
use rand::Rng;

pub use config::Config;
pub use error::ApiError;
pub use index::{ArchiveEntry, Index, IndexError, Status};
pub use jobs::JobQueue;
pub use store::Layout;

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("creating data directory {path}: {source}")]
    DataDir { path: String, source: io::Error },
    #[error("port table: {0}")]
    PortTable(#[from] PortTableError),
}

pub struct Service {
    pub config: Config,
    pub layout: Layout,
    pub index: Index,
    pub queue: JobQueue,
    pub ports: PortTable,
}

impl Service {
    /// Creates the data directory layout and loads the index. A corrupt
    /// index is an error; nothing is repaired behind the operator's back.
    pub fn open(config: Config) -> Result<Arc<Service>, StartupError> {
        let layout = Layout::new(&config.data_dir);
        layout.create().map_err(|source| StartupError::DataDir {
            path: config.data_dir.display().to_string(),
            source,
        })?;
        let index = Index::open(layout.index_path())?;
        let ports = match &config.port_table {
            Some(path) => PortTable::load(path)?,
            None => PortTable::default(),
        };
        Ok(Arc::new(Service {
            queue: JobQueue::new(config.workers),
            config,
            layout,
            index,
            ports,
        }))
    }

    /// Queues every entry that has not reached a terminal state, oldest
    /// upload first. Returns the queued ids.
    pub fn recover(&self) -> Vec<String> {
        let mut open: Vec<ArchiveEntry> = self.index.scan().into_iter().filter(|e| !e.status.is_terminal()).collect();
        open.reverse();
        open.into_iter()
            .filter(|e| self.queue.enqueue(&e.capture_id))
            .map(|e| e.capture_id)
            .collect()
    }

    /// Starts the worker tasks on the current tokio runtime.
    pub fn spawn_workers(self: &Arc<Self>) {
        for _ in 0..self.queue.workers() {
            let svc = Arc::clone(self);
            tokio::spawn(async move {
                loop {
                    let id = svc.queue.next().await;
                    let job = {
                        let svc = Arc::clone(&svc);
                        let id = id.clone();
                        tokio::task::spawn_blocking(move || analysis::run_analysis(&svc, &id))
                    };
                    match job.await {
                        Ok(Ok(status)) => tracing::info!(capture_id = %id, status = status.as_str(), "job finished"),
                        Ok(Err(e)) => tracing::error!(capture_id = %id, error = %e, "job error"),
                        Err(e) => tracing::error!(capture_id = %id, error = %e, "job panicked"),
                    }
                    svc.queue.finish(&id);
                }
            });
        }
    }

    /// Validates and stages an upload, records it and queues its analysis.
    pub fn submit(&self, body: &[u8], original_name: &str) -> Result<ArchiveEntry, ApiError> {
        if body.is_empty() {
            return Err(ApiError::empty_body());
        }
        if body.len() as u64 > self.config.max_upload_bytes {
            return Err(ApiError::too_large(self.config.max_upload_bytes));
        }
        check_magic(body)?;

        let id = self.new_id();
        store::stage(&self.layout, &id, body).map_err(ApiError::internal)?;
        let entry = ArchiveEntry::new(id.clone(), original_name.to_string(), iso_micros(now_micros()), body.len() as u64);
        self.index.put(entry.clone()).map_err(ApiError::internal)?;
        self.queue.enqueue(&id);
        Ok(entry)
    }

    fn new_id(&self) -> String {
        let mut rng = rand::rng();
        loop {
            let id = format!("{:016x}", rng.random::<u64>());
            if self.index.get(&id).is_none() {
                return id;
            }
        }
    }
}

/// Accepts the body when its first 24 bytes are a classic pcap header.
pub fn check_magic(body: &[u8]) -> Result<(), ApiError> {
    let Some(head) = body.get(..GLOBAL_HEADER_LEN) else {
        return Err(ApiError::not_pcap(format!("only {} bytes", body.len())));
    };
    let head: &[u8; GLOBAL_HEADER_LEN] = head.try_into().expect("slice of header length");
    parse_header(head).map(|_| ()).map_err(ApiError::not_pcap)
}

pub fn is_capture_id(s: &str) -> bool {
    s.len() == 16 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

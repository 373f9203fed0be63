//! The capture agent: produce or take a pcap, filter it, upload it and
//! follow its analysis.

pub mod capture;
pub mod cli;
pub mod client;

pub use capture::{CaptureOutcome, CaptureSource, CaptureSpec, ProtoFilter};
pub use client::{upload, watch, UploadOptions, WatchOptions, WatchOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPTURE: i32 = 3;
pub const EXIT_ANALYSIS_FAILED: i32 = 4;
pub const EXIT_TIMEOUT: i32 = 5;
pub const EXIT_UPLOAD_FAILED: i32 = 6;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("sniffer not found: {0}")]
    SnifferNotFound(String),
    #[error("sniffer exited with {}: {stderr_tail}", code.map_or("a signal".to_string(), |c| format!("status {c}")))]
    SnifferNonZeroExit { code: Option<i32>, stderr_tail: String },
    #[error("capture: {0}")]
    Capture(String),
    #[error("upload failed after {attempts} attempts: {last}")]
    UploadFailedAfterRetries { attempts: u32, last: String },
    #[error("server rejected the upload ({status}): {body}")]
    ServerRejected { status: u16, body: String },
    #[error("analysis failed: {0}")]
    AnalysisFailed(String),
    #[error("timed out: {0}")]
    Timeout(String),
}

impl AgentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AgentError::Usage(_) => EXIT_USAGE,
            AgentError::InvalidInput(_)
            | AgentError::SnifferNotFound(_)
            | AgentError::SnifferNonZeroExit { .. }
            | AgentError::Capture(_) => EXIT_CAPTURE,
            AgentError::AnalysisFailed(_) => EXIT_ANALYSIS_FAILED,
            AgentError::Timeout(_) => EXIT_TIMEOUT,
            AgentError::UploadFailedAfterRetries { .. } | AgentError::ServerRejected { .. } => EXIT_UPLOAD_FAILED,
        }
    }
}

//! Talking to the analysis service: upload with retries, then poll until
//! the analysis ends.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::Value;

use super::AgentError;

pub const DEFAULT_RETRIES: u32 = 3;
pub const DEFAULT_BACKOFF: Duration = Duration::from_secs(1);
const POLL_REQUEST_TIMEOUT: Duration = Duration::from_secs(10);

fn api(server: &str, path: &str) -> String {
    format!("{}/api/v1{path}", server.trim_end_matches('/'))
}

#[derive(Debug, Clone)]
pub struct UploadOptions {
    pub retries: u32,
    /// Wait before the first retry; doubled for each later one.
    pub backoff: Duration,
}

impl Default for UploadOptions {
    fn default() -> Self {
        UploadOptions {
            retries: DEFAULT_RETRIES,
            backoff: DEFAULT_BACKOFF,
        }
    }
}

#[derive(Deserialize)]
struct Created {
    capture_id: String,
}

/// Posts the file and returns the capture id. Connection failures and 5xx
/// answers are retried; a 4xx answer is final.
pub fn upload(server: &str, file: &Path, opts: &UploadOptions) -> Result<String, AgentError> {
    let body = fs::read(file).map_err(|e| AgentError::InvalidInput(format!("{}: {e}", file.display())))?;
    let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let client = Client::builder()
        .connect_timeout(Duration::from_secs(10))
        .timeout(Duration::from_secs(600))
        .build()
        .map_err(|e| AgentError::UploadFailedAfterRetries { attempts: 0, last: e.to_string() })?;
    let url = api(server, "/captures");
    let attempts = opts.retries + 1;
    let mut delay = opts.backoff;
    let mut last = String::new();
    for attempt in 1..=attempts {
        let response = client
            .post(&url)
            .header("content-type", "application/vnd.tcpdump.pcap")
            .header("x-filename", &name)
            .body(body.clone())
            .send();
        match response {
            Ok(r) if r.status() == StatusCode::CREATED => {
                let created: Created = r.json().map_err(|e| AgentError::UploadFailedAfterRetries {
                    attempts: attempt,
                    last: format!("unreadable response: {e}"),
                })?;
                return Ok(created.capture_id);
            }
            Ok(r) if r.status().is_client_error() => {
                let status = r.status().as_u16();
                let body = r.text().unwrap_or_default();
                return Err(AgentError::ServerRejected { status, body });
            }
            Ok(r) => last = format!("HTTP {}: {}", r.status().as_u16(), r.text().unwrap_or_default()),
            Err(e) => last = e.to_string(),
        }
        if attempt < attempts {
            eprintln!("upload attempt {attempt} failed ({last}); retrying in {:.1} s", delay.as_secs_f64());
            thread::sleep(delay);
            delay *= 2;
        }
    }
    Err(AgentError::UploadFailedAfterRetries { attempts, last })
}

#[derive(Debug, Clone)]
pub struct WatchOptions {
    pub interval: Duration,
    pub timeout: Duration,
    /// Where to save the report.
    pub report_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WatchOutcome {
    pub capture_id: String,
    pub report_path: PathBuf,
    pub total_packets: u64,
    pub duration_s: String,
    pub top_protocol: Option<String>,
    pub truncated: bool,
}

impl WatchOutcome {
    pub fn summary_line(&self) -> String {
        format!(
            "{}: {} packets over {} s, top protocol {}{}",
            self.capture_id,
            self.total_packets,
            self.duration_s,
            self.top_protocol.as_deref().unwrap_or("none"),
            if self.truncated { " (truncated input)" } else { "" }
        )
    }
}

#[derive(Deserialize)]
struct StatusView {
    status: String,
    failure_reason: Option<String>,
}

/// Polls the capture's status until it is complete or failed. On complete
/// the report is downloaded to `opts.report_path`.
pub fn watch(server: &str, capture_id: &str, opts: &WatchOptions) -> Result<WatchOutcome, AgentError> {
    let deadline = Instant::now() + opts.timeout;
    let client = Client::builder()
        .connect_timeout(POLL_REQUEST_TIMEOUT)
        .build()
        .map_err(|e| AgentError::AnalysisFailed(e.to_string()))?;
    let timeout = || AgentError::Timeout(format!("capture {capture_id} not finished after {:.1} s", opts.timeout.as_secs_f64()));
    let status_url = api(server, &format!("/captures/{capture_id}"));
    loop {
        let remaining = deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            return Err(timeout());
        }
        let response = client.get(&status_url).timeout(remaining.min(POLL_REQUEST_TIMEOUT)).send();
        match response {
            Ok(r) if r.status().is_success() => {
                let view: StatusView = r.json().map_err(|e| AgentError::AnalysisFailed(format!("unreadable status: {e}")))?;
                match view.status.as_str() {
                    "complete" => return fetch_report(&client, server, capture_id, opts, deadline),
                    "failed" => {
                        return Err(AgentError::AnalysisFailed(view.failure_reason.unwrap_or_else(|| "no reason given".into())))
                    }
                    _ => {}
                }
            }
            Ok(r) if r.status().is_client_error() => {
                let status = r.status().as_u16();
                return Err(AgentError::AnalysisFailed(format!("HTTP {status}: {}", r.text().unwrap_or_default())));
            }
            // server errors and dropped connections are retried until the deadline
            Ok(_) | Err(_) => {}
        }
        let remaining = deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            return Err(timeout());
        }
        thread::sleep(opts.interval.min(remaining));
    }
}

fn fetch_report(client: &Client, server: &str, id: &str, opts: &WatchOptions, deadline: Instant) -> Result<WatchOutcome, AgentError> {
    let remaining = deadline.saturating_duration_since(Instant::now()).max(Duration::from_millis(1));
    let r = client
        .get(api(server, &format!("/captures/{id}/report")))
        .timeout(remaining.max(POLL_REQUEST_TIMEOUT))
        .send()
        .map_err(|e| AgentError::AnalysisFailed(format!("downloading report: {e}")))?;
    if !r.status().is_success() {
        return Err(AgentError::AnalysisFailed(format!("downloading report: HTTP {}", r.status().as_u16())));
    }
    let bytes = r.bytes().map_err(|e| AgentError::AnalysisFailed(format!("downloading report: {e}")))?;
    let report: Value = serde_json::from_slice(&bytes).map_err(|e| AgentError::AnalysisFailed(format!("report is not JSON: {e}")))?;
    fs::write(&opts.report_path, &bytes)
        .map_err(|e| AgentError::AnalysisFailed(format!("saving report to {}: {e}", opts.report_path.display())))?;
    Ok(WatchOutcome {
        capture_id: id.to_string(),
        report_path: opts.report_path.clone(),
        total_packets: report["summary"]["total_packets"].as_u64().unwrap_or(0),
        duration_s: report["summary"]["duration_s"].to_string(),
        top_protocol: report["protocols"][0]["name"].as_str().map(str::to_string),
        truncated: report["truncated"].as_bool().unwrap_or(false),
    })
}

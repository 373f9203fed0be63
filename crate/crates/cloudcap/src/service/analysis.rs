//! The analysis job: ingest, parse and dissect, then write the report, the
//! per-packet summaries and the flow table. The entry becomes complete only
//! after all three artifacts are on disk, so a job killed part way is simply
//! run again at the next start.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::thread;

use cloudcap_core::flow::flows_csv;
use cloudcap_core::stats::series_len;
use cloudcap_core::{aggregate, build_report, dissect_capture, DissectedPacket, FlowTimeouts};

use super::index::{sync_dir, write_atomic, ArchiveEntry, IndexError, Status};
use super::store::{self, FLOWS_CSV, PACKETS_NDJSON, RAW_PCAP, REPORT_JSON};
use super::Service;

/// Longest packets-per-second series a report may carry. Timestamps spread
/// over more than this many seconds are rejected instead of allocating it.
pub const MAX_SERIES_SECONDS: u64 = 10_000_000;

#[derive(Debug, thiserror::Error)]
pub enum JobError {
    #[error("unknown capture {0}")]
    Unknown(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("{0}")]
    Transition(#[from] super::index::IllegalTransition),
}

/// Runs or resumes the job for `id` and returns the status it ends in.
pub fn run_analysis(svc: &Service, id: &str) -> Result<Status, JobError> {
    let entry = svc.index.get(id).ok_or_else(|| JobError::Unknown(id.to_string()))?;
    if entry.status.is_terminal() {
        return Ok(entry.status);
    }
    match analyze(svc, &entry) {
        Ok(()) => Ok(Status::Complete),
        Err(Failure::Reason(reason)) => {
            tracing::warn!(capture_id = id, %reason, "analysis failed");
            svc.index.update(id, |e| {
                e.failure_reason = Some(reason);
                e.advance(Status::Failed)
            })?;
            Ok(Status::Failed)
        }
        Err(Failure::Job(e)) => Err(e),
    }
}

enum Failure {
    Reason(String),
    Job(JobError),
}

impl<E: Into<JobError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Job(e.into())
    }
}

fn reason(text: impl Into<String>) -> Failure {
    Failure::Reason(text.into())
}

fn step(svc: &Service, id: &str, f: impl FnOnce(&mut ArchiveEntry)) -> Result<ArchiveEntry, Failure> {
    let (entry, ()) = svc.index.update(id, f)?.ok_or_else(|| JobError::Unknown(id.to_string()))?;
    Ok(entry)
}

fn advance(svc: &Service, id: &str, status: Status, f: impl FnOnce(&mut ArchiveEntry)) -> Result<ArchiveEntry, Failure> {
    let (entry, moved) = svc
        .index
        .update(id, |e| {
            f(e);
            // a resumed job passes states it already went through
            if e.history.contains(&status) {
                Ok(())
            } else {
                e.advance(status)
            }
        })?
        .ok_or_else(|| JobError::Unknown(id.to_string()))?;
    moved?;
    pause(svc);
    Ok(entry)
}

fn pause(svc: &Service) {
    if !svc.config.stage_delay.is_zero() {
        thread::sleep(svc.config.stage_delay);
    }
}

fn analyze(svc: &Service, entry: &ArchiveEntry) -> Result<(), Failure> {
    let id = entry.capture_id.as_str();
    let layout = &svc.layout;

    let ingested = store::ingest(layout, id).map_err(|e| reason(e.to_string()))?;
    step(svc, id, |e| {
        e.pcap_bytes = ingested.pcap_bytes;
        e.sha256 = Some(ingested.sha256.clone());
    })?;
    advance(svc, id, Status::Parsing, |_| ())?;

    let file = File::open(layout.artifact(id, RAW_PCAP)).map_err(|e| reason(format!("opening raw capture: {e}")))?;
    let capture = match dissect_capture(BufReader::new(file), &svc.ports) {
        Ok(c) => c,
        Err(e) if e.is_not_pcap() => return Err(reason(format!("not a pcap: {e}"))),
        Err(e) => return Err(reason(e.to_string())),
    };
    if capture.truncated && capture.packets.is_empty() {
        return Err(reason("TruncatedRecord: the file ends inside its first record"));
    }
    let span = series_len(&capture.packets);
    if span > MAX_SERIES_SECONDS {
        return Err(reason(format!(
            "timestamps span {span} seconds, more than the {MAX_SERIES_SECONDS} a per-second series may cover"
        )));
    }
    let count = capture.packets.len() as u64;
    advance(svc, id, Status::Analyzing, |e| {
        e.packet_count = Some(count);
        e.truncated = capture.truncated;
    })?;

    let generated_at = generated_at_us(&entry.uploaded_at);
    let report = build_report(id, generated_at, &capture.packets, capture.truncated);
    let flows = aggregate(&capture.packets, &FlowTimeouts::default());
    let artifacts = (|| -> io::Result<()> {
        write_packets(&layout.artifact(id, PACKETS_NDJSON), &capture.packets)?;
        write_atomic(&layout.artifact(id, REPORT_JSON), &report.to_json())?;
        write_atomic(&layout.artifact(id, FLOWS_CSV), &flows_csv(&flows))?;
        sync_dir(&layout.archive_dir(id))
    })();
    artifacts.map_err(|e| reason(format!("writing artifacts: {e}")))?;
    pause(svc);

    if !layout.artifacts_present(id) {
        return Err(reason("artifacts missing after write"));
    }
    advance(svc, id, Status::Complete, |_| ())?;
    Ok(())
}

/// Reports are stamped with the upload time so that rerunning a job yields
/// the same bytes.
fn generated_at_us(uploaded_at: &str) -> i64 {
    chrono::DateTime::parse_from_rfc3339(uploaded_at)
        .map(|t| t.timestamp_micros())
        .unwrap_or(0)
}

fn write_packets(path: &Path, packets: &[DissectedPacket]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(".packets.ndjson.tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        for p in packets {
            serde_json::to_writer(&mut w, p)?;
            w.write_all(b"\n")?;
        }
        let f = w.into_inner().map_err(|e| e.into_error())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Packets `offset..offset+limit` from a packets.ndjson file.
pub fn read_packet_page(path: &Path, offset: u64, limit: u64) -> io::Result<Vec<DissectedPacket>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines().skip(offset as usize).take(limit as usize) {
        let p: DissectedPacket = serde_json::from_str(&line?)?;
        out.push(p);
    }
    Ok(out)
}

pub fn read_all_packets(path: &Path) -> io::Result<Vec<DissectedPacket>> {
    read_packet_page(path, 0, u64::MAX)
}

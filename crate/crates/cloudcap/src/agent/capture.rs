//! Producing the capture file: either filtering an existing pcap or running
//! an external sniffer and filtering what it wrote. Filtering always goes
//! through this crate's dissector so both paths select the same packets.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use cloudcap_core::{Dissector, DissectedPacket, PcapError, PcapReader, PcapWriter, PortTable, Transport};

use super::AgentError;

pub const SNIFFER_ENV: &str = "CLOUDCAP_SNIFFER_CMD";

/// How long a sniffer may keep running past its duration before it is stopped.
pub const SNIFFER_GRACE: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Proto {
    Tcp,
    Udp,
    Icmp,
    Dns,
    Tls,
}

impl Proto {
    pub fn as_str(self) -> &'static str {
        match self {
            Proto::Tcp => "tcp",
            Proto::Udp => "udp",
            Proto::Icmp => "icmp",
            Proto::Dns => "dns",
            Proto::Tls => "tls",
        }
    }

    /// The sniffer-side filter expression for this protocol.
    pub fn expression(self) -> &'static str {
        match self {
            Proto::Tcp => "tcp",
            Proto::Udp => "udp",
            Proto::Icmp => "icmp or icmp6",
            Proto::Dns => "port 53",
            Proto::Tls => "tcp port 443",
        }
    }

    pub fn matches(self, p: &DissectedPacket) -> bool {
        match self {
            Proto::Tcp => p.transport == Transport::Tcp,
            Proto::Udp => p.transport == Transport::Udp,
            Proto::Icmp => matches!(p.transport, Transport::Icmp | Transport::Icmpv6),
            Proto::Dns => p.protocol_label == "DNS",
            Proto::Tls => p.is_tls,
        }
    }
}

impl FromStr for Proto {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tcp" => Ok(Proto::Tcp),
            "udp" => Ok(Proto::Udp),
            "icmp" => Ok(Proto::Icmp),
            "dns" => Ok(Proto::Dns),
            "tls" => Ok(Proto::Tls),
            other => Err(format!("unknown protocol {other:?}; expected tcp, udp, icmp, dns or tls")),
        }
    }
}

/// A set of protocols; a packet passes when it matches any of them. The
/// empty set passes everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProtoFilter(pub BTreeSet<Proto>);

impl ProtoFilter {
    pub fn all() -> Self {
        ProtoFilter::default()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn matches(&self, p: &DissectedPacket) -> bool {
        self.is_empty() || self.0.iter().any(|proto| proto.matches(p))
    }

    /// Filter expression for the sniffer; empty when everything passes.
    pub fn expression(&self) -> String {
        match self.0.len() {
            0 => String::new(),
            1 => self.0.iter().next().unwrap().expression().to_string(),
            _ => self.0.iter().map(|p| format!("({})", p.expression())).collect::<Vec<_>>().join(" or "),
        }
    }
}

impl FromStr for ProtoFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = BTreeSet::new();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            set.insert(part.parse()?);
        }
        Ok(ProtoFilter(set))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaptureSource {
    File(PathBuf),
    Sniffer { iface: String, duration: Duration },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSpec {
    pub source: CaptureSource,
    pub filter: ProtoFilter,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureOutcome {
    pub path: PathBuf,
    pub packets_in: u64,
    pub packets_out: u64,
    /// The input ended inside a record; the complete prefix was kept.
    pub truncated: bool,
}

pub fn capture(spec: &CaptureSpec) -> Result<CaptureOutcome, AgentError> {
    match &spec.source {
        CaptureSource::File(input) => filter_file(input, &spec.output, &spec.filter),
        CaptureSource::Sniffer { iface, duration } => {
            let template = std::env::var(SNIFFER_ENV).unwrap_or_default();
            sniff(&template, iface, *duration, spec)
        }
    }
}

/// Copies the packets of `input` that pass `filter` into `output`, keeping
/// the input's header. With an empty filter a well-formed file is copied
/// byte for byte.
pub fn filter_file(input: &Path, output: &Path, filter: &ProtoFilter) -> Result<CaptureOutcome, AgentError> {
    let file = File::open(input).map_err(|e| AgentError::InvalidInput(format!("{}: {e}", input.display())))?;
    let tmp = sibling_tmp(output);
    let result = filter_stream(BufReader::new(file), &tmp, filter);
    match result {
        Ok((packets_in, packets_out, truncated)) => {
            fs::rename(&tmp, output).map_err(|e| AgentError::Capture(format!("{}: {e}", output.display())))?;
            if truncated {
                eprintln!(
                    "warning: {} ends inside a record; kept the {packets_in} complete packets before it",
                    input.display()
                );
            }
            Ok(CaptureOutcome {
                path: output.to_path_buf(),
                packets_in,
                packets_out,
                truncated,
            })
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn sibling_tmp(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.partial"))
}

fn filter_stream<R: Read>(source: R, output: &Path, filter: &ProtoFilter) -> Result<(u64, u64, bool), AgentError> {
    let mut reader = PcapReader::new(source).map_err(|e| match e {
        PcapError::Io(e) => AgentError::InvalidInput(e.to_string()),
        other => AgentError::InvalidInput(other.to_string()),
    })?;
    let header = reader.header().clone();
    let ports = PortTable::default();
    let mut dissector = Dissector::new(&ports, header.linktype, header.ts_precision);
    let out = File::create(output).map_err(|e| AgentError::Capture(format!("{}: {e}", output.display())))?;
    let write_err = |e: PcapError| AgentError::Capture(format!("writing {}: {e}", output.display()));
    let mut writer = PcapWriter::new(BufWriter::new(out), header).map_err(write_err)?;
    let (mut seen, mut kept) = (0u64, 0u64);
    let truncated = loop {
        match reader.next_packet() {
            Ok(Some(record)) => {
                seen += 1;
                let packet = dissector.dissect(&record);
                if filter.matches(&packet) {
                    writer.write_record(&record).map_err(write_err)?;
                    kept += 1;
                }
            }
            Ok(None) => break false,
            Err(PcapError::TruncatedRecord { .. }) => break true,
            Err(e) => return Err(AgentError::InvalidInput(e.to_string())),
        }
    };
    let mut sink = writer.finish().map_err(write_err)?;
    sink.flush().map_err(|e| write_err(e.into()))?;
    sink.get_ref().sync_all().map_err(|e| write_err(e.into()))?;
    Ok((seen, kept, truncated))
}

/// Splits the command template on whitespace and fills in the
/// placeholders. `{filter}` stays a single argument; a token that is only
/// `{filter}` is dropped when the filter is empty.
pub fn sniffer_argv(template: &str, iface: &str, filter: &str, out: &Path, duration: Duration) -> Vec<String> {
    let out = out.display().to_string();
    let secs = duration.as_secs_f64();
    let duration = if secs.fract() == 0.0 { format!("{}", secs as u64) } else { format!("{secs}") };
    template
        .split_whitespace()
        .filter(|tok| !(*tok == "{filter}" && filter.is_empty()))
        .map(|tok| {
            tok.replace("{iface}", iface)
                .replace("{filter}", filter)
                .replace("{out}", &out)
                .replace("{duration}", &duration)
        })
        .collect()
}

fn sniff(template: &str, iface: &str, duration: Duration, spec: &CaptureSpec) -> Result<CaptureOutcome, AgentError> {
    let raw = sibling_tmp(&spec.output).with_extension("raw");
    let argv = sniffer_argv(template, iface, &spec.filter.expression(), &raw, duration);
    let Some((program, args)) = argv.split_first() else {
        return Err(AgentError::SnifferNotFound(format!("{SNIFFER_ENV} is not set")));
    };
    let _ = fs::remove_file(&raw);
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                AgentError::SnifferNotFound(format!("{program}: {e}"))
            }
            _ => AgentError::Capture(format!("starting {program}: {e}")),
        })?;
    let stderr = child.stderr.take().expect("piped stderr");
    let stderr_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = BufReader::new(stderr).read_to_end(&mut buf);
        buf
    });

    // watchdog: interrupt at the end of the duration, kill after the grace period
    let started = Instant::now();
    let mut interrupted = false;
    let status = loop {
        if let Some(status) = child.try_wait().map_err(|e| AgentError::Capture(e.to_string()))? {
            break status;
        }
        let elapsed = started.elapsed();
        if !interrupted && elapsed >= duration {
            interrupt(&mut child);
            interrupted = true;
        } else if elapsed >= duration + SNIFFER_GRACE {
            let _ = child.kill();
            break child.wait().map_err(|e| AgentError::Capture(e.to_string()))?;
        }
        thread::sleep(Duration::from_millis(20));
    };
    let stderr = stderr_reader.join().unwrap_or_default();
    if !status.success() && !interrupted {
        let _ = fs::remove_file(&raw);
        return Err(AgentError::SnifferNonZeroExit {
            code: status.code(),
            stderr_tail: tail(&stderr, 512),
        });
    }
    if !raw.is_file() {
        return Err(AgentError::Capture(format!("sniffer wrote no file at {}", raw.display())));
    }
    let outcome = filter_file(&raw, &spec.output, &spec.filter);
    let _ = fs::remove_file(&raw);
    outcome
}

#[cfg(unix)]
fn interrupt(child: &mut std::process::Child) {
    // SIGINT lets sniffers such as tcpdump flush their buffers
    unsafe {
        libc::kill(child.id() as libc::pid_t, libc::SIGINT);
    }
}

#[cfg(not(unix))]
fn interrupt(child: &mut std::process::Child) {
    let _ = child.kill();
}

fn tail(bytes: &[u8], max: usize) -> String {
    let text = String::from_utf8_lossy(bytes);
    let text = text.trim_end();
    let start = text.len().saturating_sub(max);
    let start = (start..=text.len()).find(|&i| text.is_char_boundary(i)).unwrap_or(text.len());
    text[start..].to_string()
}

//! Bidirectional flow aggregation over dissected packets.
//!
//! Packets are grouped by a canonical 5-tuple so both directions of a
//! conversation share one key. A flow stays open until a packet arrives more
//! than the idle timeout after its last packet, or more than the active
//! timeout after its first packet; that packet then starts a new flow.
//! TCP FIN/RST do not close flows.

use std::collections::HashMap;
use std::io::Write;
use std::net::IpAddr;

use thiserror::Error;

use crate::dissect::{DissectedPacket, Transport};
use crate::time::{iso_micros, seconds_text};

pub const DEFAULT_IDLE_TIMEOUT_S: f64 = 15.0;
pub const DEFAULT_ACTIVE_TIMEOUT_S: f64 = 120.0;

pub const CSV_COLUMNS: [&str; 15] = [
    "flow_id",
    "src_ip",
    "src_port",
    "dst_ip",
    "dst_port",
    "protocol",
    "first_ts",
    "last_ts",
    "duration_s",
    "fwd_packets",
    "bwd_packets",
    "fwd_bytes",
    "bwd_bytes",
    "tcp_flags_hex",
    "is_tls",
];

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("{name} must be a positive number of seconds, got {value}")]
    NonPositiveTimeout { name: &'static str, value: f64 },
}

/// Canonical 5-tuple: the (address, port) pair that sorts first is `lo`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub addr_lo: IpAddr,
    pub port_lo: u16,
    pub addr_hi: IpAddr,
    pub port_hi: u16,
    pub transport: Transport,
}

/// Which way a packet travels relative to the canonical key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    LoToHi,
    HiToLo,
}

impl FlowKey {
    pub fn new(src: IpAddr, src_port: u16, dst: IpAddr, dst_port: u16, transport: Transport) -> (FlowKey, Direction) {
        if (src, src_port) <= (dst, dst_port) {
            let key = FlowKey {
                addr_lo: src,
                port_lo: src_port,
                addr_hi: dst,
                port_hi: dst_port,
                transport,
            };
            (key, Direction::LoToHi)
        } else {
            let key = FlowKey {
                addr_lo: dst,
                port_lo: dst_port,
                addr_hi: src,
                port_hi: src_port,
                transport,
            };
            (key, Direction::HiToLo)
        }
    }
}

/// Key and direction of a TCP or UDP packet; `None` for everything else.
pub fn flow_key(p: &DissectedPacket) -> Option<(FlowKey, Direction)> {
    if !p.is_flow_eligible() {
        return None;
    }
    Some(FlowKey::new(p.src_addr?, p.src_port?, p.dst_addr?, p.dst_port?, p.transport))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowTimeouts {
    idle_us: i64,
    active_us: i64,
}

impl Default for FlowTimeouts {
    fn default() -> Self {
        FlowTimeouts::from_secs(DEFAULT_IDLE_TIMEOUT_S, DEFAULT_ACTIVE_TIMEOUT_S).unwrap()
    }
}

impl FlowTimeouts {
    pub fn from_secs(idle_s: f64, active_s: f64) -> Result<Self, FlowError> {
        Ok(FlowTimeouts {
            idle_us: secs_to_us("idle_timeout_s", idle_s)?,
            active_us: secs_to_us("active_timeout_s", active_s)?,
        })
    }

    pub fn idle_us(&self) -> i64 {
        self.idle_us
    }

    pub fn active_us(&self) -> i64 {
        self.active_us
    }

    pub fn is_default(&self) -> bool {
        *self == FlowTimeouts::default()
    }
}

fn secs_to_us(name: &'static str, value: f64) -> Result<i64, FlowError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(FlowError::NonPositiveTimeout { name, value });
    }
    let us = (value * 1e6).round();
    if us < 1.0 {
        return Err(FlowError::NonPositiveTimeout { name, value });
    }
    Ok(us.min(i64::MAX as f64) as i64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRecord {
    pub flow_id: u64,
    pub key: FlowKey,
    /// Direction of the first packet; "forward" counters follow it.
    pub initiator: Direction,
    pub first_ts_us: i64,
    pub last_ts_us: i64,
    pub fwd_packets: u64,
    pub bwd_packets: u64,
    pub fwd_bytes: u64,
    pub bwd_bytes: u64,
    pub tcp_flags: u8,
    pub is_tls: bool,
}

impl FlowRecord {
    fn open(flow_id: u64, key: FlowKey, dir: Direction, p: &DissectedPacket) -> Self {
        let mut flow = FlowRecord {
            flow_id,
            key,
            initiator: dir,
            first_ts_us: p.ts_us,
            last_ts_us: p.ts_us,
            fwd_packets: 0,
            bwd_packets: 0,
            fwd_bytes: 0,
            bwd_bytes: 0,
            tcp_flags: 0,
            is_tls: false,
        };
        flow.add(dir, p);
        flow
    }

    fn add(&mut self, dir: Direction, p: &DissectedPacket) {
        if dir == self.initiator {
            self.fwd_packets += 1;
            self.fwd_bytes += u64::from(p.frame_len);
        } else {
            self.bwd_packets += 1;
            self.bwd_bytes += u64::from(p.frame_len);
        }
        // capture timestamps are not guaranteed to be monotonic
        self.first_ts_us = self.first_ts_us.min(p.ts_us);
        self.last_ts_us = self.last_ts_us.max(p.ts_us);
        if p.transport == Transport::Tcp {
            self.tcp_flags |= p.tcp_flags;
        }
        self.is_tls |= p.is_tls;
    }

    fn expired(&self, ts_us: i64, timeouts: &FlowTimeouts) -> bool {
        ts_us - self.last_ts_us > timeouts.idle_us || ts_us - self.first_ts_us > timeouts.active_us
    }

    pub fn packets(&self) -> u64 {
        self.fwd_packets + self.bwd_packets
    }

    /// Initiator side as (address, port).
    pub fn src(&self) -> (IpAddr, u16) {
        match self.initiator {
            Direction::LoToHi => (self.key.addr_lo, self.key.port_lo),
            Direction::HiToLo => (self.key.addr_hi, self.key.port_hi),
        }
    }

    pub fn dst(&self) -> (IpAddr, u16) {
        match self.initiator {
            Direction::LoToHi => (self.key.addr_hi, self.key.port_hi),
            Direction::HiToLo => (self.key.addr_lo, self.key.port_lo),
        }
    }
}

/// Groups packets (in file order) into flows, ordered by first timestamp
/// and then by creation order.
pub fn aggregate<'a, I>(packets: I, timeouts: &FlowTimeouts) -> Vec<FlowRecord>
where
    I: IntoIterator<Item = &'a DissectedPacket>,
{
    let mut flows: Vec<FlowRecord> = Vec::new();
    let mut open: HashMap<FlowKey, usize> = HashMap::new();

    for p in packets {
        let Some((key, dir)) = flow_key(p) else {
            continue;
        };
        if let Some(&slot) = open.get(&key) {
            if !flows[slot].expired(p.ts_us, timeouts) {
                flows[slot].add(dir, p);
                continue;
            }
        }
        let slot = flows.len();
        flows.push(FlowRecord::open(slot as u64, key.clone(), dir, p));
        open.insert(key, slot);
    }

    flows.sort_by_key(|f| (f.first_ts_us, f.flow_id));
    flows
}

/// Writes the flow table as CSV: a header row, then one row per flow.
pub fn export_flows<W: Write>(flows: &[FlowRecord], sink: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    w.write_record(CSV_COLUMNS)?;
    for f in flows {
        let (src_ip, src_port) = f.src();
        let (dst_ip, dst_port) = f.dst();
        w.write_record([
            f.flow_id.to_string(),
            src_ip.to_string(),
            src_port.to_string(),
            dst_ip.to_string(),
            dst_port.to_string(),
            f.key.transport.as_str().to_string(),
            iso_micros(f.first_ts_us),
            iso_micros(f.last_ts_us),
            seconds_text(f.last_ts_us - f.first_ts_us),
            f.fwd_packets.to_string(),
            f.bwd_packets.to_string(),
            f.fwd_bytes.to_string(),
            f.bwd_bytes.to_string(),
            format!("{:#04x}", f.tcp_flags),
            f.is_tls.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn flows_csv(flows: &[FlowRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    export_flows(flows, &mut out).expect("writing to a Vec cannot fail");
    out
}

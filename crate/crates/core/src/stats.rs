//! The six report datasets and the report document that carries them.
//!
//! Everything is computed from exact counts. Percentages keep their numerator
//! and denominator next to the two-decimal value that gets serialized. That
//! value is rounded half-up, except for the host list, which is apportioned
//! so that the listed shares add up to exactly 100.00.

use std::collections::HashMap;
use std::fmt;

use serde::ser::Serializer;
use serde::Serialize;
use serde_json::value::RawValue;

use crate::dissect::DissectedPacket;
use crate::time::{iso_micros, seconds_text};

pub const TOP_HOSTS: usize = 10;
pub const OTHER_HOSTS: &str = "other";

/// Lower-inclusive bin edges over the original frame length. The last edge
/// is 2^32, larger than any length a pcap record can carry.
pub const FRAME_SIZE_EDGES: [u64; 11] = [0, 20, 40, 80, 160, 320, 640, 1280, 2560, 5120, 1 << 32];

/// `100 * num / den` kept as a fraction, plus the value shown in hundredths
/// of a percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Percent {
    pub num: u64,
    pub den: u64,
    shown: u64,
}

impl Percent {
    pub fn new(num: u64, den: u64) -> Self {
        let shown = if den == 0 {
            0
        } else {
            ((u128::from(num) * 20_000 + u128::from(den)) / (2 * u128::from(den))) as u64
        };
        Percent { num, den, shown }
    }

    pub fn value(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            100.0 * self.num as f64 / self.den as f64
        }
    }

    /// Hundredths of a percent as serialized.
    pub fn hundredths(&self) -> u64 {
        self.shown
    }
}

/// Largest-remainder rounding for shares of one whole: every share is
/// rounded down to a hundredth, then the missing hundredths go to the
/// largest remainders (earlier entries first on ties). Each shown value
/// stays within 0.01 of the exact one and the total is exactly 100.00.
/// Leaves the shares alone unless they have one denominator and sum to it.
pub fn apportion(shares: &mut [Percent]) {
    let Some(den) = shares.first().map(|p| u128::from(p.den)) else {
        return;
    };
    let total: u128 = shares.iter().map(|p| u128::from(p.num)).sum();
    if den == 0 || total != den || shares.iter().any(|p| u128::from(p.den) != den) {
        return;
    }
    let mut remainders = Vec::with_capacity(shares.len());
    let mut assigned = 0u64;
    for (i, p) in shares.iter_mut().enumerate() {
        let scaled = u128::from(p.num) * 10_000;
        p.shown = (scaled / den) as u64;
        assigned += p.shown;
        remainders.push((scaled % den, i));
    }
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take((10_000 - assigned) as usize) {
        shares[i].shown += 1;
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.hundredths();
        write!(f, "{}.{:02}", h / 100, h % 100)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        raw_number(self.to_string(), s)
    }
}

fn raw_number<S: Serializer>(text: String, s: S) -> Result<S::Ok, S::Error> {
    RawValue::from_string(text)
        .map_err(serde::ser::Error::custom)?
        .serialize(s)
}

/// A span in microseconds, serialized as seconds with six decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Seconds(pub i64);

impl Serialize for Seconds {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        raw_number(seconds_text(self.0), s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub total_packets: u64,
    pub total_bytes: u64,
    pub first_ts: Option<String>,
    pub last_ts: Option<String>,
    pub duration_s: Seconds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TlsShare {
    pub tls_packets: u64,
    pub percentage: Percent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HostShare {
    pub address: String,
    pub appearances: u64,
    pub percentage: Percent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolShare {
    pub name: String,
    pub packets: u64,
    pub percentage: Percent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameSizes {
    pub bin_edges: [u64; 11],
    pub counts: [u64; 10],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PacketsPerSecond {
    pub start_ts: Option<String>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub capture_id: String,
    pub generated_at: String,
    pub truncated: bool,
    pub summary: Summary,
    pub tls: TlsShare,
    pub hosts: Vec<HostShare>,
    pub protocols: Vec<ProtocolShare>,
    pub frame_sizes: FrameSizes,
    pub packets_per_second: PacketsPerSecond,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("report serializes")
    }

    pub fn top_protocol(&self) -> Option<&str> {
        self.protocols.first().map(|p| p.name.as_str())
    }
}

pub fn total_packets(packets: &[DissectedPacket]) -> u64 {
    packets.len() as u64
}

fn ts_bounds(packets: &[DissectedPacket]) -> Option<(i64, i64)> {
    let first = packets.iter().map(|p| p.ts_us).min()?;
    let last = packets.iter().map(|p| p.ts_us).max()?;
    Some((first, last))
}

pub fn summary(packets: &[DissectedPacket]) -> Summary {
    let bounds = ts_bounds(packets);
    Summary {
        total_packets: total_packets(packets),
        total_bytes: packets.iter().map(|p| u64::from(p.frame_len)).sum(),
        first_ts: bounds.map(|(f, _)| iso_micros(f)),
        last_ts: bounds.map(|(_, l)| iso_micros(l)),
        duration_s: Seconds(bounds.map_or(0, |(f, l)| l - f)),
    }
}

/// Each IP packet gives one appearance to its source and one to its
/// destination. The ten busiest addresses are listed and the rest folded
/// into a trailing `other` entry.
pub fn host_shares(packets: &[DissectedPacket]) -> Vec<HostShare> {
    let mut appearances: HashMap<String, u64> = HashMap::new();
    let mut ip_packets = 0u64;
    for p in packets {
        if let (Some(src), Some(dst)) = (p.src_addr, p.dst_addr) {
            ip_packets += 1;
            *appearances.entry(src.to_string()).or_default() += 1;
            *appearances.entry(dst.to_string()).or_default() += 1;
        }
    }
    let den = 2 * ip_packets;
    let mut ranked: Vec<(String, u64)> = appearances.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let rest: u64 = ranked.iter().skip(TOP_HOSTS).map(|(_, n)| n).sum();
    let mut shares: Vec<HostShare> = ranked
        .into_iter()
        .take(TOP_HOSTS)
        .map(|(address, n)| HostShare {
            address,
            appearances: n,
            percentage: Percent::new(n, den),
        })
        .collect();
    if rest > 0 {
        shares.push(HostShare {
            address: OTHER_HOSTS.to_string(),
            appearances: rest,
            percentage: Percent::new(rest, den),
        });
    }
    let mut percents: Vec<Percent> = shares.iter().map(|h| h.percentage).collect();
    apportion(&mut percents);
    for (h, p) in shares.iter_mut().zip(percents) {
        h.percentage = p;
    }
    shares
}

pub fn tls_share(packets: &[DissectedPacket]) -> TlsShare {
    let tls_packets = packets.iter().filter(|p| p.is_tls).count() as u64;
    TlsShare {
        tls_packets,
        percentage: Percent::new(tls_packets, packets.len() as u64),
    }
}

/// Packets per protocol label, busiest first, ties alphabetical.
pub fn protocol_breakdown(packets: &[DissectedPacket]) -> Vec<ProtocolShare> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for p in packets {
        *counts.entry(p.protocol_label.as_str()).or_default() += 1;
    }
    let total = packets.len() as u64;
    let mut list: Vec<ProtocolShare> = counts
        .into_iter()
        .map(|(name, n)| ProtocolShare {
            name: name.to_string(),
            packets: n,
            percentage: Percent::new(n, total),
        })
        .collect();
    list.sort_by(|a, b| b.packets.cmp(&a.packets).then_with(|| a.name.cmp(&b.name)));
    list
}

pub fn frame_size_bin(frame_len: u32) -> usize {
    let len = u64::from(frame_len);
    FRAME_SIZE_EDGES
        .windows(2)
        .position(|w| len >= w[0] && len < w[1])
        .expect("edges cover every u32")
}

pub fn frame_size_histogram(packets: &[DissectedPacket]) -> FrameSizes {
    let mut counts = [0u64; 10];
    for p in packets {
        counts[frame_size_bin(p.frame_len)] += 1;
    }
    FrameSizes {
        bin_edges: FRAME_SIZE_EDGES,
        counts,
    }
}

/// Number of one-second buckets the series for `packets` would need.
pub fn series_len(packets: &[DissectedPacket]) -> u64 {
    match ts_bounds(packets) {
        Some((first, last)) => (last.div_euclid(1_000_000) - first.div_euclid(1_000_000)) as u64 + 1,
        None => 0,
    }
}

/// One-second buckets from the floor of the earliest timestamp to the floor
/// of the latest, empty seconds included.
pub fn packets_per_second(packets: &[DissectedPacket]) -> PacketsPerSecond {
    let Some((first, _)) = ts_bounds(packets) else {
        return PacketsPerSecond {
            start_ts: None,
            counts: Vec::new(),
        };
    };
    let start = first.div_euclid(1_000_000);
    let mut counts = vec![0u64; series_len(packets) as usize];
    for p in packets {
        counts[(p.ts_us.div_euclid(1_000_000) - start) as usize] += 1;
    }
    PacketsPerSecond {
        start_ts: Some(iso_micros(start * 1_000_000)),
        counts,
    }
}

/// Assembles the report. `generated_at_us` is supplied by the caller so that
/// identical inputs serialize to identical bytes.
pub fn build_report(capture_id: &str, generated_at_us: i64, packets: &[DissectedPacket], truncated: bool) -> AnalysisReport {
    AnalysisReport {
        capture_id: capture_id.to_string(),
        generated_at: iso_micros(generated_at_us),
        truncated,
        summary: summary(packets),
        tls: tls_share(packets),
        hosts: host_shares(packets),
        protocols: protocol_breakdown(packets),
        frame_sizes: frame_size_histogram(packets),
        packets_per_second: packets_per_second(packets),
    }
}

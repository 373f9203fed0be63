//! Brute-force recomputations of the report datasets and of flow
//! aggregation. Slow on purpose: linear scans and selection instead of maps
//! and sorts, so they share no code path with the implementation.

use std::net::IpAddr;

/// Plain per-packet view that the tests build from dissected packets.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketView {
    pub ts_us: i64,
    pub frame_len: u32,
    /// Empty when the packet has no IP layer.
    pub src: String,
    pub dst: String,
    pub transport: String,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    pub label: String,
    pub is_tls: bool,
    pub tcp_flags: u8,
}

pub fn total(packets: &[PacketView]) -> u64 {
    let mut n = 0;
    for _ in packets {
        n += 1;
    }
    n
}

pub fn tls_count(packets: &[PacketView]) -> u64 {
    packets.iter().filter(|p| p.is_tls).count() as u64
}

/// Picks the (name, count) with the highest count, ties by smallest name.
fn select_best(items: &[(String, u64)], taken: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..items.len() {
        if taken[i] {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let better = items[i].1 > items[b].1 || (items[i].1 == items[b].1 && items[i].0 < items[b].0);
                Some(if better { i } else { b })
            }
        };
    }
    best
}

fn ranked(items: Vec<(String, u64)>) -> Vec<(String, u64)> {
    let mut taken = vec![false; items.len()];
    let mut out = Vec::new();
    while let Some(i) = select_best(&items, &taken) {
        taken[i] = true;
        out.push(items[i].clone());
    }
    out
}

/// Host appearance shares: returns the listed entries (top ten plus an
/// "other" entry when needed) and the denominator 2 * ip_packets.
pub fn hosts(packets: &[PacketView]) -> (Vec<(String, u64)>, u64) {
    let mut distinct: Vec<String> = Vec::new();
    let mut ip_packets = 0;
    for p in packets {
        if p.src.is_empty() {
            continue;
        }
        ip_packets += 1;
        for a in [&p.src, &p.dst] {
            if !distinct.contains(a) {
                distinct.push(a.clone());
            }
        }
    }
    let counted: Vec<(String, u64)> = distinct
        .into_iter()
        .map(|a| {
            let n = packets
                .iter()
                .filter(|p| !p.src.is_empty())
                .map(|p| u64::from(p.src == a) + u64::from(p.dst == a))
                .sum();
            (a, n)
        })
        .collect();
    let all = ranked(counted);
    let mut listed: Vec<(String, u64)> = all.iter().take(10).cloned().collect();
    let rest: u64 = all.iter().skip(10).map(|(_, n)| *n).sum();
    if rest > 0 {
        listed.push(("other".to_string(), rest));
    }
    (listed, 2 * ip_packets)
}

pub fn protocols(packets: &[PacketView]) -> Vec<(String, u64)> {
    let mut labels: Vec<String> = Vec::new();
    for p in packets {
        if !labels.contains(&p.label) {
            labels.push(p.label.clone());
        }
    }
    let counted = labels
        .into_iter()
        .map(|l| {
            let n = packets.iter().filter(|p| p.label == l).count() as u64;
            (l, n)
        })
        .collect();
    ranked(counted)
}

pub fn frame_size_counts(packets: &[PacketView]) -> [u64; 10] {
    let mut counts = [0u64; 10];
    for p in packets {
        let len = p.frame_len;
        let bin = if len < 20 {
            0
        } else if len < 40 {
            1
        } else if len < 80 {
            2
        } else if len < 160 {
            3
        } else if len < 320 {
            4
        } else if len < 640 {
            5
        } else if len < 1280 {
            6
        } else if len < 2560 {
            7
        } else if len < 5120 {
            8
        } else {
            9
        };
        counts[bin] += 1;
    }
    counts
}

fn floor_second(ts_us: i64) -> i64 {
    let mut s = ts_us / 1_000_000;
    if ts_us < 0 && ts_us % 1_000_000 != 0 {
        s -= 1;
    }
    s
}

/// Per-second counts from the earliest to the latest second, plus that
/// earliest second.
pub fn per_second(packets: &[PacketView]) -> (Option<i64>, Vec<u64>) {
    if packets.is_empty() {
        return (None, Vec::new());
    }
    let mut lo = floor_second(packets[0].ts_us);
    let mut hi = lo;
    for p in packets {
        let s = floor_second(p.ts_us);
        if s < lo {
            lo = s;
        }
        if s > hi {
            hi = s;
        }
    }
    let counts = (lo..=hi)
        .map(|s| packets.iter().filter(|p| floor_second(p.ts_us) == s).count() as u64)
        .collect();
    (Some(lo), counts)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleFlow {
    pub id: u64,
    pub src: (String, u16),
    pub dst: (String, u16),
    pub transport: String,
    pub first_ts_us: i64,
    pub last_ts_us: i64,
    pub fwd_packets: u64,
    pub bwd_packets: u64,
    pub fwd_bytes: u64,
    pub bwd_bytes: u64,
    pub tcp_flags: u8,
    pub is_tls: bool,
}

struct OpenFlow {
    flow: OracleFlow,
    lo: (Vec<u8>, u16),
    hi: (Vec<u8>, u16),
    initiator_lo: bool,
    open: bool,
}

fn addr_bytes(text: &str) -> Vec<u8> {
    match text.parse::<IpAddr>().expect("valid address") {
        IpAddr::V4(a) => a.octets().to_vec(),
        IpAddr::V6(a) => a.octets().to_vec(),
    }
}

/// Flow aggregation by scanning every flow for each packet.
pub fn flows(packets: &[PacketView], idle_us: i64, active_us: i64) -> Vec<OracleFlow> {
    let mut all: Vec<OpenFlow> = Vec::new();
    for p in packets {
        if p.transport != "tcp" && p.transport != "udp" {
            continue;
        }
        let a = (addr_bytes(&p.src), p.src_port.unwrap());
        let b = (addr_bytes(&p.dst), p.dst_port.unwrap());
        let src_is_lo = a <= b;
        let (lo, hi) = if src_is_lo { (a, b) } else { (b, a) };

        let mut target = None;
        for (i, f) in all.iter_mut().enumerate() {
            if f.open && f.lo == lo && f.hi == hi && f.flow.transport == p.transport {
                let idle = p.ts_us - f.flow.last_ts_us > idle_us;
                let aged = p.ts_us - f.flow.first_ts_us > active_us;
                if idle || aged {
                    f.open = false;
                } else {
                    target = Some(i);
                }
            }
        }
        let i = match target {
            Some(i) => i,
            None => {
                let src = (p.src.clone(), p.src_port.unwrap());
                let dst = (p.dst.clone(), p.dst_port.unwrap());
                all.push(OpenFlow {
                    flow: OracleFlow {
                        id: all.len() as u64,
                        src,
                        dst,
                        transport: p.transport.clone(),
                        first_ts_us: p.ts_us,
                        last_ts_us: p.ts_us,
                        fwd_packets: 0,
                        bwd_packets: 0,
                        fwd_bytes: 0,
                        bwd_bytes: 0,
                        tcp_flags: 0,
                        is_tls: false,
                    },
                    lo,
                    hi,
                    initiator_lo: src_is_lo,
                    open: true,
                });
                all.len() - 1
            }
        };
        let f = &mut all[i];
        let forward = src_is_lo == f.initiator_lo;
        if forward {
            f.flow.fwd_packets += 1;
            f.flow.fwd_bytes += u64::from(p.frame_len);
        } else {
            f.flow.bwd_packets += 1;
            f.flow.bwd_bytes += u64::from(p.frame_len);
        }
        if p.ts_us < f.flow.first_ts_us {
            f.flow.first_ts_us = p.ts_us;
        }
        if p.ts_us > f.flow.last_ts_us {
            f.flow.last_ts_us = p.ts_us;
        }
        if p.transport == "tcp" {
            f.flow.tcp_flags |= p.tcp_flags;
        }
        f.flow.is_tls = f.flow.is_tls || p.is_tls;
    }

    // selection by (first_ts, id)
    let mut remaining: Vec<OracleFlow> = all.into_iter().map(|f| f.flow).collect();
    let mut out = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best = 0;
        for i in 1..remaining.len() {
            let (a, b) = (&remaining[i], &remaining[best]);
            if (a.first_ts_us, a.id) < (b.first_ts_us, b.id) {
                best = i;
            }
        }
        out.push(remaining.remove(best));
    }
    out
}

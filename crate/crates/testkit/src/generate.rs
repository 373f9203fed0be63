//! Seeded synthetic captures.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frames::*;

const BASE_TS_US: i64 = 1_700_000_000_000_000;

#[derive(Debug, Clone, Copy)]
struct Conversation {
    client: IpAddr,
    server: IpAddr,
    cport: u16,
    sport: u16,
    tcp: bool,
}

/// A random Ethernet capture of `n` packets: TCP (TLS and plain), UDP
/// (DNS, mDNS and arbitrary), ICMP, ARP, fragments, tunnels, VLAN tags and a
/// few malformed frames. Timestamps mostly increase but sometimes jump
/// backwards or leave long gaps; some files use a small snaplen.
pub fn random_capture(seed: u64, n: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snaplen = if rng.random_bool(0.2) { rng.random_range(60..200) } else { 65535 };
    pcap_bytes(1, snaplen, &random_frames(&mut rng, n))
}

fn random_v4(rng: &mut ChaCha8Rng, pool: u8) -> IpAddr {
    IpAddr::V4(Ipv4Addr::new(10, 0, rng.random_range(0..2), rng.random_range(1..=pool)))
}

fn random_v6(rng: &mut ChaCha8Rng) -> IpAddr {
    IpAddr::V6(Ipv6Addr::new(0xfd00, 0, 0, 0, 0, 0, 0, rng.random_range(1..6)))
}

fn pick_port(rng: &mut ChaCha8Rng) -> u16 {
    const WELL_KNOWN: [u16; 9] = [53, 80, 443, 443, 123, 5353, 67, 1900, 8080];
    if rng.random_bool(0.6) {
        WELL_KNOWN[rng.random_range(0..WELL_KNOWN.len())]
    } else {
        rng.random_range(1024..=65535)
    }
}

fn new_conversation(rng: &mut ChaCha8Rng, pool: u8) -> Conversation {
    let (client, server) = if rng.random_bool(0.15) {
        (random_v6(rng), random_v6(rng))
    } else {
        (random_v4(rng, pool), random_v4(rng, pool))
    };
    Conversation {
        client,
        server,
        cport: rng.random_range(32768..=60999),
        sport: pick_port(rng),
        tcp: rng.random_bool(0.6),
    }
}

fn conversation_frame(rng: &mut ChaCha8Rng, c: &Conversation) -> Vec<u8> {
    let forward = rng.random_bool(0.55);
    let (src, dst, sp, dp) = if forward {
        (c.client, c.server, c.cport, c.sport)
    } else {
        (c.server, c.client, c.sport, c.cport)
    };
    let payload: Vec<u8> = if c.tcp {
        match rng.random_range(0..10) {
            0..=3 => Vec::new(),
            4..=6 => tls_record(rng.random_range(20..=23), rng.random_range(0..=4), rng.random_range(0..1400)),
            7 => b"GET / HTTP/1.1\r\nHost: example\r\n\r\n".to_vec(),
            _ => (0..rng.random_range(1..1400)).map(|_| rng.random()).collect(),
        }
    } else {
        let len = if rng.random_bool(0.02) { rng.random_range(5200..6000) } else { rng.random_range(0..1200) };
        (0..len).map(|_| rng.random()).collect()
    };
    let l4 = if c.tcp {
        let flags = match rng.random_range(0..12) {
            0 => TCP_SYN,
            1 => TCP_SYN | TCP_ACK,
            2 => TCP_FIN | TCP_ACK,
            3 => TCP_RST,
            _ if payload.is_empty() => TCP_ACK,
            _ => TCP_PSH | TCP_ACK,
        };
        ip_packet(6, src, dst, &tcp(sp, dp, flags, &payload))
    } else {
        ip_packet(17, src, dst, &udp(sp, dp, &payload))
    };
    ethernet(ethertype_for(src), &l4)
}

fn v4_octets(addr: IpAddr) -> [u8; 4] {
    match addr {
        IpAddr::V4(a) => a.octets(),
        IpAddr::V6(_) => [10, 0, 0, 1],
    }
}

fn odd_frame(rng: &mut ChaCha8Rng, pool: u8) -> Vec<u8> {
    let a = v4_octets(random_v4(rng, pool));
    let b = v4_octets(random_v4(rng, pool));
    match rng.random_range(0..10) {
        0 => arp(a, b),
        1 => ethernet(0x0800, &ipv4(1, a, b, &icmp_echo(&[0x61; 32]))),
        2 => {
            let (s, d) = match (random_v6(rng), random_v6(rng)) {
                (IpAddr::V6(s), IpAddr::V6(d)) => (s.octets(), d.octets()),
                _ => unreachable!(),
            };
            ethernet(0x86DD, &ipv6(58, s, d, &[128, 0, 0, 0, 0, 1, 0, 1]))
        }
        3 => ethernet(0x0800, &ipv4_fragment(17, a, b, 185, false, &[0x42; 300])),
        4 => ethernet(0x0800, &ipv4(47, a, b, &[0, 0, 0x08, 0, 0x45, 0, 0, 20])),
        5 => {
            let mut ip = ipv4(17, a, b, &udp(1000, 2000, b"bad"));
            ip[0] = 0x44;
            ethernet(0x0800, &ip)
        }
        6 => ethernet_vlan(42, 0x0800, &ipv4(17, a, b, &udp(40000, 53, b"\x12\x34\x01\x00"))),
        7 => vec![0xFF; rng.random_range(1..14)],
        8 => ethernet(0x88B5, &[0; 46]),
        _ => {
            let (s, d) = match (random_v6(rng), random_v6(rng)) {
                (IpAddr::V6(s), IpAddr::V6(d)) => (s.octets(), d.octets()),
                _ => unreachable!(),
            };
            ethernet(0x86DD, &ipv6(0, s, d, &ipv6_hop_by_hop(17, &udp(5353, 5353, b"mdns"))))
        }
    }
}

pub fn random_frames(rng: &mut ChaCha8Rng, n: usize) -> Vec<Frame> {
    let pool: u8 = rng.random_range(3..24);
    let mut conversations: Vec<Conversation> = (0..rng.random_range(1..12)).map(|_| new_conversation(rng, pool)).collect();
    let mut ts = BASE_TS_US + rng.random_range(0..1_000_000);
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        ts += match rng.random_range(0..100) {
            0..=2 => rng.random_range(16_000_000..40_000_000),
            3..=5 => -rng.random_range(0..2_000_000),
            _ => rng.random_range(0..1_500_000),
        };
        if rng.random_bool(0.05) {
            conversations.push(new_conversation(rng, pool));
        }
        let data = if rng.random_bool(0.85) {
            let c = conversations[rng.random_range(0..conversations.len())];
            conversation_frame(rng, &c)
        } else {
            odd_frame(rng, pool)
        };
        frames.push(Frame { ts_us: ts, data });
    }
    frames
}

/// A minute of TLS audio streaming plus a little DNS and NTP, shaped after
/// a phone listening to an online radio station. About `packets` frames and
/// roughly 1 KB per frame on average.
pub fn radio_stream_capture(seed: u64, packets: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phone = IpAddr::V4(Ipv4Addr::new(192, 168, 1, 23));
    let resolver = IpAddr::V4(Ipv4Addr::new(192, 168, 1, 1));
    let station = IpAddr::V4(Ipv4Addr::new(198, 18, 0, 10));
    let ntp = IpAddr::V4(Ipv4Addr::new(162, 159, 200, 1));
    let span_us = 60_000_000i64;
    let step = span_us / packets as i64;
    let mut frames = Vec::with_capacity(packets);
    let mut ts = BASE_TS_US;
    let push = |frames: &mut Vec<Frame>, ts: i64, data: Vec<u8>| frames.push(Frame { ts_us: ts, data });

    push(&mut frames, ts, ethernet(0x0800, &ip_packet(17, phone, resolver, &udp(39000, 53, &[0x11; 40]))));
    ts += 20_000;
    push(&mut frames, ts, ethernet(0x0800, &ip_packet(17, resolver, phone, &udp(53, 39000, &[0x22; 56]))));
    for flags in [TCP_SYN, TCP_SYN | TCP_ACK, TCP_ACK] {
        ts += 15_000;
        let (s, d, sp, dp) = if flags == TCP_SYN | TCP_ACK { (station, phone, 443, 53000) } else { (phone, station, 53000, 443) };
        push(&mut frames, ts, ethernet(0x0800, &ip_packet(6, s, d, &tcp(sp, dp, flags, &[]))));
    }
    ts += 10_000;
    push(&mut frames, ts, ethernet(0x0800, &ip_packet(6, phone, station, &tcp(53000, 443, TCP_PSH | TCP_ACK, &tls_record(22, 1, 250)))));

    while frames.len() < packets {
        ts += rng.random_range(step / 2..step * 3 / 2);
        let roll = rng.random_range(0..100);
        let data = if roll < 68 {
            let rec = tls_record(23, 3, rng.random_range(1300..1420));
            ip_packet(6, station, phone, &tcp(443, 53000, TCP_PSH | TCP_ACK, &rec))
        } else if roll < 98 {
            ip_packet(6, phone, station, &tcp(53000, 443, TCP_ACK, &[]))
        } else {
            ip_packet(17, phone, ntp, &udp(47001, 123, &[0x23; 48]))
        };
        push(&mut frames, ts, ethernet(0x0800, &data));
    }
    pcap_bytes(1, 65535, &frames)
}

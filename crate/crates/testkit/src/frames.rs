//! Byte-level builders for test frames and pcap files.
//!
//! Deliberately independent of the library under test: the pcap writer here
//! is a few lines of `to_le_bytes`, and checksums are left at zero.

use std::net::IpAddr;

pub const MAC_A: [u8; 6] = [0x02, 0, 0, 0, 0, 0x0A];
pub const MAC_B: [u8; 6] = [0x02, 0, 0, 0, 0, 0x0B];

pub const TCP_FIN: u8 = 0x01;
pub const TCP_SYN: u8 = 0x02;
pub const TCP_RST: u8 = 0x04;
pub const TCP_PSH: u8 = 0x08;
pub const TCP_ACK: u8 = 0x10;

pub fn ethernet(ethertype: u16, payload: &[u8]) -> Vec<u8> {
    let mut f = Vec::with_capacity(14 + payload.len());
    f.extend_from_slice(&MAC_B);
    f.extend_from_slice(&MAC_A);
    f.extend_from_slice(&ethertype.to_be_bytes());
    f.extend_from_slice(payload);
    f
}

pub fn ethernet_vlan(vlan: u16, ethertype: u16, payload: &[u8]) -> Vec<u8> {
    let mut inner = Vec::with_capacity(4 + payload.len());
    inner.extend_from_slice(&vlan.to_be_bytes());
    inner.extend_from_slice(&ethertype.to_be_bytes());
    inner.extend_from_slice(payload);
    ethernet(0x8100, &inner)
}

pub fn arp(sender: [u8; 4], target: [u8; 4]) -> Vec<u8> {
    let mut p = vec![0, 1, 0x08, 0x00, 6, 4, 0, 1];
    p.extend_from_slice(&MAC_A);
    p.extend_from_slice(&sender);
    p.extend_from_slice(&[0; 6]);
    p.extend_from_slice(&target);
    let mut f = ethernet(0x0806, &p);
    f.resize(60, 0);
    f
}

/// IPv4 header (no options) plus payload.
pub fn ipv4(proto: u8, src: [u8; 4], dst: [u8; 4], payload: &[u8]) -> Vec<u8> {
    ipv4_fragment(proto, src, dst, 0, false, payload)
}

/// `offset_units` is the fragment offset in 8-byte units.
pub fn ipv4_fragment(proto: u8, src: [u8; 4], dst: [u8; 4], offset_units: u16, more: bool, payload: &[u8]) -> Vec<u8> {
    let total = (20 + payload.len()) as u16;
    let flags_frag = offset_units | if more { 0x2000 } else { 0 };
    let mut h = vec![0x45, 0];
    h.extend_from_slice(&total.to_be_bytes());
    h.extend_from_slice(&[0x12, 0x34]);
    h.extend_from_slice(&flags_frag.to_be_bytes());
    h.extend_from_slice(&[64, proto, 0, 0]);
    h.extend_from_slice(&src);
    h.extend_from_slice(&dst);
    h.extend_from_slice(payload);
    h
}

pub fn ipv6(next: u8, src: [u8; 16], dst: [u8; 16], payload: &[u8]) -> Vec<u8> {
    let mut h = vec![0x60, 0, 0, 0];
    h.extend_from_slice(&(payload.len() as u16).to_be_bytes());
    h.push(next);
    h.push(64);
    h.extend_from_slice(&src);
    h.extend_from_slice(&dst);
    h.extend_from_slice(payload);
    h
}

/// A hop-by-hop options header (8 bytes, PadN) followed by `payload`.
pub fn ipv6_hop_by_hop(next: u8, payload: &[u8]) -> Vec<u8> {
    let mut h = vec![next, 0, 1, 4, 0, 0, 0, 0];
    h.extend_from_slice(payload);
    h
}

pub fn ip_packet(proto: u8, src: IpAddr, dst: IpAddr, payload: &[u8]) -> Vec<u8> {
    match (src, dst) {
        (IpAddr::V4(s), IpAddr::V4(d)) => ipv4(proto, s.octets(), d.octets(), payload),
        (IpAddr::V6(s), IpAddr::V6(d)) => ipv6(proto, s.octets(), d.octets(), payload),
        _ => panic!("mixed address families"),
    }
}

pub fn ethertype_for(addr: IpAddr) -> u16 {
    match addr {
        IpAddr::V4(_) => 0x0800,
        IpAddr::V6(_) => 0x86DD,
    }
}

pub fn tcp(sport: u16, dport: u16, flags: u8, payload: &[u8]) -> Vec<u8> {
    let mut h = Vec::with_capacity(20 + payload.len());
    h.extend_from_slice(&sport.to_be_bytes());
    h.extend_from_slice(&dport.to_be_bytes());
    h.extend_from_slice(&1000u32.to_be_bytes());
    h.extend_from_slice(&2000u32.to_be_bytes());
    h.push(0x50);
    h.push(flags);
    h.extend_from_slice(&[0xFA, 0xF0, 0, 0, 0, 0]);
    h.extend_from_slice(payload);
    h
}

pub fn udp(sport: u16, dport: u16, payload: &[u8]) -> Vec<u8> {
    let mut h = Vec::with_capacity(8 + payload.len());
    h.extend_from_slice(&sport.to_be_bytes());
    h.extend_from_slice(&dport.to_be_bytes());
    h.extend_from_slice(&((8 + payload.len()) as u16).to_be_bytes());
    h.extend_from_slice(&[0, 0]);
    h.extend_from_slice(payload);
    h
}

pub fn icmp_echo(payload: &[u8]) -> Vec<u8> {
    let mut h = vec![8, 0, 0, 0, 0, 1, 0, 1];
    h.extend_from_slice(payload);
    h
}

/// TLS record header followed by `len` filler bytes.
pub fn tls_record(content_type: u8, minor: u8, len: usize) -> Vec<u8> {
    let mut r = vec![content_type, 3, minor];
    r.extend_from_slice(&(len as u16).to_be_bytes());
    r.resize(5 + len, 0xA5);
    r
}

/// One frame to be written into a pcap file.
#[derive(Debug, Clone)]
pub struct Frame {
    pub ts_us: i64,
    pub data: Vec<u8>,
}

/// A little-endian, microsecond pcap file. Frames longer than `snaplen`
/// are cut and keep their original length in the record header.
pub fn pcap_bytes(linktype: u32, snaplen: u32, frames: &[Frame]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&0xA1B2_C3D4u32.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&0i32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&snaplen.to_le_bytes());
    out.extend_from_slice(&linktype.to_le_bytes());
    for f in frames {
        let cap = f.data.len().min(snaplen as usize);
        out.extend_from_slice(&((f.ts_us / 1_000_000) as u32).to_le_bytes());
        out.extend_from_slice(&((f.ts_us % 1_000_000) as u32).to_le_bytes());
        out.extend_from_slice(&(cap as u32).to_le_bytes());
        out.extend_from_slice(&(f.data.len() as u32).to_le_bytes());
        out.extend_from_slice(&f.data[..cap]);
    }
    out
}

//! Layer-by-layer decoding of captured frames.
//!
//! Supported link layers are Ethernet II (with at most one 802.1Q tag), raw
//! IP and Linux cooked capture. Above them IPv4, IPv6 (walking hop-by-hop,
//! routing, fragment and destination-option headers), TCP, UDP, ICMP and
//! ICMPv6 are decoded. A header that fails to decode stops the walk and the
//! packet keeps whatever the shallower layers produced.

mod labels;
mod tls;

use std::collections::HashSet;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};

use crate::flow::FlowKey;
use crate::pcap::{PacketRecord, TsPrecision, LINKTYPE_ETHERNET, LINKTYPE_LINUX_SLL, LINKTYPE_RAW};

pub use labels::{
    classify_protocol, ethertype_name, ip_protocol_name, DecodedLayers, PortTable, PortTableError,
    DEFAULT_PORT_TABLE, TLS_LABEL,
};
pub use tls::{detect_tls, looks_like_tls_record, TLS_PORT};

pub const PREVIEW_LEN: usize = 64;

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86DD;
const ETHERTYPE_VLAN: u16 = 0x8100;

const PROTO_ICMP: u8 = 1;
const PROTO_TCP: u8 = 6;
const PROTO_UDP: u8 = 17;
const PROTO_ICMPV6: u8 = 58;

const EXT_HOP_BY_HOP: u8 = 0;
const EXT_ROUTING: u8 = 43;
const EXT_FRAGMENT: u8 = 44;
const EXT_NO_NEXT: u8 = 59;
const EXT_DEST_OPTIONS: u8 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Tcp,
    Udp,
    Icmp,
    Icmpv6,
    Other,
    None,
}

impl Transport {
    pub fn as_str(self) -> &'static str {
        match self {
            Transport::Tcp => "tcp",
            Transport::Udp => "udp",
            Transport::Icmp => "icmp",
            Transport::Icmpv6 => "icmpv6",
            Transport::Other => "other",
            Transport::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Option<u8>", into = "Option<u8>")]
pub enum IpVersion {
    V4,
    V6,
    None,
}

impl From<IpVersion> for Option<u8> {
    fn from(v: IpVersion) -> Self {
        match v {
            IpVersion::V4 => Some(4),
            IpVersion::V6 => Some(6),
            IpVersion::None => None,
        }
    }
}

impl TryFrom<Option<u8>> for IpVersion {
    type Error = String;

    fn try_from(v: Option<u8>) -> Result<Self, Self::Error> {
        match v {
            Some(4) => Ok(IpVersion::V4),
            Some(6) => Ok(IpVersion::V6),
            None => Ok(IpVersion::None),
            Some(other) => Err(format!("invalid ip version {other}")),
        }
    }
}

/// How far the link layer decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkLayer {
    Ethernet,
    LinuxSll,
    RawIp,
    /// The capture's linktype is not one we dissect.
    Unsupported,
    /// Supported linktype, but the frame is too short for its header.
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DissectedPacket {
    pub index: u64,
    pub ts_us: i64,
    /// Original length on the wire.
    pub frame_len: u32,
    #[serde(with = "addr_text")]
    pub src_addr: Option<IpAddr>,
    #[serde(with = "addr_text")]
    pub dst_addr: Option<IpAddr>,
    pub ip_version: IpVersion,
    pub transport: Transport,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    /// Raw TCP flag byte, 0 for everything else.
    #[serde(default)]
    pub tcp_flags: u8,
    pub protocol_label: String,
    pub is_tls: bool,
    #[serde(with = "hex_bytes")]
    pub payload_preview: Vec<u8>,
}

impl DissectedPacket {
    pub fn has_ip(&self) -> bool {
        self.src_addr.is_some() && self.dst_addr.is_some()
    }

    pub fn is_flow_eligible(&self) -> bool {
        matches!(self.transport, Transport::Tcp | Transport::Udp)
    }
}

mod addr_text {
    use std::net::IpAddr;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(addr: &Option<IpAddr>, s: S) -> Result<S::Ok, S::Error> {
        match addr {
            Some(a) => s.collect_str(a),
            None => s.serialize_str(""),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<IpAddr>, D::Error> {
        let text = String::deserialize(d)?;
        if text.is_empty() {
            return Ok(None);
        }
        text.parse().map(Some).map_err(serde::de::Error::custom)
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(text).map_err(serde::de::Error::custom)
    }
}

/// Per-capture dissection state. Holds the set of TCP connections already
/// recognised as TLS, so it must not be shared between captures.
pub struct Dissector<'t> {
    ports: &'t PortTable,
    linktype: u32,
    precision: TsPrecision,
    tls_flows: HashSet<FlowKey>,
}

impl<'t> Dissector<'t> {
    pub fn new(ports: &'t PortTable, linktype: u32, precision: TsPrecision) -> Self {
        Dissector {
            ports,
            linktype,
            precision,
            tls_flows: HashSet::new(),
        }
    }

    pub fn dissect(&mut self, record: &PacketRecord) -> DissectedPacket {
        let frame = decode_frame(&record.data, self.linktype);

        let mut is_tls = false;
        if frame.transport == Transport::Tcp {
            if let (Some(src), Some(dst), Some(sp), Some(dp)) =
                (frame.src_addr, frame.dst_addr, frame.src_port, frame.dst_port)
            {
                let key = FlowKey::new(src, sp, dst, dp, Transport::Tcp).0;
                let flagged = self.tls_flows.contains(&key);
                is_tls = detect_tls(frame.l4_payload, sp, dp, flagged);
                if is_tls && !flagged {
                    self.tls_flows.insert(key);
                }
            }
        }

        let layers = DecodedLayers {
            link: frame.link,
            ethertype: frame.ethertype,
            ip_version: frame.ip_version,
            ip_protocol: frame.ip_protocol,
            transport: frame.transport,
            src_port: frame.src_port,
            dst_port: frame.dst_port,
            is_tls,
        };
        let protocol_label = classify_protocol(&layers, self.ports);
        let preview_len = frame.preview.len().min(PREVIEW_LEN);

        DissectedPacket {
            index: record.index,
            ts_us: record.ts_us(self.precision),
            frame_len: record.origlen,
            src_addr: frame.src_addr,
            dst_addr: frame.dst_addr,
            ip_version: frame.ip_version,
            transport: frame.transport,
            src_port: frame.src_port,
            dst_port: frame.dst_port,
            tcp_flags: frame.tcp_flags,
            protocol_label,
            is_tls,
            payload_preview: frame.preview[..preview_len].to_vec(),
        }
    }
}

/// Dissects a single record with a fresh context and the default port table.
pub fn dissect(record: &PacketRecord, linktype: u32, precision: TsPrecision) -> DissectedPacket {
    let ports = PortTable::default();
    Dissector::new(&ports, linktype, precision).dissect(record)
}

/// Decoded header fields of one frame, borrowing from the frame bytes.
#[derive(Debug)]
struct Frame<'a> {
    link: LinkLayer,
    ethertype: Option<u16>,
    ip_version: IpVersion,
    src_addr: Option<IpAddr>,
    dst_addr: Option<IpAddr>,
    ip_protocol: Option<u8>,
    transport: Transport,
    src_port: Option<u16>,
    dst_port: Option<u16>,
    tcp_flags: u8,
    l4_payload: &'a [u8],
    preview: &'a [u8],
}

impl<'a> Frame<'a> {
    fn new(data: &'a [u8]) -> Self {
        Frame {
            link: LinkLayer::Unsupported,
            ethertype: None,
            ip_version: IpVersion::None,
            src_addr: None,
            dst_addr: None,
            ip_protocol: None,
            transport: Transport::None,
            src_port: None,
            dst_port: None,
            tcp_flags: 0,
            l4_payload: &[],
            preview: data,
        }
    }
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

fn decode_frame(data: &[u8], linktype: u32) -> Frame<'_> {
    let mut frame = Frame::new(data);
    let network = match linktype {
        LINKTYPE_ETHERNET => {
            if data.len() < 14 {
                frame.link = LinkLayer::Malformed;
                return frame;
            }
            frame.link = LinkLayer::Ethernet;
            let mut ethertype = be16(data, 12);
            let mut offset = 14;
            if ethertype == ETHERTYPE_VLAN {
                if data.len() < 18 {
                    frame.preview = &data[14..];
                    return frame;
                }
                ethertype = be16(data, 16);
                offset = 18;
            }
            frame.ethertype = Some(ethertype);
            frame.preview = &data[offset..];
            match ethertype {
                ETHERTYPE_IPV4 => Some((4, &data[offset..])),
                ETHERTYPE_IPV6 => Some((6, &data[offset..])),
                _ => None,
            }
        }
        LINKTYPE_LINUX_SLL => {
            if data.len() < 16 {
                frame.link = LinkLayer::Malformed;
                return frame;
            }
            frame.link = LinkLayer::LinuxSll;
            let proto = be16(data, 14);
            frame.ethertype = Some(proto);
            frame.preview = &data[16..];
            match proto {
                ETHERTYPE_IPV4 => Some((4, &data[16..])),
                ETHERTYPE_IPV6 => Some((6, &data[16..])),
                _ => None,
            }
        }
        LINKTYPE_RAW => {
            frame.link = LinkLayer::RawIp;
            match data.first().map(|b| b >> 4) {
                Some(4) => Some((4, data)),
                Some(6) => Some((6, data)),
                _ => None,
            }
        }
        _ => None,
    };

    let Some((version, bytes)) = network else {
        return frame;
    };
    let ip = match version {
        4 => decode_ipv4(bytes),
        _ => decode_ipv6(bytes),
    };
    let Some(ip) = ip else {
        return frame;
    };

    frame.ip_version = if version == 4 { IpVersion::V4 } else { IpVersion::V6 };
    frame.src_addr = Some(ip.src);
    frame.dst_addr = Some(ip.dst);
    frame.preview = ip.payload;
    if let Some(proto) = ip.protocol {
        decode_transport(&mut frame, proto, ip.payload);
    }
    frame
}

struct IpPacket<'a> {
    src: IpAddr,
    dst: IpAddr,
    /// Upper-layer protocol; `None` for non-first fragments and "no next header".
    protocol: Option<u8>,
    payload: &'a [u8],
}

fn decode_ipv4(b: &[u8]) -> Option<IpPacket<'_>> {
    if b.len() < 20 || b[0] >> 4 != 4 {
        return None;
    }
    let header_len = usize::from(b[0] & 0x0F) * 4;
    if header_len < 20 || header_len > b.len() {
        return None;
    }
    let total_len = usize::from(be16(b, 2));
    // total length 0 shows up with segmentation offload; trust the capture
    let end = if total_len == 0 { b.len() } else { total_len.min(b.len()) };
    if end < header_len {
        return None;
    }
    let frag_offset = be16(b, 6) & 0x1FFF;
    let src = Ipv4Addr::new(b[12], b[13], b[14], b[15]);
    let dst = Ipv4Addr::new(b[16], b[17], b[18], b[19]);
    Some(IpPacket {
        src: IpAddr::V4(src),
        dst: IpAddr::V4(dst),
        protocol: (frag_offset == 0).then_some(b[9]),
        payload: &b[header_len..end],
    })
}

fn decode_ipv6(b: &[u8]) -> Option<IpPacket<'_>> {
    if b.len() < 40 || b[0] >> 4 != 6 {
        return None;
    }
    let payload_len = usize::from(be16(b, 4));
    let end = if payload_len == 0 { b.len() } else { (40 + payload_len).min(b.len()) };
    let src: [u8; 16] = b[8..24].try_into().ok()?;
    let dst: [u8; 16] = b[24..40].try_into().ok()?;

    let mut next = b[6];
    let mut rest = &b[40..end];
    let mut protocol = None;
    // bounded walk over the extension-header chain
    for _ in 0..16 {
        match next {
            EXT_HOP_BY_HOP | EXT_ROUTING | EXT_DEST_OPTIONS => {
                if rest.len() < 2 {
                    break;
                }
                let len = (usize::from(rest[1]) + 1) * 8;
                if len > rest.len() {
                    break;
                }
                next = rest[0];
                rest = &rest[len..];
            }
            EXT_FRAGMENT => {
                if rest.len() < 8 {
                    break;
                }
                let offset = be16(rest, 2) >> 3;
                next = rest[0];
                rest = &rest[8..];
                if offset != 0 {
                    break;
                }
            }
            EXT_NO_NEXT => break,
            proto => {
                protocol = Some(proto);
                break;
            }
        }
    }
    Some(IpPacket {
        src: IpAddr::V6(Ipv6Addr::from(src)),
        dst: IpAddr::V6(Ipv6Addr::from(dst)),
        protocol,
        payload: rest,
    })
}

fn decode_transport<'a>(frame: &mut Frame<'a>, proto: u8, p: &'a [u8]) {
    match proto {
        PROTO_TCP => {
            if p.len() < 20 {
                return;
            }
            let header_len = usize::from(p[12] >> 4) * 4;
            if header_len < 20 || header_len > p.len() {
                return;
            }
            frame.transport = Transport::Tcp;
            frame.src_port = Some(be16(p, 0));
            frame.dst_port = Some(be16(p, 2));
            frame.tcp_flags = p[13];
            frame.l4_payload = &p[header_len..];
        }
        PROTO_UDP => {
            if p.len() < 8 {
                return;
            }
            let udp_len = usize::from(be16(p, 4));
            let end = if udp_len < 8 { p.len() } else { udp_len.min(p.len()) };
            frame.transport = Transport::Udp;
            frame.src_port = Some(be16(p, 0));
            frame.dst_port = Some(be16(p, 2));
            frame.l4_payload = &p[8..end];
        }
        PROTO_ICMP | PROTO_ICMPV6 => {
            if p.len() < 4 {
                return;
            }
            frame.transport = if proto == PROTO_ICMP { Transport::Icmp } else { Transport::Icmpv6 };
            frame.l4_payload = &p[4..];
        }
        other => {
            frame.transport = Transport::Other;
            frame.ip_protocol = Some(other);
            return;
        }
    }
    frame.preview = frame.l4_payload;
}

//! Protocol labels: the well-known-port table and the label precedence.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{IpVersion, LinkLayer, Transport};

/// Label used in the port table for ports whose traffic only counts as TLS
/// when the payload heuristic agrees.
pub const TLS_LABEL: &str = "TLS";

pub const DEFAULT_PORT_TABLE: &str = "\
# port,label
53,DNS
80,HTTP
443,TLS
123,NTP
5353,MDNS
67,DHCP
68,DHCP
1900,SSDP
";

#[derive(Debug, Error)]
pub enum PortTableError {
    #[error("port table line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("cannot read port table: {0}")]
    Io(#[from] std::io::Error),
}

/// Maps well-known ports to application labels, applied in both directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortTable {
    labels: HashMap<u16, String>,
}

impl Default for PortTable {
    fn default() -> Self {
        PortTable::parse(DEFAULT_PORT_TABLE).expect("built-in port table parses")
    }
}

impl PortTable {
    /// Parses `port,label` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, PortTableError> {
        let mut labels = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| PortTableError::Parse {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (port, label) = line.split_once(',').ok_or_else(|| err("expected `port,label`"))?;
            let port: u16 = port.trim().parse().map_err(|_| err("port is not a 16-bit number"))?;
            let label = label.trim();
            if label.is_empty() {
                return Err(err("empty label"));
            }
            labels.insert(port, label.to_ascii_uppercase());
        }
        Ok(PortTable { labels })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PortTableError> {
        PortTable::parse(&fs::read_to_string(path)?)
    }

    pub fn get(&self, port: u16) -> Option<&str> {
        self.labels.get(&port).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Whatever layers the dissector managed to decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedLayers {
    pub link: LinkLayer,
    /// Ethertype (or SLL protocol) when the link header carried one.
    pub ethertype: Option<u16>,
    pub ip_version: IpVersion,
    /// IP protocol number of a transport the dissector does not decode.
    pub ip_protocol: Option<u8>,
    pub transport: Transport,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    pub is_tls: bool,
}

/// Deepest label by precedence: TLS, port table, transport, IP version,
/// ethertype name, link layer, then `OTHER`.
pub fn classify_protocol(layers: &DecodedLayers, ports: &PortTable) -> String {
    if layers.is_tls {
        return TLS_LABEL.to_string();
    }
    if matches!(layers.transport, Transport::Tcp | Transport::Udp) {
        if let Some(label) = port_label(layers.src_port, layers.dst_port, ports) {
            return label.to_string();
        }
    }
    match layers.transport {
        Transport::Tcp => return "TCP".into(),
        Transport::Udp => return "UDP".into(),
        Transport::Icmp => return "ICMP".into(),
        Transport::Icmpv6 => return "ICMPV6".into(),
        Transport::Other => {
            if let Some(name) = layers.ip_protocol.and_then(ip_protocol_name) {
                return name.into();
            }
        }
        Transport::None => {}
    }
    match layers.ip_version {
        IpVersion::V4 => return "IPV4".into(),
        IpVersion::V6 => return "IPV6".into(),
        IpVersion::None => {}
    }
    if let Some(name) = layers.ethertype.and_then(ethertype_name) {
        return name.into();
    }
    match layers.link {
        LinkLayer::Ethernet => "ETHERNET".into(),
        LinkLayer::LinuxSll => "SLL".into(),
        LinkLayer::RawIp | LinkLayer::Unsupported | LinkLayer::Malformed => "OTHER".into(),
    }
}

/// Lower-numbered port wins when both ends have a label. A TLS entry is
/// skipped here because it only applies when the heuristic fired.
fn port_label(src: Option<u16>, dst: Option<u16>, ports: &PortTable) -> Option<&str> {
    let mut candidates: Vec<u16> = src.into_iter().chain(dst).collect();
    candidates.sort_unstable();
    candidates
        .into_iter()
        .filter_map(|p| ports.get(p))
        .find(|label| *label != TLS_LABEL)
}

pub fn ethertype_name(ethertype: u16) -> Option<&'static str> {
    Some(match ethertype {
        0x0806 => "ARP",
        0x8035 => "RARP",
        0x0842 => "WOL",
        0x8100 => "VLAN",
        0x88A8 => "QINQ",
        0x8847 | 0x8848 => "MPLS",
        0x8863 | 0x8864 => "PPPOE",
        0x888E => "EAPOL",
        0x88CC => "LLDP",
        0x88F7 => "PTP",
        0x9000 => "LOOPBACK",
        _ => return None,
    })
}

pub fn ip_protocol_name(proto: u8) -> Option<&'static str> {
    Some(match proto {
        2 => "IGMP",
        4 => "IPIP",
        47 => "GRE",
        50 => "ESP",
        51 => "AH",
        89 => "OSPF",
        103 => "PIM",
        112 => "VRRP",
        132 => "SCTP",
        _ => return None,
    })
}

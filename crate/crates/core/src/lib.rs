//! Offline analysis of classic pcap captures: streaming parsing, protocol
//! dissection, bidirectional flow aggregation and the statistics report.

pub mod dissect;
pub mod flow;
pub mod pcap;
pub mod pipeline;
pub mod stats;
pub mod time;

pub use dissect::{DissectedPacket, Dissector, IpVersion, PortTable, Transport};
pub use flow::{aggregate, export_flows, flow_key, FlowKey, FlowRecord, FlowTimeouts};
pub use pcap::{PacketRecord, PcapError, PcapHeader, PcapReader, PcapWriter};
pub use pipeline::{dissect_capture, DissectedCapture};
pub use stats::{build_report, AnalysisReport};

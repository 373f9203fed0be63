//! Parse and dissect a whole capture in one pass.

use std::io::Read;

use crate::dissect::{DissectedPacket, Dissector, PortTable};
use crate::pcap::{PcapError, PcapHeader, PcapReader};

#[derive(Debug)]
pub struct DissectedCapture {
    pub header: PcapHeader,
    pub packets: Vec<DissectedPacket>,
    /// Set when the file ended inside a record; `packets` holds the complete prefix.
    pub truncated: bool,
}

/// Reads every record and dissects it. A truncated trailing record is not an
/// error: the complete prefix is returned with `truncated` set.
pub fn dissect_capture<R: Read>(source: R, ports: &PortTable) -> Result<DissectedCapture, PcapError> {
    let mut reader = PcapReader::new(source)?;
    let header = reader.header().clone();
    let mut dissector = Dissector::new(ports, header.linktype, header.ts_precision);
    let mut packets = Vec::new();
    let truncated = loop {
        match reader.next_packet() {
            Ok(Some(record)) => packets.push(dissector.dissect(&record)),
            Ok(None) => break false,
            Err(PcapError::TruncatedRecord { .. }) => break true,
            Err(e) => return Err(e),
        }
    };
    Ok(DissectedCapture {
        header,
        packets,
        truncated,
    })
}

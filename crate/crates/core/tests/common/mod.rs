#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use cloudcap_core::{dissect_capture, DissectedCapture, DissectedPacket, PortTable};
use cloudcap_testkit::oracle::PacketView;

pub fn dissect_file(path: &Path) -> DissectedCapture {
    let file = File::open(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    dissect_capture(BufReader::new(file), &PortTable::default()).unwrap()
}

pub fn dissect_bytes(bytes: &[u8]) -> DissectedCapture {
    dissect_capture(bytes, &PortTable::default()).unwrap()
}

pub fn view(p: &DissectedPacket) -> PacketView {
    PacketView {
        ts_us: p.ts_us,
        frame_len: p.frame_len,
        src: p.src_addr.map(|a| a.to_string()).unwrap_or_default(),
        dst: p.dst_addr.map(|a| a.to_string()).unwrap_or_default(),
        transport: p.transport.as_str().to_string(),
        src_port: p.src_port,
        dst_port: p.dst_port,
        label: p.protocol_label.clone(),
        is_tls: p.is_tls,
        tcp_flags: p.tcp_flags,
    }
}

pub fn views(packets: &[DissectedPacket]) -> Vec<PacketView> {
    packets.iter().map(view).collect()
}

mod common;

use std::collections::HashMap;
use std::fs;

use cloudcap_core::Transport;
use cloudcap_testkit::{corpus_files, generate, testdata_dir};
use common::{dissect_bytes, dissect_file};
use proptest::prelude::*;

fn field(v: Option<String>) -> String {
    v.unwrap_or_default()
}

#[test]
fn corpus_matches_reference_dissector() {
    let mut checked = 0;
    for path in corpus_files() {
        let stem = path.file_stem().unwrap().to_string_lossy().to_string();
        let reference = fs::read_to_string(testdata_dir().join("reference").join(format!("{stem}.csv"))).unwrap();
        let capture = dissect_file(&path);
        let rows: Vec<&str> = reference.lines().skip(1).collect();
        assert_eq!(rows.len(), capture.packets.len(), "{stem}: packet count");
        for (row, p) in rows.iter().zip(&capture.packets) {
            let ours = format!(
                "{},{},{},{},{},{}",
                p.index,
                field(p.src_addr.map(|a| a.to_string())),
                field(p.dst_addr.map(|a| a.to_string())),
                p.transport.as_str(),
                field(p.src_port.map(|x| x.to_string())),
                field(p.dst_port.map(|x| x.to_string())),
            );
            assert_eq!(&ours, row, "{stem}: packet {}", p.index);
            checked += 1;
        }
    }
    assert!(checked > 700);
}

#[test]
fn mixed_capture_labels() {
    let capture = dissect_file(&testdata_dir().join("corpus/mixed.pcap"));
    let p = &capture.packets;
    let label = |i: usize| p[i].protocol_label.as_str();
    assert_eq!(label(0), "ARP");
    assert_eq!(label(1), "ARP");
    assert_eq!(label(2), "DNS");
    assert_eq!(label(3), "DNS");
    // 10.0.0.1:5353 -> 224.0.0.251:5353
    assert_eq!(p[4].src_addr.unwrap().to_string(), "10.0.0.1");
    assert_eq!(label(4), "MDNS");
    assert_eq!(label(5), "NTP");
    assert_eq!(label(6), "DHCP");
    assert_eq!(label(7), "SSDP");
    assert_eq!(label(8), "ICMP");
    assert_eq!(label(10), "ICMPV6");

    let by_label: HashMap<&str, usize> = p.iter().fold(HashMap::new(), |mut m, x| {
        *m.entry(x.protocol_label.as_str()).or_default() += 1;
        m
    });
    for expected in ["TLS", "TCP", "HTTP", "UDP", "IPV4", "IPV6", "IGMP", "GRE", "ETHERNET", "LLDP"] {
        assert!(by_label.contains_key(expected), "missing {expected}: {by_label:?}");
    }
}

#[test]
fn tls_session_is_flagged_including_bare_acks() {
    let capture = dissect_file(&testdata_dir().join("corpus/mixed.pcap"));
    let session: Vec<_> = capture
        .packets
        .iter()
        .filter(|p| p.src_port == Some(51000) || p.dst_port == Some(51000))
        .collect();
    // the three handshake segments come before any TLS record
    assert!(session[..3].iter().all(|p| !p.is_tls));
    // every later segment either carries a record or is an empty ACK of the flagged connection
    assert!(session[3..].iter().all(|p| p.is_tls), "{:?}", session.iter().map(|p| p.is_tls).collect::<Vec<_>>());

    // plain HTTP sent to port 443 is never TLS
    assert!(capture
        .packets
        .iter()
        .filter(|p| p.src_port == Some(51004) || p.dst_port == Some(51004))
        .all(|p| !p.is_tls && p.protocol_label == "TCP"));
}

#[test]
fn linux_cooked_and_raw_ip_labels() {
    let cooked = dissect_file(&testdata_dir().join("corpus/cooked.pcap"));
    let labels: Vec<_> = cooked.packets.iter().map(|p| p.protocol_label.as_str()).collect();
    assert_eq!(labels, ["TCP", "TCP", "TCP", "TLS", "TLS", "DNS", "ARP"]);

    let raw = dissect_file(&testdata_dir().join("corpus/rawip.pcap"));
    assert!(raw.packets[..10].iter().all(|p| p.protocol_label == "DNS"));
    assert_eq!(raw.packets[10].protocol_label, "TCP");
    assert_eq!(raw.packets[11].protocol_label, "ICMP");
}

fn check_invariants(bytes: &[u8]) {
    let a = dissect_bytes(bytes);
    let b = dissect_bytes(bytes);
    assert_eq!(a.packets, b.packets, "dissection is deterministic");

    let mut reader = cloudcap_core::PcapReader::new(bytes).unwrap();
    for p in &a.packets {
        let rec = reader.next_packet().unwrap().unwrap();
        assert_eq!(p.frame_len, rec.origlen);
        assert!(!p.protocol_label.is_empty());
        if p.is_tls {
            assert_eq!(p.transport, Transport::Tcp);
        }
        let ported = matches!(p.transport, Transport::Tcp | Transport::Udp);
        assert_eq!(p.src_port.is_some(), ported);
        assert_eq!(p.dst_port.is_some(), ported);
        assert!(p.payload_preview.len() <= 64);
    }
    let tls = a.packets.iter().filter(|p| p.is_tls).count();
    let tcp = a.packets.iter().filter(|p| p.transport == Transport::Tcp).count();
    assert!(tls <= tcp);
}

#[test]
fn corpus_invariants() {
    for path in corpus_files() {
        check_invariants(&fs::read(&path).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_capture_invariants(seed in any::<u64>(), n in 1usize..300) {
        check_invariants(&generate::random_capture(seed, n));
    }
}

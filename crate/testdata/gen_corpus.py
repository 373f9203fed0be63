#!/usr/bin/env python3
"""Regenerate the golden pcap corpus under testdata/.

Frames are built with scapy; the pcap container is written by hand so the
byte order, timestamp precision and snaplen of each file are explicit.
Everything is seeded, so rerunning produces identical bytes.
"""

import os
import random
import struct

from scapy.all import (
    ARP,
    DNS,
    DNSQR,
    DNSRR,
    GRE,
    ICMP,
    IP,
    TCP,
    UDP,
    Dot1Q,
    Ether,
    ICMPv6EchoReply,
    ICMPv6EchoRequest,
    IPv6,
    IPv6ExtHdrFragment,
    IPv6ExtHdrHopByHop,
    Raw,
    fragment,
)
from scapy.contrib.igmp import IGMP
from scapy.layers.l2 import CookedLinux

HERE = os.path.dirname(os.path.abspath(__file__))
CORPUS = os.path.join(HERE, "corpus")
MALFORMED = os.path.join(HERE, "malformed")

PHONE_MAC = "02:00:00:00:00:02"
GW_MAC = "02:00:00:00:00:01"
PHONE = "192.168.1.23"
GW = "192.168.1.1"
PHONE6 = "fd00::23"


def write_pcap(path, frames, linktype=1, big_endian=False, nano=False, snaplen=65535, tail=b""):
    """frames: list of (ts_float_seconds, bytes)."""
    end = ">" if big_endian else "<"
    magic = 0xA1B23C4D if nano else 0xA1B2C3D4
    out = bytearray(struct.pack(end + "IHHiIII", magic, 2, 4, 0, 0, snaplen, linktype))
    for ts, data in frames:
        sec = int(ts)
        frac_unit = 1_000_000_000 if nano else 1_000_000
        frac = int(round((ts - sec) * frac_unit))
        if frac >= frac_unit:
            sec, frac = sec + 1, frac - frac_unit
        cap = data[:snaplen]
        out += struct.pack(end + "IIII", sec, frac, len(cap), len(data))
        out += cap
    out += tail
    with open(path, "wb") as f:
        f.write(out)


def eth(pkt, src=PHONE_MAC, dst=GW_MAC):
    return bytes(Ether(src=src, dst=dst) / pkt)


def tls_record(content_type, length, version=0x0303, rng=None):
    body = bytes(rng.getrandbits(8) for _ in range(length)) if rng else b"\x00" * length
    return struct.pack(">BHH", content_type, version, length) + body


class TcpSession:
    """Tracks sequence numbers for a synthetic TCP conversation."""

    def __init__(self, client, cport, server, sport, v6=False):
        self.client, self.cport, self.server, self.sport = client, cport, server, sport
        self.v6 = v6
        self.cseq, self.sseq = 1000, 5000

    def _ip(self, from_client):
        src, dst = (self.client, self.server) if from_client else (self.server, self.client)
        return IPv6(src=src, dst=dst) if self.v6 else IP(src=src, dst=dst)

    def seg(self, from_client, flags, payload=b""):
        sp, dp = (self.cport, self.sport) if from_client else (self.sport, self.cport)
        seq, ack = (self.cseq, self.sseq) if from_client else (self.sseq, self.cseq)
        pkt = self._ip(from_client) / TCP(sport=sp, dport=dp, flags=flags, seq=seq, ack=ack, window=64240)
        if payload:
            pkt = pkt / Raw(payload)
        step = len(payload) + (1 if "S" in flags or "F" in flags else 0)
        if from_client:
            self.cseq += step
        else:
            self.sseq += step
        src_mac, dst_mac = (PHONE_MAC, GW_MAC) if from_client else (GW_MAC, PHONE_MAC)
        return eth(pkt, src_mac, dst_mac)

    def handshake(self):
        return [self.seg(True, "S"), self.seg(False, "SA"), self.seg(True, "A")]


def mixed():
    rng = random.Random(7)
    t = 1_700_000_000.0
    frames = []

    def add(data, dt=0.05):
        nonlocal t
        t += dt
        frames.append((t, data))

    add(eth(ARP(op=1, hwsrc=PHONE_MAC, psrc=PHONE, pdst=GW), dst="ff:ff:ff:ff:ff:ff"))
    add(eth(ARP(op=2, hwsrc=GW_MAC, psrc=GW, hwdst=PHONE_MAC, pdst=PHONE), GW_MAC, PHONE_MAC))
    # DNS lookup
    q = DNS(id=0x1234, rd=1, qd=DNSQR(qname="stream.example.com"))
    add(eth(IP(src=PHONE, dst=GW) / UDP(sport=40001, dport=53) / q))
    r = DNS(id=0x1234, qr=1, rd=1, ra=1, qd=DNSQR(qname="stream.example.com"),
            an=DNSRR(rrname="stream.example.com", rdata="93.184.216.34"))
    add(eth(IP(src=GW, dst=PHONE) / UDP(sport=53, dport=40001) / r, GW_MAC, PHONE_MAC))
    # mDNS
    add(eth(IP(src="10.0.0.1", dst="224.0.0.251", ttl=255) / UDP(sport=5353, dport=5353)
            / DNS(qd=DNSQR(qname="_airplay._tcp.local", qtype="PTR")), dst="01:00:5e:00:00:fb"))
    # NTP, DHCP, SSDP
    add(eth(IP(src=PHONE, dst="162.159.200.1") / UDP(sport=47000, dport=123) / Raw(b"\x23" + b"\x00" * 47)))
    add(eth(IP(src="0.0.0.0", dst="255.255.255.255") / UDP(sport=68, dport=67) / Raw(b"\x01\x01\x06\x00" + b"\x00" * 236)))
    add(eth(IP(src=PHONE, dst="239.255.255.250") / UDP(sport=50000, dport=1900)
            / Raw(b"M-SEARCH * HTTP/1.1\r\nHOST: 239.255.255.250:1900\r\n\r\n")))
    # ICMP echo
    add(eth(IP(src=PHONE, dst="8.8.8.8") / ICMP(type=8, id=1, seq=1) / Raw(b"abcdefgh" * 4)))
    add(eth(IP(src="8.8.8.8", dst=PHONE) / ICMP(type=0, id=1, seq=1) / Raw(b"abcdefgh" * 4), GW_MAC, PHONE_MAC))
    # ICMPv6 echo
    add(eth(IPv6(src=PHONE6, dst="2001:db8::1") / ICMPv6EchoRequest(id=2, seq=1, data=b"ping")))
    add(eth(IPv6(src="2001:db8::1", dst=PHONE6) / ICMPv6EchoReply(id=2, seq=1, data=b"ping"), GW_MAC, PHONE_MAC))

    # TLS session over IPv4
    s = TcpSession(PHONE, 51000, "93.184.216.34", 443)
    for f in s.handshake():
        add(f, 0.02)
    add(s.seg(True, "PA", tls_record(22, 200, 0x0301, rng)), 0.01)
    add(s.seg(False, "A"), 0.02)
    add(s.seg(False, "PA", tls_record(22, 1200, 0x0303, rng)), 0.01)
    add(s.seg(True, "A"), 0.01)
    add(s.seg(True, "PA", tls_record(20, 1) + tls_record(22, 40, 0x0303, rng)), 0.01)
    for i in range(60):
        add(s.seg(False, "PA", tls_record(23, rng.randint(300, 1300), 0x0303, rng)), 0.04)
        if i % 3 == 0:
            add(s.seg(True, "A"), 0.005)
    add(s.seg(True, "PA", tls_record(21, 26, 0x0303, rng)), 0.02)
    add(s.seg(True, "FA"), 0.01)
    add(s.seg(False, "FA"), 0.01)
    add(s.seg(True, "A"), 0.01)

    # Plain HTTP on 80
    h = TcpSession(PHONE, 51002, "203.0.113.80", 80)
    for f in h.handshake():
        add(f, 0.01)
    add(h.seg(True, "PA", b"GET /playlist.m3u HTTP/1.1\r\nHost: radio.example\r\n\r\n"))
    add(h.seg(False, "PA", b"HTTP/1.1 200 OK\r\nContent-Length: 5\r\n\r\nhello"))
    # Not TLS on 443
    n = TcpSession(PHONE, 51004, "198.51.100.7", 443)
    for f in n.handshake():
        add(f, 0.01)
    add(n.seg(True, "PA", b"GET / HTTP/1.1\r\nHost: x\r\n\r\n"))
    add(n.seg(False, "A"))
    # Ephemeral ports
    e = TcpSession("10.0.0.5", 49152, "10.0.0.6", 49153)
    for f in e.handshake():
        add(f, 0.01)
    add(e.seg(True, "PA", b"\x00\x01binary-proto"))
    add(e.seg(False, "RA"))

    # IPv6 TLS
    s6 = TcpSession(PHONE6, 52000, "2001:db8::443", 443, v6=True)
    for f in s6.handshake():
        add(f, 0.01)
    add(s6.seg(True, "PA", tls_record(22, 180, 0x0301, rng)))
    for _ in range(10):
        add(s6.seg(False, "PA", tls_record(23, rng.randint(100, 900), 0x0303, rng)), 0.03)
        add(s6.seg(True, "A"), 0.005)

    # 802.1Q tagged DNS
    add(bytes(Ether(src=PHONE_MAC, dst=GW_MAC) / Dot1Q(vlan=42) / IP(src="10.42.0.2", dst="10.42.0.1")
              / UDP(sport=40100, dport=53) / DNS(qd=DNSQR(qname="vlan.example"))))
    # IPv4 with options (IHL 6)
    add(eth(IP(src=PHONE, dst=GW, options=b"\x94\x04\x00\x00") / UDP(sport=40200, dport=9999) / Raw(b"opts")))
    # IPv4 fragments of a large UDP datagram
    big = IP(src=PHONE, dst="203.0.113.9", id=777) / UDP(sport=40300, dport=7000) / Raw(bytes(range(256)) * 12)
    for frag in fragment(big, fragsize=1200):
        add(eth(frag), 0.001)
    # IPv6 with hop-by-hop then UDP, and an IPv6 fragment header (first and non-first)
    add(eth(IPv6(src=PHONE6, dst="ff02::16") / IPv6ExtHdrHopByHop() / UDP(sport=40400, dport=9000) / Raw(b"hbh")))
    add(eth(IPv6(src=PHONE6, dst="2001:db8::9") / IPv6ExtHdrFragment(offset=0, m=1, id=9)
            / UDP(sport=40500, dport=9001, len=1000) / Raw(b"A" * 64)))
    add(eth(IPv6(src=PHONE6, dst="2001:db8::9") / IPv6ExtHdrFragment(offset=8, m=0, id=9) / Raw(b"B" * 64)))
    # IGMP and GRE (tunnel payload stays opaque)
    add(eth(IP(src=PHONE, dst="224.0.0.22", ttl=1) / IGMP(type=0x16, gaddr="224.0.0.251")))
    add(eth(IP(src="172.16.0.1", dst="172.16.0.2") / GRE() / IP(src="10.9.9.1", dst="10.9.9.2") / UDP(sport=1, dport=2)))
    # Unknown ethertype and LLDP
    add(bytes(Ether(src=PHONE_MAC, dst=GW_MAC, type=0x88B5) / Raw(b"\x00" * 46)))
    add(bytes(Ether(src=GW_MAC, dst="01:80:c2:00:00:0e", type=0x88CC) / Raw(b"\x02\x07\x04" + b"\x00" * 43)))
    # Out-of-order timestamp: this DNS packet is stamped 3 s in the past
    frames.append((t - 3.0, eth(IP(src=PHONE, dst=GW) / UDP(sport=40002, dport=53) / DNS(qd=DNSQR(qname="late.example")))))
    t += 0.01

    # Filler traffic: a second TLS stream and scattered DNS
    s2 = TcpSession(PHONE, 51010, "151.101.1.1", 443)
    for f in s2.handshake():
        add(f, 0.02)
    add(s2.seg(True, "PA", tls_record(22, 220, 0x0301, rng)))
    for i in range(90):
        add(s2.seg(False, "PA", tls_record(23, rng.randint(200, 1400), 0x0303, rng)), rng.uniform(0.01, 0.2))
        if i % 2 == 0:
            add(s2.seg(True, "A"), 0.003)
        if i % 30 == 0:
            add(eth(IP(src=PHONE, dst=GW) / UDP(sport=41000 + i, dport=53) / DNS(qd=DNSQR(qname=f"cdn{i}.example"))))
    return frames


def radio():
    """TLS audio stream over about a minute, written big-endian with ns stamps."""
    rng = random.Random(11)
    t = 1_710_000_000.123456789
    frames = []
    q = DNS(id=7, rd=1, qd=DNSQR(qname="radio.example.net"))
    frames.append((t, eth(IP(src=PHONE, dst=GW) / UDP(sport=39000, dport=53) / q)))
    t += 0.03
    frames.append((t, eth(IP(src=GW, dst=PHONE) / UDP(sport=53, dport=39000)
                        / DNS(id=7, qr=1, qd=DNSQR(qname="radio.example.net"),
                              an=DNSRR(rrname="radio.example.net", rdata="198.18.0.10")), GW_MAC, PHONE_MAC)))
    s = TcpSession(PHONE, 53000, "198.18.0.10", 443)
    for f in s.handshake():
        t += 0.02
        frames.append((t, f))
    t += 0.01
    frames.append((t, s.seg(True, "PA", tls_record(22, 250, 0x0301, rng))))
    t += 0.05
    frames.append((t, s.seg(False, "PA", tls_record(22, 1300, 0x0303, rng))))
    while len(frames) < 400:
        t += rng.uniform(0.05, 0.25)
        frames.append((t, s.seg(False, "PA", tls_record(23, rng.randint(900, 1400), 0x0303, rng))))
        if rng.random() < 0.5:
            t += 0.002
            frames.append((t, s.seg(True, "A")))
        if rng.random() < 0.03:
            t += 0.01
            frames.append((t, eth(IP(src=PHONE, dst="162.159.200.1") / UDP(sport=47001, dport=123) / Raw(b"\x23" + b"\x00" * 47))))
    return frames


def udp_gap():
    t = 1_720_000_000.0
    frames = []
    for i in range(6):
        t += 20.0 if i else 0.0
        frames.append((t, eth(IP(src="10.1.1.2", dst="10.1.1.3") / UDP(sport=6000, dport=7000) / Raw(b"tick%d" % i))))
        frames.append((t + 0.5, eth(IP(src="10.1.1.3", dst="10.1.1.2") / UDP(sport=7000, dport=6000) / Raw(b"tock%d" % i), GW_MAC, PHONE_MAC)))
        frames.append((t + 1.0, eth(IP(src="10.1.1.2", dst="10.1.1.4") / UDP(sport=6001, dport=53) / DNS(qd=DNSQR(qname="gap.example")))))
    return frames


def cooked():
    t = 1_730_000_000.25
    frames = []
    s = TcpSession(PHONE, 54000, "93.184.216.34", 443)
    for raw in s.handshake() + [s.seg(True, "PA", tls_record(22, 100, 0x0301)), s.seg(False, "PA", tls_record(23, 500))]:
        inner = Ether(raw).payload
        proto = 0x0800
        frames.append((t, bytes(CookedLinux(pkttype=0, lladdrtype=1, lladdrlen=6, src=b"\x02" * 6 + b"\x00\x00", proto=proto) / inner)))
        t += 0.1
    frames.append((t, bytes(CookedLinux(pkttype=4, lladdrtype=1, lladdrlen=6, src=b"\x02" * 8, proto=0x86DD)
                          / IPv6(src=PHONE6, dst="2001:db8::53") / UDP(sport=40000, dport=53) / DNS(qd=DNSQR(qname="sll.example")))))
    t += 0.1
    frames.append((t, bytes(CookedLinux(pkttype=0, lladdrtype=1, lladdrlen=6, src=b"\x02" * 8, proto=0x0806)
                          / ARP(psrc=GW, pdst=PHONE))))
    return frames


def rawip():
    t = 1_730_000_100.0
    frames = []
    for i in range(5):
        frames.append((t, bytes(IP(src="10.8.0.2", dst="1.1.1.1") / UDP(sport=45000 + i, dport=53) / DNS(qd=DNSQR(qname="raw.example")))))
        t += 0.2
        frames.append((t, bytes(IP(src="1.1.1.1", dst="10.8.0.2") / UDP(sport=53, dport=45000 + i) / DNS(qr=1, qd=DNSQR(qname="raw.example")))))
        t += 0.2
    frames.append((t, bytes(IPv6(src="fd00::2", dst="2606:4700::1111") / TCP(sport=55000, dport=443, flags="S"))))
    t += 0.1
    frames.append((t, bytes(IP(src="10.8.0.2", dst="9.9.9.9") / ICMP() / Raw(b"x" * 16))))
    return frames


def handshake():
    t = 1_700_000_100.0
    s = TcpSession("10.0.0.2", 51000, "93.184.216.34", 443)
    return [(t + 0.1 * i, f) for i, f in enumerate(s.handshake())]


def snaplen_frames():
    rng = random.Random(3)
    t = 1_700_000_200.0
    frames = []
    s = TcpSession(PHONE, 51500, "93.184.216.34", 443)
    for f in s.handshake():
        frames.append((t, f))
        t += 0.05
    frames.append((t, s.seg(True, "PA", tls_record(22, 300, 0x0301, rng))))
    for _ in range(20):
        t += 0.1
        frames.append((t, s.seg(False, "PA", tls_record(23, rng.randint(500, 1400), 0x0303, rng))))
    return frames


def main():
    os.makedirs(CORPUS, exist_ok=True)
    os.makedirs(MALFORMED, exist_ok=True)
    mixed_frames = mixed()
    write_pcap(os.path.join(CORPUS, "mixed.pcap"), mixed_frames)
    write_pcap(os.path.join(CORPUS, "radio_be_nano.pcap"), radio(), big_endian=True, nano=True)
    write_pcap(os.path.join(CORPUS, "udp_gap.pcap"), udp_gap())
    write_pcap(os.path.join(CORPUS, "cooked.pcap"), cooked(), linktype=113)
    write_pcap(os.path.join(CORPUS, "rawip.pcap"), rawip(), linktype=101)
    write_pcap(os.path.join(CORPUS, "handshake.pcap"), handshake())
    write_pcap(os.path.join(CORPUS, "snaplen96.pcap"), snaplen_frames(), snaplen=96)

    # mixed.pcap with a final record whose data is cut short
    write_pcap(os.path.join(MALFORMED, "truncated.pcap"), mixed_frames[:40],
               tail=struct.pack("<IIII", 1_700_000_999, 0, 100, 100) + b"\x00" * 10)
    # Section header block of a pcapng file
    with open(os.path.join(MALFORMED, "pcapng_header.bin"), "wb") as f:
        f.write(bytes.fromhex("0a0d0d0a1c0000004d3c2b1a01000000ffffffffffffffff1c000000"))
    # Valid classic header followed by garbage that cannot form a record
    write_pcap(os.path.join(MALFORMED, "forged_magic.bin"), [], tail=b"\xde\xad\xbe\xef" * 3)


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Produce reference per-packet fixtures for the golden corpus using scapy.

For every pcap in corpus/ this writes reference/<name>.csv with columns
index,src,dst,transport,src_port,dst_port. Only the outermost network and
transport headers are reported; tunnel payloads are not followed.
"""

import csv
import os

from scapy.all import IP, TCP, UDP, ICMP, Dot1Q, Ether, IPv6, RawPcapReader
from scapy.layers.inet6 import (
    IPv6ExtHdrDestOpt,
    IPv6ExtHdrFragment,
    IPv6ExtHdrHopByHop,
    IPv6ExtHdrRouting,
    _ICMPv6,
)
from scapy.layers.l2 import CookedLinux

HERE = os.path.dirname(os.path.abspath(__file__))
V6_EXT = (IPv6ExtHdrHopByHop, IPv6ExtHdrRouting, IPv6ExtHdrFragment, IPv6ExtHdrDestOpt)


def network_layer(data, linktype):
    if linktype == 1:
        layer = Ether(data).payload
        if isinstance(layer, Dot1Q):
            layer = layer.payload
    elif linktype == 113:
        layer = CookedLinux(data).payload
    elif linktype == 101:
        version = data[0] >> 4 if data else 0
        layer = IP(data) if version == 4 else IPv6(data) if version == 6 else None
    else:
        layer = None
    if isinstance(layer, (IP, IPv6)):
        return layer
    return None


def transport_of(ip):
    if isinstance(ip, IP):
        if ip.frag != 0:
            return "none", None
        inner = ip.payload
    else:
        inner = ip.payload
        while isinstance(inner, V6_EXT):
            if isinstance(inner, IPv6ExtHdrFragment) and inner.offset != 0:
                return "none", None
            inner = inner.payload
        if getattr(inner, "name", "") == "Raw" and ip.nh == 59:
            return "none", None
    if isinstance(inner, TCP):
        return "tcp", inner
    if isinstance(inner, UDP):
        return "udp", inner
    if isinstance(inner, ICMP):
        return "icmp", None
    if isinstance(inner, _ICMPv6):
        return "icmpv6", None
    return "other", None


def main():
    out_dir = os.path.join(HERE, "reference")
    os.makedirs(out_dir, exist_ok=True)
    corpus = os.path.join(HERE, "corpus")
    for name in sorted(os.listdir(corpus)):
        if not name.endswith(".pcap"):
            continue
        reader = RawPcapReader(os.path.join(corpus, name))
        linktype = reader.linktype
        rows = []
        for index, (data, _meta) in enumerate(reader):
            ip = network_layer(data, linktype)
            if ip is None:
                rows.append([index, "", "", "none", "", ""])
                continue
            transport, l4 = transport_of(ip)
            sport = l4.sport if l4 is not None else ""
            dport = l4.dport if l4 is not None else ""
            rows.append([index, ip.src, ip.dst, transport, sport, dport])
        reader.close()
        with open(os.path.join(out_dir, name[:-5] + ".csv"), "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["index", "src", "dst", "transport", "src_port", "dst_port"])
            w.writerows(rows)


if __name__ == "__main__":
    main()

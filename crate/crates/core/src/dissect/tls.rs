//! Heuristic TLS recognition from the first bytes of a TCP payload.

pub const TLS_PORT: u16 = 443;

/// change_cipher_spec, alert, handshake, application_data
const CONTENT_TYPES: [u8; 4] = [20, 21, 22, 23];

/// True when the payload opens with a plausible TLS record header: a known
/// content type, major version 3 and a minor version of SSL 3.0 up to TLS 1.3.
pub fn looks_like_tls_record(payload: &[u8]) -> bool {
    payload.len() >= 3 && CONTENT_TYPES.contains(&payload[0]) && payload[1] == 0x03 && payload[2] <= 0x04
}

/// TLS flag for one TCP segment.
///
/// `flow_flagged` is whether an earlier segment of the same connection was
/// recognised. It only matters for empty segments touching port 443, which
/// inherit the connection's flag.
pub fn detect_tls(payload: &[u8], src_port: u16, dst_port: u16, flow_flagged: bool) -> bool {
    if looks_like_tls_record(payload) {
        return true;
    }
    payload.is_empty() && (src_port == TLS_PORT || dst_port == TLS_PORT) && flow_flagged
}

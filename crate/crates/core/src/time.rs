use chrono::{DateTime, Utc};

/// ISO-8601 UTC with microsecond precision, e.g. `2023-11-14T22:13:20.050000Z`.
pub fn iso_micros(ts_us: i64) -> String {
    match DateTime::<Utc>::from_timestamp_micros(ts_us) {
        Some(t) => t.format("%Y-%m-%dT%H:%M:%S%.6fZ").to_string(),
        None => String::new(),
    }
}

pub fn now_micros() -> i64 {
    Utc::now().timestamp_micros()
}

/// Seconds with six decimals from a microsecond span.
pub fn seconds_text(span_us: i64) -> String {
    let sign = if span_us < 0 { "-" } else { "" };
    let abs = span_us.unsigned_abs();
    format!("{sign}{}.{:06}", abs / 1_000_000, abs % 1_000_000)
}

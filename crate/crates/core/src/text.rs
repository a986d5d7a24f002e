//! Text conventions shared by every file the crate writes: ISO-8601 UTC
//! timestamps and numbers rounded to nine significant digits.

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};

/// Significant digits used for every serialized number.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Rounds `x` to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest decimal rendering of `x` after rounding to nine significant digits.
///
/// Magnitudes outside `[1e-4, 1e15)` use exponent notation.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let r = round_sig(x);
    let a = r.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// ISO-8601 UTC rendering of a millisecond timestamp. Sub-second digits are
/// only written when the timestamp carries them.
pub fn format_timestamp(ms: i64) -> String {
    match DateTime::<Utc>::from_timestamp_millis(ms) {
        Some(dt) if ms.rem_euclid(1000) == 0 => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string(),
        None => ms.to_string(),
    }
}

/// Parses an ISO-8601 / RFC 3339 date-time (or a bare `YYYY-MM-DD` date) as
/// milliseconds since the Unix epoch. Offsets are honoured; naive values are UTC.
pub fn parse_iso_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_millis());
    }
    for pattern in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, pattern) {
            return Some(dt.and_utc().timestamp_millis());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp_millis())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_digits() {
        assert_eq!(format_sig(0.1), "0.1");
        assert_eq!(format_sig(100.0), "100");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig(-2.0 / 3.0), "-0.666666667");
        assert_eq!(format_sig(123_456_789_012.0), "123456789000");
        assert_eq!(format_sig(1.234_567_891_23e-300), "1.23456789e-300");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn timestamps_round_trip() {
        assert_eq!(format_timestamp(0), "1970-01-01T00:00:00Z");
        assert_eq!(format_timestamp(1_500), "1970-01-01T00:00:01.500Z");
        assert_eq!(parse_iso_timestamp("1970-01-01T00:00:01.500Z"), Some(1_500));
        assert_eq!(parse_iso_timestamp("2019-07-01"), Some(1_561_939_200_000));
        assert_eq!(parse_iso_timestamp("2019-07-01 00:00:00"), Some(1_561_939_200_000));
        assert_eq!(parse_iso_timestamp("2019-07-01T02:00:00+02:00"), Some(1_561_939_200_000));
        assert_eq!(parse_iso_timestamp("yesterday"), None);
    }
}

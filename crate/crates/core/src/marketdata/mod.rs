//! Raw market data: trades, candles, and their aggregation into time bars.

mod aggregate;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub use aggregate::{aggregate_trades, resample};
pub use parse::{
    infer_time_frame, open_source, parse_candles, parse_trades, write_candles, FormatDescriptor, Parsed, RejectReason,
    RejectedRow, SkipReport, TimestampUnit,
};

const MINUTE_MS: i64 = 60_000;
const HOUR_MS: i64 = 60 * MINUTE_MS;
const DAY_MS: i64 = 24 * HOUR_MS;
const WEEK_MS: i64 = 7 * DAY_MS;
/// 1970-01-05T00:00:00Z, the first Monday after the epoch.
const FIRST_MONDAY_MS: i64 = 4 * DAY_MS;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("unreadable source: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("no parsable rows ({rejected} rejected)")]
    NoParsableRows { rejected: usize },
    #[error("input is not sorted by time at position {index}")]
    Unsorted { index: usize },
    #[error("bars of mixed time frames ({first} and {other})")]
    MixedTimeFrames { first: TimeFrame, other: TimeFrame },
    #[error("cannot resample {from} bars to {to}")]
    IncompatibleTimeFrames { from: TimeFrame, to: TimeFrame },
    #[error("cannot infer the candle time frame from open_time spacing")]
    UnknownTimeFrame,
    #[error("unknown time frame `{0}` (expected 5m, 1h, 1d or 1w)")]
    BadTimeFrameLabel(String),
}

/// Bar width. Intraday and daily buckets start at integer multiples of their
/// duration since the epoch; weekly buckets start Monday 00:00 UTC.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimeFrame {
    #[serde(rename = "5m")]
    M5,
    #[serde(rename = "1h")]
    H1,
    #[serde(rename = "1d")]
    D1,
    #[serde(rename = "1w")]
    W1,
}

impl TimeFrame {
    pub const ALL: [TimeFrame; 4] = [TimeFrame::M5, TimeFrame::H1, TimeFrame::D1, TimeFrame::W1];

    pub const fn duration_ms(self) -> i64 {
        match self {
            TimeFrame::M5 => 5 * MINUTE_MS,
            TimeFrame::H1 => HOUR_MS,
            TimeFrame::D1 => DAY_MS,
            TimeFrame::W1 => WEEK_MS,
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            TimeFrame::M5 => "5m",
            TimeFrame::H1 => "1h",
            TimeFrame::D1 => "1d",
            TimeFrame::W1 => "1w",
        }
    }

    /// Start of the bucket containing `timestamp_ms`.
    pub fn bucket_start(self, timestamp_ms: i64) -> i64 {
        let width = self.duration_ms();
        let anchor = match self {
            TimeFrame::W1 => FIRST_MONDAY_MS,
            _ => 0,
        };
        anchor + (timestamp_ms - anchor).div_euclid(width) * width
    }

    pub fn is_aligned(self, timestamp_ms: i64) -> bool {
        self.bucket_start(timestamp_ms) == timestamp_ms
    }

    /// Whether every bucket of `self` nests inside exactly one bucket of `target`.
    pub fn nests_in(self, target: TimeFrame) -> bool {
        let (src, dst) = (self.duration_ms(), target.duration_ms());
        dst >= src && (target == TimeFrame::W1 || dst % src == 0)
    }

    /// Number of whole bars covering `days` calendar days (365 days: 105 120 / 8 760 / 365 / 52).
    pub fn bars_in_days(self, days: u32) -> usize {
        (i64::from(days) * DAY_MS / self.duration_ms()) as usize
    }
}

impl fmt::Display for TimeFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TimeFrame {
    type Err = MarketDataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "5m" | "m5" | "5min" => Ok(TimeFrame::M5),
            "1h" | "h1" | "60m" => Ok(TimeFrame::H1),
            "1d" | "d1" | "24h" => Ok(TimeFrame::D1),
            "1w" | "w1" | "7d" => Ok(TimeFrame::W1),
            _ => Err(MarketDataError::BadTimeFrameLabel(s.to_string())),
        }
    }
}

/// One executed trade. `size` is the absolute traded quantity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trade<T> {
    pub timestamp: i64,
    pub price: T,
    pub size: T,
}

impl<T: Scalar> Trade<T> {
    pub fn new(timestamp: i64, price: T, size: T) -> Self {
        Self { timestamp, price, size }
    }
}

/// OHLCV bar stamped with the open time of its bucket.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bar<T> {
    pub open_time: i64,
    pub time_frame: TimeFrame,
    pub open: T,
    pub high: T,
    pub low: T,
    pub close: T,
    pub volume: T,
    pub trade_count: u64,
}

impl<T: Scalar> Bar<T> {
    pub(crate) fn from_trade(trade: &Trade<T>, time_frame: TimeFrame) -> Self {
        Self {
            open_time: time_frame.bucket_start(trade.timestamp),
            time_frame,
            open: trade.price,
            high: trade.price,
            low: trade.price,
            close: trade.price,
            volume: trade.size,
            trade_count: 1,
        }
    }

    pub(crate) fn push_trade(&mut self, trade: &Trade<T>) {
        self.high = self.high.max(trade.price);
        self.low = self.low.min(trade.price);
        self.close = trade.price;
        self.volume += trade.size;
        self.trade_count += 1;
    }

    /// Prices positive, volume non-negative, high/low enclosing open and close.
    pub fn is_consistent(&self) -> bool {
        let prices = [self.open, self.high, self.low, self.close];
        prices.iter().all(|p| p.is_finite() && *p > T::zero())
            && self.volume.is_finite()
            && self.volume >= T::zero()
            && self.low <= self.open.min(self.close)
            && self.high >= self.open.max(self.close)
    }
}

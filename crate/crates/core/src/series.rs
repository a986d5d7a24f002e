//! Return series derived from bar closes: the only input the statistics accept.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marketdata::{Bar, TimeFrame, TimestampUnit};
use crate::text::{format_sig, format_timestamp};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("need at least 2 bars to form a return, got {0}")]
    TooFewBars(usize),
    #[error("non-positive close price at bar {0}")]
    NonPositiveClose(usize),
    #[error("timestamps ({timestamps}) and values ({values}) differ in length")]
    LengthMismatch { timestamps: usize, values: usize },
    #[error("timestamps not strictly increasing at position {0}")]
    NotIncreasing(usize),
    #[error("non-finite return at position {0}")]
    NonFinite(usize),
    #[error("unknown return kind `{0}` (expected log or simple)")]
    BadKind(String),
    #[error("malformed return series file at line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKind {
    /// `ln(close_t / close_{t-1})`
    #[default]
    Log,
    /// `close_t / close_{t-1} - 1`
    Simple,
}

impl fmt::Display for ReturnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReturnKind::Log => "LOG",
            ReturnKind::Simple => "SIMPLE",
        })
    }
}

impl FromStr for ReturnKind {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "log" => Ok(ReturnKind::Log),
            "simple" => Ok(ReturnKind::Simple),
            _ => Err(SeriesError::BadKind(s.to_string())),
        }
    }
}

/// Timestamped finite returns for one market and time frame.
///
/// The optional gap mask marks returns whose two bars are not adjacent buckets.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSeries<T> {
    market_id: String,
    time_frame: TimeFrame,
    kind: ReturnKind,
    timestamps: Vec<i64>,
    values: Vec<T>,
    gap_mask: Option<Vec<bool>>,
}

impl<T: Scalar> ReturnSeries<T> {
    pub fn new(
        market_id: impl Into<String>,
        time_frame: TimeFrame,
        kind: ReturnKind,
        timestamps: Vec<i64>,
        values: Vec<T>,
    ) -> Result<Self, SeriesError> {
        if timestamps.len() != values.len() {
            return Err(SeriesError::LengthMismatch { timestamps: timestamps.len(), values: values.len() });
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(SeriesError::NotIncreasing(i + 1));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite(i));
        }
        Ok(Self { market_id: market_id.into(), time_frame, kind, timestamps, values, gap_mask: None })
    }

    /// Attaches a gap mask. Panics if its length differs from the series length.
    pub fn with_gap_mask(mut self, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), self.values.len(), "gap mask length");
        self.gap_mask = Some(mask);
        self
    }

    pub fn market_id(&self) -> &str {
        &self.market_id
    }

    pub fn time_frame(&self) -> TimeFrame {
        self.time_frame
    }

    pub fn kind(&self) -> ReturnKind {
        self.kind
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn gap_mask(&self) -> Option<&[bool]> {
        self.gap_mask.as_deref()
    }

    /// Number of returns spanning at least one empty bucket.
    pub fn gap_count(&self) -> usize {
        self.gap_mask.as_ref().map_or(0, |m| m.iter().filter(|g| **g).count())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes `# market=.. tf=.. kind=..`, a `timestamp,return` header, then one row per return.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# market={} tf={} kind={}", self.market_id, self.time_frame, self.kind)?;
        writeln!(out, "timestamp,return")?;
        for (ts, v) in self.timestamps.iter().zip(&self.values) {
            writeln!(out, "{},{}", format_timestamp(*ts), format_sig(v.to_f64_lossy()))?;
        }
        out.flush()
    }

    /// Reads the format produced by [`ReturnSeries::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, SeriesError> {
        let bad = |line: usize, reason: &str| SeriesError::Format { line, reason: reason.to_string() };
        let mut lines = input.lines().enumerate();
        let (_, meta) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        let meta = meta?;
        let fields = meta.strip_prefix('#').ok_or_else(|| bad(1, "missing metadata comment"))?;
        let (mut market, mut tf, mut kind) = (None, None, None);
        for pair in fields.split_whitespace() {
            match pair.split_once('=') {
                Some(("market", v)) => market = Some(v.to_string()),
                Some(("tf", v)) => tf = v.parse::<TimeFrame>().ok(),
                Some(("kind", v)) => kind = v.parse::<ReturnKind>().ok(),
                _ => {}
            }
        }
        let (Some(market), Some(tf), Some(kind)) = (market, tf, kind) else {
            return Err(bad(1, "metadata needs market, tf and kind"));
        };
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == "timestamp,return" => {}
            _ => return Err(bad(2, "expected header `timestamp,return`")),
        }
        let (mut stamps, mut values) = (Vec::new(), Vec::new());
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (ts, v) = line.split_once(',').ok_or_else(|| bad(i + 1, "expected two fields"))?;
            stamps.push(TimestampUnit::Auto.to_millis(ts).ok_or_else(|| bad(i + 1, "bad timestamp"))?);
            values.push(v.trim().parse::<T>().map_err(|_| bad(i + 1, "bad return value"))?);
        }
        Self::new(market, tf, kind, stamps, values)
    }
}

impl<T> AsRef<[T]> for ReturnSeries<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

/// Returns between consecutive existing bars; return `i` carries the open time of bar `i + 1`.
/// Gaps between bars are bridged and flagged in the gap mask.
pub fn compute_returns<T: Scalar>(
    market_id: impl Into<String>,
    bars: &[Bar<T>],
    kind: ReturnKind,
) -> Result<ReturnSeries<T>, SeriesError> {
    if bars.len() < 2 {
        return Err(SeriesError::TooFewBars(bars.len()));
    }
    if let Some(i) = bars.iter().position(|b| !(b.close > T::zero())) {
        return Err(SeriesError::NonPositiveClose(i));
    }
    let time_frame = bars[0].time_frame;
    let mut stamps = Vec::with_capacity(bars.len() - 1);
    let mut values = Vec::with_capacity(bars.len() - 1);
    let mut gaps = Vec::with_capacity(bars.len() - 1);
    for pair in bars.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let ratio = cur.close / prev.close;
        values.push(match kind {
            ReturnKind::Log => ratio.ln(),
            ReturnKind::Simple => ratio - T::one(),
        });
        stamps.push(cur.open_time);
        gaps.push(cur.open_time - prev.open_time > time_frame.duration_ms());
    }
    Ok(ReturnSeries::new(market_id, time_frame, kind, stamps, values)?.with_gap_mask(gaps))
}

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};
use flate2::read::MultiGzDecoder;

use super::{Bar, MarketDataError, TimeFrame, Trade};
use crate::text::{format_sig, format_timestamp, parse_iso_timestamp};
use crate::Scalar;

/// Numeric timestamps below this magnitude are read as seconds.
const SECONDS_CUTOFF: f64 = 1e11;

/// Unit of numeric timestamp columns. ISO-8601 text is always accepted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TimestampUnit {
    /// Seconds below 10^11, milliseconds otherwise.
    #[default]
    Auto,
    Seconds,
    Milliseconds,
}

impl TimestampUnit {
    pub fn to_millis(self, raw: &str) -> Option<i64> {
        let raw = raw.trim();
        let seconds = |magnitude: f64| match self {
            TimestampUnit::Auto => magnitude < SECONDS_CUTOFF,
            TimestampUnit::Seconds => true,
            TimestampUnit::Milliseconds => false,
        };
        if let Ok(v) = raw.parse::<i64>() {
            return if seconds(v.unsigned_abs() as f64) { v.checked_mul(1000) } else { Some(v) };
        }
        if let Ok(v) = raw.parse::<f64>() {
            if !v.is_finite() {
                return None;
            }
            let ms = if seconds(v.abs()) { v * 1000.0 } else { v };
            return Some(ms.round() as i64);
        }
        parse_iso_timestamp(raw)
    }
}

/// How to read a trade or candle file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FormatDescriptor {
    pub timestamp_unit: TimestampUnit,
    /// Declared candle width. When absent it is inferred from the open_time spacing.
    pub time_frame: Option<TimeFrame>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectReason {
    Malformed,
    MissingField,
    BadTimestamp,
    BadNumber,
    NonPositivePrice,
    NonPositiveSize,
    NegativeVolume,
    OhlcInconsistent,
    MisalignedOpenTime,
    DuplicateOpenTime,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::Malformed => "malformed",
            RejectReason::MissingField => "missing_field",
            RejectReason::BadTimestamp => "bad_timestamp",
            RejectReason::BadNumber => "bad_number",
            RejectReason::NonPositivePrice => "non_positive_price",
            RejectReason::NonPositiveSize => "non_positive_size",
            RejectReason::NegativeVolume => "negative_volume",
            RejectReason::OhlcInconsistent => "ohlc_inconsistent",
            RejectReason::MisalignedOpenTime => "misaligned_open_time",
            RejectReason::DuplicateOpenTime => "duplicate_open_time",
        }
    }
}

/// A rejected input row; `row` is the 1-based line number in the file (the header is line 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RejectedRow {
    pub row: u64,
    pub reason: RejectReason,
}

impl fmt::Display for RejectedRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row={} reason={}", self.row, self.reason.code())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SkipReport {
    pub rejected: Vec<RejectedRow>,
}

impl SkipReport {
    pub fn skipped(&self) -> usize {
        self.rejected.len()
    }

    fn reject(&mut self, row: u64, reason: RejectReason) {
        self.rejected.push(RejectedRow { row, reason });
    }
}

impl fmt::Display for SkipReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rejected {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Parsed items together with the rows that were rejected on the way.
#[derive(Clone, Debug, PartialEq)]
pub struct Parsed<V> {
    pub items: V,
    pub report: SkipReport,
}

/// Opens a data file, decompressing `.gz` files on the fly.
pub fn open_source(path: &Path) -> io::Result<Box<dyn Read + Send>> {
    let file = BufReader::new(File::open(path)?);
    let gz = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    Ok(if gz { Box::new(BufReader::new(MultiGzDecoder::new(file))) } else { Box::new(file) })
}

fn find_column(headers: &StringRecord, names: &[&str], canonical: &'static str) -> Result<usize, MarketDataError> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
        .ok_or(MarketDataError::MissingColumn(canonical))
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    ReaderBuilder::new().has_headers(true).flexible(true).trim(Trim::All).comment(Some(b'#')).from_reader(source)
}

/// Walks the records, handing each one to `row` with its line number. Decoding errors
/// other than I/O reject the row; I/O errors abort.
fn for_each_record<R: Read>(
    rdr: &mut csv::Reader<R>,
    report: &mut SkipReport,
    mut row: impl FnMut(u64, &StringRecord, &mut SkipReport),
) -> Result<usize, MarketDataError> {
    let mut seen = 0;
    let mut record = StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                seen += 1;
                let line = record.position().map_or(seen as u64 + 1, |p| p.line());
                row(line, &record, report);
            }
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                seen += 1;
                let line = e.position().map_or(seen as u64 + 1, |p| p.line());
                report.reject(line, RejectReason::Malformed);
            }
        }
    }
    Ok(seen)
}

fn number<T: Scalar>(record: &StringRecord, idx: usize) -> Result<T, RejectReason> {
    let raw = record.get(idx).ok_or(RejectReason::MissingField)?;
    if raw.is_empty() {
        return Err(RejectReason::MissingField);
    }
    match raw.parse::<T>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(RejectReason::BadNumber),
    }
}

fn timestamp(record: &StringRecord, idx: usize, unit: TimestampUnit) -> Result<i64, RejectReason> {
    let raw = record.get(idx).ok_or(RejectReason::MissingField)?;
    if raw.is_empty() {
        return Err(RejectReason::MissingField);
    }
    unit.to_millis(raw).ok_or(RejectReason::BadTimestamp)
}

/// Reads a `timestamp,price,amount` trade CSV. The amount's sign (buy/sell on some
/// exchanges) is dropped. Output is stably sorted by timestamp.
pub fn parse_trades<T: Scalar, R: Read>(
    source: R,
    format: &FormatDescriptor,
) -> Result<Parsed<Vec<Trade<T>>>, MarketDataError> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    let ts_col = find_column(&headers, &["timestamp", "time", "mts"], "timestamp")?;
    let price_col = find_column(&headers, &["price"], "price")?;
    let size_col = find_column(&headers, &["amount", "size", "qty"], "amount")?;

    let mut trades = Vec::new();
    let mut report = SkipReport::default();
    let seen = for_each_record(&mut rdr, &mut report, |line, rec, report| {
        let parsed = (|| {
            let ts = timestamp(rec, ts_col, format.timestamp_unit)?;
            let price: T = number(rec, price_col)?;
            let size: T = number::<T>(rec, size_col)?.abs();
            if price <= T::zero() {
                return Err(RejectReason::NonPositivePrice);
            }
            if size <= T::zero() {
                return Err(RejectReason::NonPositiveSize);
            }
            Ok(Trade::new(ts, price, size))
        })();
        match parsed {
            Ok(t) => trades.push(t),
            Err(reason) => report.reject(line, reason),
        }
    })?;

    if seen > 0 && trades.is_empty() {
        return Err(MarketDataError::NoParsableRows { rejected: report.skipped() });
    }
    trades.sort_by_key(|t| t.timestamp);
    Ok(Parsed { items: trades, report })
}

/// Smallest positive open_time spacing, matched against the known bar widths.
pub fn infer_time_frame(open_times: &[i64]) -> Option<TimeFrame> {
    let mut sorted = open_times.to_vec();
    sorted.sort_unstable();
    let step = sorted.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0).min()?;
    TimeFrame::ALL.into_iter().find(|tf| tf.duration_ms() == step)
}

/// Reads an `open_time,open,high,low,close,volume` candle CSV (optional `trade_count`).
/// Inconsistent or misaligned rows are rejected; duplicates keep the first occurrence.
pub fn parse_candles<T: Scalar, R: Read>(
    source: R,
    format: &FormatDescriptor,
) -> Result<Parsed<Vec<Bar<T>>>, MarketDataError> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    let ts_col = find_column(&headers, &["open_time", "timestamp", "time", "mts"], "open_time")?;
    let open_col = find_column(&headers, &["open"], "open")?;
    let high_col = find_column(&headers, &["high"], "high")?;
    let low_col = find_column(&headers, &["low"], "low")?;
    let close_col = find_column(&headers, &["close"], "close")?;
    let volume_col = find_column(&headers, &["volume"], "volume")?;
    let count_col = find_column(&headers, &["trade_count", "trades"], "trade_count").ok();

    // Bars are provisionally stamped M5 until the time frame is known.
    let mut rows: Vec<(u64, Bar<T>)> = Vec::new();
    let mut report = SkipReport::default();
    let seen = for_each_record(&mut rdr, &mut report, |line, rec, report| {
        let parsed = (|| {
            let bar = Bar {
                open_time: timestamp(rec, ts_col, format.timestamp_unit)?,
                time_frame: TimeFrame::M5,
                open: number(rec, open_col)?,
                high: number(rec, high_col)?,
                low: number(rec, low_col)?,
                close: number(rec, close_col)?,
                volume: number(rec, volume_col)?,
                trade_count: match count_col.and_then(|c| rec.get(c)) {
                    Some(raw) if !raw.is_empty() => raw.parse().map_err(|_| RejectReason::BadNumber)?,
                    _ => 0,
                },
            };
            let prices = [bar.open, bar.high, bar.low, bar.close];
            if prices.iter().any(|p| *p <= T::zero()) {
                return Err(RejectReason::NonPositivePrice);
            }
            if bar.volume < T::zero() {
                return Err(RejectReason::NegativeVolume);
            }
            if !bar.is_consistent() {
                return Err(RejectReason::OhlcInconsistent);
            }
            Ok(bar)
        })();
        match parsed {
            Ok(bar) => rows.push((line, bar)),
            Err(reason) => report.reject(line, reason),
        }
    })?;

    if seen > 0 && rows.is_empty() {
        return Err(MarketDataError::NoParsableRows { rejected: report.skipped() });
    }
    if rows.is_empty() {
        return Ok(Parsed { items: Vec::new(), report });
    }
    let time_frame = match format.time_frame {
        Some(tf) => tf,
        None => {
            let stamps: Vec<i64> = rows.iter().map(|(_, b)| b.open_time).collect();
            infer_time_frame(&stamps).ok_or(MarketDataError::UnknownTimeFrame)?
        }
    };

    let mut kept = Vec::with_capacity(rows.len());
    for (line, mut bar) in rows {
        if time_frame.is_aligned(bar.open_time) {
            bar.time_frame = time_frame;
            kept.push((line, bar));
        } else {
            report.reject(line, RejectReason::MisalignedOpenTime);
        }
    }
    kept.sort_by_key(|(_, b)| b.open_time);
    let mut bars: Vec<Bar<T>> = Vec::with_capacity(kept.len());
    for (line, bar) in kept {
        if bars.last().is_some_and(|prev| prev.open_time == bar.open_time) {
            report.reject(line, RejectReason::DuplicateOpenTime);
        } else {
            bars.push(bar);
        }
    }
    if bars.is_empty() {
        return Err(MarketDataError::NoParsableRows { rejected: report.skipped() });
    }
    report.rejected.sort_by_key(|r| r.row);
    Ok(Parsed { items: bars, report })
}

/// Writes bars in the candle CSV layout, with ISO-8601 open times and a trailing
/// `trade_count` column.
pub fn write_candles<T: Scalar, W: Write>(bars: &[Bar<T>], mut out: W) -> io::Result<()> {
    writeln!(out, "open_time,open,high,low,close,volume,trade_count")?;
    for b in bars {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            format_timestamp(b.open_time),
            format_sig(b.open.to_f64_lossy()),
            format_sig(b.high.to_f64_lossy()),
            format_sig(b.low.to_f64_lossy()),
            format_sig(b.close.to_f64_lossy()),
            format_sig(b.volume.to_f64_lossy()),
            b.trade_count,
        )?;
    }
    out.flush()
}

use super::{Bar, MarketDataError, TimeFrame, Trade};
use crate::Scalar;

/// Builds one bar per non-empty bucket. Empty buckets produce no bar.
pub fn aggregate_trades<T: Scalar>(trades: &[Trade<T>], time_frame: TimeFrame) -> Result<Vec<Bar<T>>, MarketDataError> {
    if let Some(i) = trades.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
        return Err(MarketDataError::Unsorted { index: i + 1 });
    }
    let mut bars: Vec<Bar<T>> = Vec::new();
    for trade in trades {
        let bucket = time_frame.bucket_start(trade.timestamp);
        match bars.last_mut() {
            Some(bar) if bar.open_time == bucket => bar.push_trade(trade),
            _ => bars.push(Bar::from_trade(trade, time_frame)),
        }
    }
    Ok(bars)
}

/// Merges bars into a coarser time frame whose buckets nest the source buckets.
pub fn resample<T: Scalar>(bars: &[Bar<T>], target: TimeFrame) -> Result<Vec<Bar<T>>, MarketDataError> {
    let Some(first) = bars.first() else {
        return Ok(Vec::new());
    };
    let source = first.time_frame;
    if let Some(other) = bars.iter().find(|b| b.time_frame != source) {
        return Err(MarketDataError::MixedTimeFrames { first: source, other: other.time_frame });
    }
    if !source.nests_in(target) {
        return Err(MarketDataError::IncompatibleTimeFrames { from: source, to: target });
    }
    if let Some(i) = bars.windows(2).position(|w| w[1].open_time <= w[0].open_time) {
        return Err(MarketDataError::Unsorted { index: i + 1 });
    }
    if source == target {
        return Ok(bars.to_vec());
    }

    let mut out: Vec<Bar<T>> = Vec::new();
    for bar in bars {
        let bucket = target.bucket_start(bar.open_time);
        match out.last_mut() {
            Some(acc) if acc.open_time == bucket => {
                acc.high = acc.high.max(bar.high);
                acc.low = acc.low.min(bar.low);
                acc.close = bar.close;
                acc.volume += bar.volume;
                acc.trade_count += bar.trade_count;
            }
            _ => out.push(Bar { open_time: bucket, time_frame: target, ..*bar }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_iso_timestamp;
    use proptest::prelude::*;

    fn t(sec: i64, price: f64, size: f64) -> Trade<f64> {
        Trade::new(sec * 1000, price, size)
    }

    fn m5(open_time: i64, open: f64, high: f64, low: f64, close: f64) -> Bar<f64> {
        Bar { open_time, time_frame: TimeFrame::M5, open, high, low, close, volume: 1.0, trade_count: 1 }
    }

    #[test]
    fn empty_in_empty_out() {
        assert!(aggregate_trades::<f64>(&[], TimeFrame::M5).unwrap().is_empty());
    }

    #[test]
    fn single_m5_bucket() {
        let bars = aggregate_trades(&[t(0, 100.0, 1.0), t(60, 101.0, 2.0), t(299, 99.0, 3.0)], TimeFrame::M5).unwrap();
        assert_eq!(
            bars,
            [Bar {
                open_time: 0,
                time_frame: TimeFrame::M5,
                open: 100.0,
                high: 101.0,
                low: 99.0,
                close: 99.0,
                volume: 6.0,
                trade_count: 3
            }]
        );
    }

    #[test]
    fn bucket_boundary() {
        let bars = aggregate_trades(&[t(0, 1.0, 1.0), t(301, 1.0, 1.0)], TimeFrame::M5).unwrap();
        let opens: Vec<i64> = bars.iter().map(|b| b.open_time).collect();
        assert_eq!(opens, [0, 300_000]);
    }

    #[test]
    fn gaps_emit_nothing() {
        let bars = aggregate_trades(&[t(0, 1.0, 1.0), t(3600, 2.0, 1.0)], TimeFrame::M5).unwrap();
        assert_eq!(bars.len(), 2);
    }

    #[test]
    fn unsorted_trades_rejected() {
        let err = aggregate_trades(&[t(5, 1.0, 1.0), t(1, 1.0, 1.0)], TimeFrame::M5).unwrap_err();
        assert!(matches!(err, MarketDataError::Unsorted { index: 1 }));
    }

    #[test]
    fn week_anchor_is_monday() {
        let sunday = parse_iso_timestamp("2019-06-30T23:55:00Z").unwrap();
        let monday = parse_iso_timestamp("2019-07-01T00:00:00Z").unwrap();
        assert_eq!(TimeFrame::W1.bucket_start(monday), monday);
        assert_eq!(TimeFrame::W1.bucket_start(sunday), parse_iso_timestamp("2019-06-24").unwrap());
        // Before the first Monday after the epoch.
        assert_eq!(TimeFrame::W1.bucket_start(0), parse_iso_timestamp("1969-12-29").unwrap());

        let bars = resample(&[m5(sunday, 1.0, 1.0, 1.0, 1.0), m5(monday, 2.0, 2.0, 2.0, 2.0)], TimeFrame::W1).unwrap();
        assert_eq!(bars.len(), 2);
        assert_eq!(bars[1].open_time, monday);
    }

    #[test]
    fn twelve_m5_make_one_h1() {
        let src: Vec<Bar<f64>> = (0..12)
            .map(|i| {
                let p = 100.0 + i as f64;
                m5(i * 300_000, p, p + if i == 7 { 50.0 } else { 1.0 }, p - 1.0, p + 0.5)
            })
            .collect();
        let h1 = resample(&src, TimeFrame::H1).unwrap();
        assert_eq!(h1.len(), 1);
        assert_eq!(h1[0].open, 100.0);
        assert_eq!(h1[0].close, 111.5);
        assert_eq!(h1[0].high, 157.0);
        assert_eq!(h1[0].low, 99.0);
        assert_eq!(h1[0].volume, 12.0);
        assert_eq!(h1[0].trade_count, 12);
    }

    #[test]
    fn identity_resample() {
        let src = vec![m5(0, 1.0, 2.0, 0.5, 1.5), m5(600_000, 1.5, 1.5, 1.0, 1.0)];
        assert_eq!(resample(&src, TimeFrame::M5).unwrap(), src);
    }

    #[test]
    fn resample_errors() {
        let h1 = [Bar { time_frame: TimeFrame::H1, ..m5(0, 1.0, 1.0, 1.0, 1.0) }];
        assert!(matches!(resample(&h1, TimeFrame::M5), Err(MarketDataError::IncompatibleTimeFrames { .. })));
        let w1 = [Bar { time_frame: TimeFrame::W1, ..m5(0, 1.0, 1.0, 1.0, 1.0) }];
        assert!(matches!(resample(&w1, TimeFrame::D1), Err(MarketDataError::IncompatibleTimeFrames { .. })));
        let unsorted = [m5(300_000, 1.0, 1.0, 1.0, 1.0), m5(0, 1.0, 1.0, 1.0, 1.0)];
        assert!(matches!(resample(&unsorted, TimeFrame::H1), Err(MarketDataError::Unsorted { .. })));
    }

    fn trade_sets() -> impl Strategy<Value = Vec<Trade<f64>>> {
        prop::collection::vec((0i64..40 * 86_400_000, 1.0f64..1000.0, 0.001f64..50.0), 0..300).prop_map(|mut rows| {
            rows.sort_by_key(|r| r.0);
            rows.into_iter().map(|(ts, p, s)| Trade::new(ts - 3 * 86_400_000, p, s)).collect()
        })
    }

    proptest! {
        #[test]
        fn bars_are_consistent_and_conserve_volume(trades in trade_sets()) {
            for tf in TimeFrame::ALL {
                let bars = aggregate_trades(&trades, tf).unwrap();
                prop_assert!(bars.iter().all(|b| b.is_consistent() && tf.is_aligned(b.open_time)));
                prop_assert!(bars.windows(2).all(|w| w[0].open_time < w[1].open_time));
                let traded: f64 = trades.iter().map(|t| t.size).sum();
                let binned: f64 = bars.iter().map(|b| b.volume).sum();
                prop_assert!((traded - binned).abs() <= 1e-9 * traded.max(1.0));
                let count: u64 = bars.iter().map(|b| b.trade_count).sum();
                prop_assert_eq!(count as usize, trades.len());
                if let (Some(first), Some(last)) = (trades.first(), trades.last()) {
                    let span = (last.timestamp - first.timestamp) as f64;
                    let bound = (span / tf.duration_ms() as f64).ceil() as usize + 1;
                    prop_assert!(bars.len() <= bound);
                }
            }
        }

        #[test]
        fn aggregation_is_associative(trades in trade_sets()) {
            let pairs = [
                (TimeFrame::M5, TimeFrame::H1),
                (TimeFrame::M5, TimeFrame::D1),
                (TimeFrame::H1, TimeFrame::W1),
                (TimeFrame::D1, TimeFrame::W1),
            ];
            for (fine, coarse) in pairs {
                let direct = aggregate_trades(&trades, coarse).unwrap();
                let staged = resample(&aggregate_trades(&trades, fine).unwrap(), coarse).unwrap();
                prop_assert_eq!(direct.len(), staged.len());
                for (a, b) in direct.iter().zip(&staged) {
                    prop_assert_eq!(a.open_time, b.open_time);
                    prop_assert_eq!(a.time_frame, b.time_frame);
                    prop_assert_eq!((a.open, a.high, a.low, a.close), (b.open, b.high, b.low, b.close));
                    prop_assert_eq!(a.trade_count, b.trade_count);
                    prop_assert!((a.volume - b.volume).abs() <= 1e-9 * a.volume);
                }
            }
        }
    }
}

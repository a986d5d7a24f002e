//! The three efficiency experiments (autocorrelation, Ljung-Box, rolling lag-1
//! autocorrelation) run per time frame, and the verdict derived from them.
//!
//! Each experiment answers one condition an efficient market should satisfy:
//! no significant autocorrelation at any lag, no Ljung-Box p-value below alpha,
//! and a rolling lag-1 coefficient that stays near zero. The verdict never claims
//! efficiency; it can only fail to reject it.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marketdata::{aggregate_trades, resample, Bar, MarketDataError, TimeFrame, Trade};
use crate::series::{compute_returns, ReturnKind, ReturnSeries, SeriesError};
use crate::stats::{self, AcfResult, LjungBoxResult, RollingAcfResult, StatsError};
use crate::text::parse_iso_timestamp;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("series of {n} returns is shorter than the {window_len}-return rolling window")]
    SeriesTooShort { n: usize, window_len: usize },
    #[error("missing {0} experiment result")]
    MissingExperiment(&'static str),
    #[error("experiment results come from different time frames")]
    TimeFrameMismatch,
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    MarketData(#[from] MarketDataError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub market_id: String,
    pub time_frames: Vec<TimeFrame>,
    pub max_lag: usize,
    pub alpha: f64,
    pub rolling_window_days: u32,
    pub rolling_step: usize,
    pub return_kind: ReturnKind,
    /// Share of rolling windows that must agree in sign for the rolling condition to fail.
    pub sign_agreement: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            market_id: String::new(),
            time_frames: TimeFrame::ALL.to_vec(),
            max_lag: 30,
            alpha: stats::DEFAULT_ALPHA,
            rolling_window_days: 365,
            rolling_step: 1,
            return_kind: ReturnKind::Log,
            sign_agreement: 0.9,
        }
    }
}

impl ExperimentConfig {
    pub fn for_market(market_id: impl Into<String>) -> Self {
        Self { market_id: market_id.into(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidConfig(m.to_string()));
        if self.max_lag < 1 {
            return bad("max_lag must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.rolling_window_days < 1 {
            return bad("rolling window must span at least one day");
        }
        if self.rolling_step < 1 {
            return bad("rolling step must be at least 1");
        }
        if !(self.sign_agreement >= 0.5 && self.sign_agreement < 1.0) {
            return bad("sign agreement threshold must lie in [0.5, 1)");
        }
        if self.time_frames.is_empty() {
            return bad("no time frames requested");
        }
        Ok(())
    }

    /// Rolling window length in bars for `tf`.
    pub fn window_len(&self, tf: TimeFrame) -> usize {
        tf.bars_in_days(self.rolling_window_days)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcfExperiment<T> {
    pub time_frame: TimeFrame,
    pub acf: AcfResult<T>,
    /// Lags with `|r_k|` above the unadjusted band.
    pub breaches: Vec<usize>,
    /// Band at `alpha / max_lag`.
    pub bonferroni_band: T,
    /// Lags that also clear the Bonferroni band.
    pub significant_lags: Vec<usize>,
    pub violated: bool,
}

impl<T: Scalar> AcfExperiment<T> {
    /// Breaches a white-noise series would produce on average.
    pub fn expected_null_breaches(&self) -> T {
        self.acf.alpha * T::from_usize_lossy(self.acf.max_lag)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LjungBoxExperiment<T> {
    pub time_frame: TimeFrame,
    pub ljung_box: LjungBoxResult<T>,
    pub rejected_lags: Vec<usize>,
    pub min_p_value: T,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RollingExperiment<T> {
    pub time_frame: TimeFrame,
    pub rolling: RollingAcfResult<T>,
    pub band: T,
    pub positive_fraction: T,
    pub negative_fraction: T,
    /// `max(positive_fraction, negative_fraction)`
    pub sign_fraction: T,
    /// +1, -1, or 0 when neither sign dominates.
    pub dominant_sign: i8,
    pub median_abs_r1: T,
    pub violated: bool,
}

/// Autocorrelations at lags `1..=max_lag`. A lag violates the no-autocorrelation
/// condition only when it clears the Bonferroni-adjusted band; plain band breaches
/// are listed but a 5% rate of them is expected under the null.
pub fn run_acf_experiment<T: Scalar>(
    series: &ReturnSeries<T>,
    cfg: &ExperimentConfig,
) -> Result<AcfExperiment<T>, ExperimentError> {
    cfg.validate()?;
    let alpha = T::lit(cfg.alpha);
    let acf = stats::acf(series, cfg.max_lag, alpha)?;
    let breaches = acf.lags_outside(acf.band_half_width);
    let bonferroni_band = stats::confidence_band(acf.n, alpha / T::from_usize_lossy(cfg.max_lag))?;
    let significant_lags = acf.lags_outside(bonferroni_band);
    Ok(AcfExperiment {
        time_frame: series.time_frame(),
        violated: !significant_lags.is_empty(),
        acf,
        breaches,
        bonferroni_band,
        significant_lags,
    })
}

/// Ljung-Box p-values at lags `1..=max_lag`; violated when any falls below alpha.
pub fn run_lb_experiment<T: Scalar>(
    series: &ReturnSeries<T>,
    cfg: &ExperimentConfig,
) -> Result<LjungBoxExperiment<T>, ExperimentError> {
    cfg.validate()?;
    let ljung_box = stats::ljung_box(series, cfg.max_lag, T::lit(cfg.alpha))?;
    Ok(lb_experiment(series.time_frame(), ljung_box))
}

fn lb_experiment<T: Scalar>(time_frame: TimeFrame, ljung_box: LjungBoxResult<T>) -> LjungBoxExperiment<T> {
    let rejected_lags: Vec<usize> = (1..=ljung_box.max_lag).filter(|k| ljung_box.rejected[k - 1]).collect();
    LjungBoxExperiment {
        time_frame,
        min_p_value: ljung_box.min_p_value(),
        violated: !rejected_lags.is_empty(),
        rejected_lags,
        ljung_box,
    }
}

fn median<T: Scalar>(mut values: Vec<T>) -> T {
    if values.is_empty() {
        return T::zero();
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite rolling values"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) * T::lit(0.5)
    }
}

/// Rolling lag-1 autocorrelation over a window of `rolling_window_days` worth of bars.
///
/// Violated when more than `sign_agreement` of the windows share one sign and the
/// median `|r1|` exceeds the white-noise band for the window length.
pub fn run_rolling_experiment<T: Scalar>(
    series: &ReturnSeries<T>,
    cfg: &ExperimentConfig,
) -> Result<RollingExperiment<T>, ExperimentError> {
    cfg.validate()?;
    let window_len = cfg.window_len(series.time_frame());
    if series.len() < window_len {
        return Err(ExperimentError::SeriesTooShort { n: series.len(), window_len });
    }
    let rolling = stats::rolling_acf1(series, window_len, cfg.rolling_step)?;
    let band = stats::confidence_band(window_len, T::lit(cfg.alpha))?;

    let defined: Vec<T> = rolling.defined().collect();
    let total = T::from_usize_lossy(defined.len().max(1));
    let positive = T::from_usize_lossy(defined.iter().filter(|v| **v > T::zero()).count()) / total;
    let negative = T::from_usize_lossy(defined.iter().filter(|v| **v < T::zero()).count()) / total;
    let dominant_sign = match positive.partial_cmp(&negative) {
        Some(std::cmp::Ordering::Greater) => 1,
        Some(std::cmp::Ordering::Less) => -1,
        _ => 0,
    };
    let sign_fraction = positive.max(negative);
    let median_abs_r1 = median(defined.iter().map(|v| v.abs()).collect());
    let violated = !defined.is_empty() && sign_fraction > T::lit(cfg.sign_agreement) && median_abs_r1 > band;
    Ok(RollingExperiment {
        time_frame: series.time_frame(),
        rolling,
        band,
        positive_fraction: positive,
        negative_fraction: negative,
        sign_fraction,
        dominant_sign,
        median_abs_r1,
        violated,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// All three conditions violated.
    Rejected,
    /// Some but not all conditions violated.
    Inconclusive,
    /// No condition violated.
    NotRejected,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Rejected => "EMH rejected on this time frame",
            Verdict::Inconclusive => "inconclusive: some but not all conditions violated",
            Verdict::NotRejected => "EMH not rejected",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeFrameVerdict {
    pub time_frame: TimeFrame,
    pub acf_condition_violated: bool,
    pub lb_condition_violated: bool,
    pub rolling_condition_violated: bool,
    pub verdict: Verdict,
    pub breached_lags: Vec<usize>,
    pub significant_lags: Vec<usize>,
    pub min_p_value: f64,
    pub rolling_sign_fraction: f64,
    pub rolling_dominant_sign: i8,
    pub rolling_median_abs_r1: f64,
}

impl TimeFrameVerdict {
    pub fn violations(&self) -> usize {
        [self.acf_condition_violated, self.lb_condition_violated, self.rolling_condition_violated]
            .iter()
            .filter(|v| **v)
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyVerdict {
    pub market_id: String,
    pub time_frames: Vec<TimeFrameVerdict>,
}

/// Combines the three experiment outcomes for one time frame.
pub fn evaluate_verdict<T: Scalar>(
    acf: Option<&AcfExperiment<T>>,
    lb: Option<&LjungBoxExperiment<T>>,
    rolling: Option<&RollingExperiment<T>>,
) -> Result<TimeFrameVerdict, ExperimentError> {
    let acf = acf.ok_or(ExperimentError::MissingExperiment("autocorrelation"))?;
    let lb = lb.ok_or(ExperimentError::MissingExperiment("Ljung-Box"))?;
    let rolling = rolling.ok_or(ExperimentError::MissingExperiment("rolling autocorrelation"))?;
    if lb.time_frame != acf.time_frame || rolling.time_frame != acf.time_frame {
        return Err(ExperimentError::TimeFrameMismatch);
    }
    let flags = [acf.violated, lb.violated, rolling.violated];
    let verdict = match flags.iter().filter(|f| **f).count() {
        3 => Verdict::Rejected,
        0 => Verdict::NotRejected,
        _ => Verdict::Inconclusive,
    };
    Ok(TimeFrameVerdict {
        time_frame: acf.time_frame,
        acf_condition_violated: acf.violated,
        lb_condition_violated: lb.violated,
        rolling_condition_violated: rolling.violated,
        verdict,
        breached_lags: acf.breaches.clone(),
        significant_lags: acf.significant_lags.clone(),
        min_p_value: lb.min_p_value.to_f64_lossy(),
        rolling_sign_fraction: rolling.sign_fraction.to_f64_lossy(),
        rolling_dominant_sign: rolling.dominant_sign,
        rolling_median_abs_r1: rolling.median_abs_r1.to_f64_lossy(),
    })
}

/// Everything computed for one market on one time frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeFrameAnalysis<T> {
    pub series: ReturnSeries<T>,
    pub acf: AcfExperiment<T>,
    pub ljung_box: LjungBoxExperiment<T>,
    pub rolling: RollingExperiment<T>,
    pub verdict: TimeFrameVerdict,
}

/// Runs all three experiments on one return series.
pub fn analyze_series<T: Scalar>(
    series: ReturnSeries<T>,
    cfg: &ExperimentConfig,
) -> Result<TimeFrameAnalysis<T>, ExperimentError> {
    let acf = run_acf_experiment(&series, cfg)?;
    let ljung_box = lb_experiment(series.time_frame(), stats::ljung_box_from_acf(&acf.acf, T::lit(cfg.alpha))?);
    let rolling = run_rolling_experiment(&series, cfg)?;
    let verdict = evaluate_verdict(Some(&acf), Some(&ljung_box), Some(&rolling))?;
    Ok(TimeFrameAnalysis { series, acf, ljung_box, rolling, verdict })
}

/// Raw input for one market.
#[derive(Clone, Debug, PartialEq)]
pub enum MarketInput<T> {
    Trades(Vec<Trade<T>>),
    Bars(Vec<Bar<T>>),
}

impl<T: Scalar> MarketInput<T> {
    /// Bars at `tf`, aggregated from trades or resampled from coarser-or-equal candles.
    pub fn bars(&self, tf: TimeFrame) -> Result<Vec<Bar<T>>, MarketDataError> {
        match self {
            MarketInput::Trades(trades) => aggregate_trades(trades, tf),
            MarketInput::Bars(bars) => resample(bars, tf),
        }
    }

    /// Keeps only data stamped in `[start, end)`.
    pub fn restrict(self, start: Option<i64>, end: Option<i64>) -> Self {
        let keep = |ts: i64| start.is_none_or(|s| ts >= s) && end.is_none_or(|e| ts < e);
        match self {
            MarketInput::Trades(t) => MarketInput::Trades(t.into_iter().filter(|t| keep(t.timestamp)).collect()),
            MarketInput::Bars(b) => MarketInput::Bars(b.into_iter().filter(|b| keep(b.open_time)).collect()),
        }
    }
}

/// Per-time-frame outcomes for one market, in the order of `cfg.time_frames`.
pub struct MarketAnalysis<T> {
    pub market_id: String,
    pub results: Vec<(TimeFrame, Result<TimeFrameAnalysis<T>, ExperimentError>)>,
}

impl<T: Scalar> MarketAnalysis<T> {
    pub fn verdict(&self) -> EfficiencyVerdict {
        EfficiencyVerdict {
            market_id: self.market_id.clone(),
            time_frames: self.results.iter().filter_map(|(_, r)| r.as_ref().ok().map(|a| a.verdict.clone())).collect(),
        }
    }

    pub fn failures(&self) -> usize {
        self.results.iter().filter(|(_, r)| r.is_err()).count()
    }
}

/// Analyzes every requested time frame of one market. Time frames are independent:
/// a failure in one is recorded and the others still run.
pub fn analyze_market<T: Scalar>(
    input: &MarketInput<T>,
    cfg: &ExperimentConfig,
) -> Result<MarketAnalysis<T>, ExperimentError> {
    cfg.validate()?;
    let results = cfg
        .time_frames
        .par_iter()
        .map(|&tf| {
            let outcome = input
                .bars(tf)
                .map_err(ExperimentError::from)
                .and_then(|bars| Ok(compute_returns(cfg.market_id.clone(), &bars, cfg.return_kind)?))
                .and_then(|series| analyze_series(series, cfg));
            (tf, outcome)
        })
        .collect();
    Ok(MarketAnalysis { market_id: cfg.market_id.clone(), results })
}

/// Sample periods of the four reference markets (`[start, end)`, UTC midnight).
pub const REFERENCE_RANGES: [(&str, &str, &str); 4] = [
    ("BTCUSD", "2014-07-01", "2019-07-01"),
    ("ETHUSD", "2016-03-09", "2019-07-01"),
    ("ETHBTC", "2016-03-09", "2019-07-01"),
    ("XBTUSD", "2017-10-12", "2019-07-01"),
];

/// Reference sample period for a market id such as `BTC/USD` or `btcusd`.
pub fn reference_range(market_id: &str) -> Option<(i64, i64)> {
    let key: String = market_id.chars().filter(char::is_ascii_alphanumeric).collect::<String>().to_ascii_uppercase();
    REFERENCE_RANGES
        .iter()
        .find(|(id, _, _)| *id == key)
        .and_then(|(_, s, e)| Some((parse_iso_timestamp(s)?, parse_iso_timestamp(e)?)))
}

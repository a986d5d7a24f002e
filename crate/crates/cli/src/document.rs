//! The result document written by `analyze` and read by `plot`.
//!
//! JSON, pretty-printed, keys in declaration order. Every number is rounded to
//! nine significant digits and every timestamp is ISO-8601 UTC, so two runs over
//! the same inputs produce byte-identical files.

use marketacf_core::experiments::{ExperimentConfig, ExperimentError, TimeFrameAnalysis, TimeFrameVerdict};
use marketacf_core::marketdata::TimeFrame;
use marketacf_core::series::ReturnKind;
use marketacf_core::stats::chi2_quantile;
use marketacf_core::text::{format_timestamp, round_sig};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub format_version: u32,
    pub config: ConfigEcho,
    pub markets: Vec<MarketReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub time_frames: Vec<TimeFrame>,
    pub max_lag: usize,
    pub alpha: f64,
    pub rolling_window_days: u32,
    pub rolling_step: usize,
    pub return_kind: ReturnKind,
    pub sign_agreement: f64,
}

impl From<&ExperimentConfig> for ConfigEcho {
    fn from(c: &ExperimentConfig) -> Self {
        Self {
            time_frames: c.time_frames.clone(),
            max_lag: c.max_lag,
            alpha: c.alpha,
            rolling_window_days: c.rolling_window_days,
            rolling_step: c.rolling_step,
            return_kind: c.return_kind,
            sign_agreement: c.sign_agreement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketReport {
    pub market: String,
    pub source: String,
    pub skipped_rows: usize,
    pub time_frames: Vec<TimeFrameReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeFrameReport {
    pub time_frame: TimeFrame,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n_returns: usize,
    pub gap_returns: usize,
    pub first_return: String,
    pub last_return: String,
    pub acf: AcfReport,
    pub ljung_box: LjungBoxReport,
    pub rolling: RollingReport,
    pub verdict: TimeFrameVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfReport {
    /// Lags 1..=max_lag.
    pub coefficients: Vec<f64>,
    pub band_half_width: f64,
    pub bonferroni_band: f64,
    pub breaches: Vec<usize>,
    pub significant_lags: Vec<usize>,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LjungBoxReport {
    pub q_values: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Chi-squared `1 - alpha` quantile per lag.
    pub critical_values: Vec<f64>,
    pub rejected_lags: Vec<usize>,
    pub min_p_value: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingReport {
    pub window_len: usize,
    pub step: usize,
    pub band: f64,
    pub positive_fraction: f64,
    pub negative_fraction: f64,
    pub sign_fraction: f64,
    pub dominant_sign: i8,
    pub median_abs_r1: f64,
    pub gap_windows: usize,
    pub violated: bool,
    pub window_ends: Vec<String>,
    /// `null` marks a zero-variance window.
    pub r1: Vec<Option<f64>>,
}

fn rounded(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| round_sig(*v)).collect()
}

impl AnalysisReport {
    pub fn from_analysis(a: &TimeFrameAnalysis<f64>, alpha: f64) -> Result<Self, ExperimentError> {
        let lb = &a.ljung_box;
        let critical_values = (1..=lb.ljung_box.max_lag)
            .map(|k| chi2_quantile(1.0 - alpha, k).map(round_sig))
            .collect::<Result<_, _>>()?;
        let mut verdict = a.verdict.clone();
        verdict.min_p_value = round_sig(verdict.min_p_value);
        verdict.rolling_sign_fraction = round_sig(verdict.rolling_sign_fraction);
        verdict.rolling_median_abs_r1 = round_sig(verdict.rolling_median_abs_r1);
        let stamps = a.series.timestamps();
        Ok(Self {
            n_returns: a.series.len(),
            gap_returns: a.series.gap_count(),
            first_return: stamps.first().map(|t| format_timestamp(*t)).unwrap_or_default(),
            last_return: stamps.last().map(|t| format_timestamp(*t)).unwrap_or_default(),
            acf: AcfReport {
                coefficients: rounded(&a.acf.acf.coefficients),
                band_half_width: round_sig(a.acf.acf.band_half_width),
                bonferroni_band: round_sig(a.acf.bonferroni_band),
                breaches: a.acf.breaches.clone(),
                significant_lags: a.acf.significant_lags.clone(),
                violated: a.acf.violated,
            },
            ljung_box: LjungBoxReport {
                q_values: rounded(&lb.ljung_box.q_values),
                p_values: rounded(&lb.ljung_box.p_values),
                critical_values,
                rejected_lags: lb.rejected_lags.clone(),
                min_p_value: round_sig(lb.min_p_value),
                violated: lb.violated,
            },
            rolling: RollingReport {
                window_len: a.rolling.rolling.window_len,
                step: a.rolling.rolling.step,
                band: round_sig(a.rolling.band),
                positive_fraction: round_sig(a.rolling.positive_fraction),
                negative_fraction: round_sig(a.rolling.negative_fraction),
                sign_fraction: round_sig(a.rolling.sign_fraction),
                dominant_sign: a.rolling.dominant_sign,
                median_abs_r1: round_sig(a.rolling.median_abs_r1),
                gap_windows: a.rolling.rolling.gap_count(),
                violated: a.rolling.violated,
                window_ends: a.rolling.rolling.window_end_timestamps.iter().map(|t| format_timestamp(*t)).collect(),
                r1: a.rolling.rolling.r1_values.iter().map(|v| v.map(round_sig)).collect(),
            },
            verdict,
        })
    }
}

impl ResultDocument {
    /// Analyzed (market, time frame) pairs in document order.
    pub fn analyses(&self) -> impl Iterator<Item = (&str, TimeFrame, &AnalysisReport)> {
        self.markets.iter().flat_map(|m| {
            m.time_frames.iter().filter_map(move |t| t.analysis.as_ref().map(|a| (m.market.as_str(), t.time_frame, a)))
        })
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

//! Autocorrelation estimation, the Ljung-Box portmanteau test, white-noise
//! confidence bands and rolling first-order autocorrelation.

mod acf;
mod ljung_box;
mod rolling;
pub mod special;

use thiserror::Error;

pub use acf::{acf, confidence_band, AcfResult};
pub use ljung_box::{ljung_box, ljung_box_from_acf, LjungBoxResult};
pub use rolling::{rolling_acf1, RollingAcfResult};
pub use special::{chi2_cdf, chi2_quantile, chi2_sf, normal_quantile};

/// Significance level used when none is given.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("max lag must be at least 1")]
    ZeroLag,
    #[error("series of length {n} is too short for max lag {max_lag}")]
    TooShort { n: usize, max_lag: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("window of {window_len} exceeds series length {n}")]
    WindowTooLong { window_len: usize, n: usize },
    #[error("window length must be at least 3, got {0}")]
    WindowTooShort(usize),
    #[error("step must be at least 1")]
    ZeroStep,
    #[error("sample size must be at least 2, got {0}")]
    SampleTooSmall(usize),
    #[error("significance level must lie in (0, 1)")]
    BadAlpha,
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("no convergence: {0}")]
    NoConvergence(&'static str),
}

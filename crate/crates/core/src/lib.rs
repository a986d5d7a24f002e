//! Market-efficiency diagnostics for price time series.
//!
//! The pipeline runs trades or candles through [`marketdata`] into time bars, then
//! [`series`] turns the bars into returns. [`stats`] estimates autocorrelations,
//! runs the Ljung-Box test and scans rolling lag-1 autocorrelation, and
//! [`experiments`] turns those statistics into per-time-frame verdicts.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`). The aliases below
//! fix the scalar to `f64`, which is what the command-line tool uses.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiments;
pub mod marketdata;
mod scalar;
pub mod series;
pub mod stats;
pub mod synth;
pub mod text;

pub use scalar::Scalar;

pub type Trade = marketdata::Trade<f64>;
pub type Bar = marketdata::Bar<f64>;
pub type ReturnSeries = series::ReturnSeries<f64>;
pub type AcfResult = stats::AcfResult<f64>;
pub type LjungBoxResult = stats::LjungBoxResult<f64>;
pub type RollingAcfResult = stats::RollingAcfResult<f64>;

pub type Trade32 = marketdata::Trade<f32>;
pub type Bar32 = marketdata::Bar<f32>;
pub type ReturnSeries32 = series::ReturnSeries<f32>;
pub type AcfResult32 = stats::AcfResult<f32>;
pub type LjungBoxResult32 = stats::LjungBoxResult<f32>;
pub type RollingAcfResult32 = stats::RollingAcfResult<f32>;

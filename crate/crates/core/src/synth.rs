//! Seeded synthetic series with known autocorrelation structure, used to
//! calibrate and property-test the statistics.
//!
//! Uniforms come from ChaCha20 seeded through `seed_from_u64`; Gaussians use the
//! Box-Muller transform, consuming exactly two uniforms per pair of variates.

use std::fmt;
use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marketdata::{Bar, TimeFrame};
use crate::series::{ReturnKind, ReturnSeries, SeriesError};
use crate::Scalar;

/// Samples discarded before an AR(1) path is recorded.
pub const AR1_BURN_IN: usize = 1_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("series length must be positive")]
    EmptyLength,
    #[error("AR(1) coefficient must satisfy |phi| < 1, got {0}")]
    NonStationary(f64),
    #[error("sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("unknown generator `{0}` (expected white, ar1 or random-walk)")]
    BadKind(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    WhiteNoise,
    Ar1,
    RandomWalk,
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::WhiteNoise => "white",
            GeneratorKind::Ar1 => "ar1",
            GeneratorKind::RandomWalk => "random-walk",
        })
    }
}

impl FromStr for GeneratorKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "white" | "white-noise" => Ok(GeneratorKind::WhiteNoise),
            "ar1" => Ok(GeneratorKind::Ar1),
            "random-walk" | "rw" => Ok(GeneratorKind::RandomWalk),
            _ => Err(SynthError::BadKind(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub seed: u64,
    /// AR(1) coefficient; ignored by the other generators.
    pub phi: f64,
    pub sigma: f64,
    /// Spacing of the synthetic timestamps.
    pub time_frame: TimeFrame,
}

impl GeneratorSpec {
    pub fn white_noise(n: usize, seed: u64) -> Self {
        Self { kind: GeneratorKind::WhiteNoise, n, seed, phi: 0.0, sigma: 1.0, time_frame: TimeFrame::D1 }
    }

    pub fn ar1(phi: f64, n: usize, seed: u64) -> Self {
        Self { kind: GeneratorKind::Ar1, phi, ..Self::white_noise(n, seed) }
    }

    pub fn random_walk(n: usize, seed: u64) -> Self {
        Self { kind: GeneratorKind::RandomWalk, ..Self::white_noise(n, seed) }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_time_frame(mut self, time_frame: TimeFrame) -> Self {
        self.time_frame = time_frame;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n == 0 {
            return Err(SynthError::EmptyLength);
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(SynthError::BadSigma(self.sigma));
        }
        if self.kind == GeneratorKind::Ar1 && !(self.phi.abs() < 1.0) {
            return Err(SynthError::NonStationary(self.phi));
        }
        Ok(())
    }

    pub fn market_id(&self) -> String {
        format!("synthetic-{}-{}", self.kind, self.seed)
    }
}

/// Standard normal variates from a seeded ChaCha20 stream.
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed), spare: None }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

fn innovations(spec: &GeneratorSpec) -> Vec<f64> {
    let mut stream = GaussianStream::new(spec.seed);
    let mut draw = || spec.sigma * stream.next_standard();
    match spec.kind {
        GeneratorKind::WhiteNoise | GeneratorKind::RandomWalk => (0..spec.n).map(|_| draw()).collect(),
        GeneratorKind::Ar1 => {
            let mut state = 0.0;
            for _ in 0..AR1_BURN_IN {
                state = spec.phi * state + draw();
            }
            (0..spec.n)
                .map(|_| {
                    state = spec.phi * state + draw();
                    state
                })
                .collect()
        }
    }
}

/// Generates the series described by `spec` as log returns.
///
/// A random walk `p_t = p_{t-1} exp(e_t)` has log returns exactly `e_t`, so its
/// returns are emitted directly rather than through a price path that could overflow.
pub fn generate<T: Scalar>(spec: &GeneratorSpec) -> Result<ReturnSeries<T>, SynthError> {
    spec.validate()?;
    let step = spec.time_frame.duration_ms();
    let stamps = (1..=spec.n as i64).map(|i| i * step).collect();
    let values = innovations(spec).into_iter().map(T::lit).collect();
    Ok(ReturnSeries::new(spec.market_id(), spec.time_frame, ReturnKind::Log, stamps, values)?)
}

/// Price bars whose log returns are the given series, starting from `start_price`.
/// Each bar opens at the previous close, so the first bar is flat.
pub fn bars_from_returns<T: Scalar>(series: &ReturnSeries<T>, start_price: T) -> Vec<Bar<T>> {
    let tf = series.time_frame();
    let first_open = series.timestamps().first().map_or(0, |t| t - tf.duration_ms());
    let mut close = start_price;
    let mut bars = vec![Bar {
        open_time: tf.bucket_start(first_open),
        time_frame: tf,
        open: close,
        high: close,
        low: close,
        close,
        volume: T::one(),
        trade_count: 1,
    }];
    for (ts, r) in series.timestamps().iter().zip(series.values()) {
        let open = close;
        close = open * r.exp();
        bars.push(Bar {
            open_time: tf.bucket_start(*ts),
            time_frame: tf,
            open,
            high: open.max(close),
            low: open.min(close),
            close,
            volume: T::one(),
            trade_count: 1,
        });
    }
    bars
}

/// Autocorrelation of a stationary AR(1) process at `lag`: `phi^lag`.
pub fn theoretical_acf_ar1(phi: f64, lag: u32) -> Result<f64, SynthError> {
    if !(phi.abs() < 1.0) {
        return Err(SynthError::NonStationary(phi));
    }
    Ok(phi.powi(lag as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::compute_returns;
    use crate::stats::acf;

    #[test]
    fn deterministic() {
        for spec in
            [GeneratorSpec::white_noise(500, 3), GeneratorSpec::ar1(0.6, 500, 3), GeneratorSpec::random_walk(500, 3)]
        {
            let a: ReturnSeries<f64> = generate(&spec).unwrap();
            let b: ReturnSeries<f64> = generate(&spec).unwrap();
            assert_eq!(a, b);
            let bits: Vec<u64> = a.values().iter().map(|v| v.to_bits()).collect();
            let again: Vec<u64> = b.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits, again);
        }
        let other: ReturnSeries<f64> = generate(&GeneratorSpec::white_noise(500, 4)).unwrap();
        let base: ReturnSeries<f64> = generate(&GeneratorSpec::white_noise(500, 3)).unwrap();
        assert_ne!(other.values(), base.values());
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(generate::<f64>(&GeneratorSpec::ar1(1.0, 10, 1)), Err(SynthError::NonStationary(_))));
        assert!(matches!(generate::<f64>(&GeneratorSpec::ar1(-1.5, 10, 1)), Err(SynthError::NonStationary(_))));
        assert!(matches!(generate::<f64>(&GeneratorSpec::white_noise(0, 1)), Err(SynthError::EmptyLength)));
        assert!(matches!(
            generate::<f64>(&GeneratorSpec::white_noise(5, 1).with_sigma(0.0)),
            Err(SynthError::BadSigma(_))
        ));
        // phi is irrelevant outside AR(1).
        let spec = GeneratorSpec { phi: 3.0, ..GeneratorSpec::white_noise(5, 1) };
        assert!(generate::<f64>(&spec).is_ok());
    }

    #[test]
    fn ar1_with_zero_phi_is_white() {
        for seed in 0..5 {
            let n = 20_000;
            let s: ReturnSeries<f64> = generate(&GeneratorSpec::ar1(0.0, n, seed)).unwrap();
            let r1 = acf(&s, 1, 0.05).unwrap().coefficients[0];
            assert!(r1.abs() <= 4.0 / (n as f64).sqrt(), "seed {seed}: r1 = {r1}");
        }
    }

    #[test]
    fn theoretical_ar1() {
        assert_eq!(theoretical_acf_ar1(0.5, 0).unwrap(), 1.0);
        assert_eq!(theoretical_acf_ar1(0.5, 3).unwrap(), 0.125);
        assert_eq!(theoretical_acf_ar1(-0.5, 2).unwrap(), 0.25);
        assert_eq!(theoretical_acf_ar1(-0.5, 3).unwrap(), -0.125);
        assert!(theoretical_acf_ar1(1.0, 1).is_err());
    }

    #[test]
    fn white_noise_mean() {
        let n = 100_000;
        let sigma = 2.5;
        let s: ReturnSeries<f64> = generate(&GeneratorSpec::white_noise(n, 11).with_sigma(sigma)).unwrap();
        let mean = s.values().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 4.0 * sigma / (n as f64).sqrt());
        let var = s.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var.sqrt() / sigma - 1.0).abs() < 0.02);
    }

    #[test]
    fn ar1_matches_theory() {
        let n = 100_000;
        for phi in [0.6, -0.4] {
            let s: ReturnSeries<f64> = generate(&GeneratorSpec::ar1(phi, n, 5)).unwrap();
            let r = acf(&s, 5, 0.05).unwrap();
            for lag in 1..=5u32 {
                let expected = theoretical_acf_ar1(phi, lag).unwrap();
                let got = r.coefficients[lag as usize - 1];
                assert!((got - expected).abs() <= 4.0 / (n as f64).sqrt(), "phi {phi} lag {lag}: {got}");
            }
        }
    }

    #[test]
    fn bars_reproduce_returns() {
        let s: ReturnSeries<f64> =
            generate(&GeneratorSpec::random_walk(200, 9).with_sigma(0.01).with_time_frame(TimeFrame::H1)).unwrap();
        let bars = bars_from_returns(&s, 100.0);
        assert_eq!(bars.len(), 201);
        assert!(bars.iter().all(|b| b.is_consistent() && TimeFrame::H1.is_aligned(b.open_time)));
        let back = compute_returns("x", &bars, ReturnKind::Log).unwrap();
        assert_eq!(back.timestamps(), s.timestamps());
        for (a, b) in back.values().iter().zip(s.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn f32_generation() {
        let s: ReturnSeries<f32> = generate(&GeneratorSpec::white_noise(1_000, 2)).unwrap();
        assert_eq!(s.len(), 1_000);
    }
}

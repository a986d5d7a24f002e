use super::special::normal_quantile;
use super::StatsError;
use crate::Scalar;

/// Sample autocorrelations at lags `1..=max_lag` with the white-noise band.
#[derive(Clone, Debug, PartialEq)]
pub struct AcfResult<T> {
    pub n: usize,
    pub max_lag: usize,
    /// `coefficients[k - 1]` is the lag-`k` autocorrelation.
    pub coefficients: Vec<T>,
    /// `z_{1-alpha/2} / sqrt(n)`
    pub band_half_width: T,
    pub alpha: T,
}

impl<T: Scalar> AcfResult<T> {
    /// Autocorrelation at `lag`; lag 0 is identically 1.
    pub fn at(&self, lag: usize) -> Option<T> {
        match lag {
            0 => Some(T::one()),
            k => self.coefficients.get(k - 1).copied(),
        }
    }

    /// Lags whose coefficient lies strictly outside `±band`.
    pub fn lags_outside(&self, band: T) -> Vec<usize> {
        (1..=self.max_lag).filter(|&k| self.coefficients[k - 1].abs() > band).collect()
    }
}

/// Half-width of the `1 - alpha` white-noise band, `z_{1-alpha/2} / sqrt(n)`.
pub fn confidence_band<T: Scalar>(n: usize, alpha: T) -> Result<T, StatsError> {
    if n < 2 {
        return Err(StatsError::SampleTooSmall(n));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(StatsError::BadAlpha);
    }
    let z = normal_quantile(T::one() - alpha * T::lit(0.5))?;
    Ok(z / T::from_usize_lossy(n).sqrt())
}

/// Mean with one refinement pass over the residuals.
pub(crate) fn mean<T: Scalar>(x: &[T]) -> T {
    let n = T::from_usize_lossy(x.len());
    let m = x.iter().copied().sum::<T>() / n;
    m + x.iter().map(|&v| v - m).sum::<T>() / n
}

/// `r_k = sum_{t<n-k} (x_t - m)(x_{t+k} - m) / sum_t (x_t - m)^2` for `k = 1..=max_lag`,
/// with one overall mean `m`.
pub(crate) fn autocorrelations<T: Scalar>(x: &[T], max_lag: usize) -> Result<Vec<T>, StatsError> {
    let n = x.len();
    if max_lag == 0 {
        return Err(StatsError::ZeroLag);
    }
    if max_lag >= n {
        return Err(StatsError::TooShort { n, max_lag });
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(StatsError::ZeroVariance);
    }
    let m = mean(x);
    let centered: Vec<T> = x.iter().map(|&v| v - m).collect();
    let denom: T = centered.iter().map(|&d| d * d).sum();
    if !(denom > T::zero()) {
        return Err(StatsError::ZeroVariance);
    }
    Ok((1..=max_lag)
        .map(|k| {
            let num: T = centered.iter().zip(&centered[k..]).map(|(&a, &b)| a * b).sum();
            num / denom
        })
        .collect())
}

/// Sample autocorrelation function at lags `1..=max_lag`.
///
/// Uses the full-sample variance (divisor `n`) in the denominator, which keeps
/// every coefficient inside `[-1, 1]`.
pub fn acf<T: Scalar>(series: impl AsRef<[T]>, max_lag: usize, alpha: T) -> Result<AcfResult<T>, StatsError> {
    let x = series.as_ref();
    let coefficients = autocorrelations(x, max_lag)?;
    Ok(AcfResult { n: x.len(), max_lag, coefficients, band_half_width: confidence_band(x.len(), alpha)?, alpha })
}

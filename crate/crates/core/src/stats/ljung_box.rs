use super::acf::{acf, AcfResult};
use super::special::chi2_sf;
use super::StatsError;
use crate::Scalar;

/// Cumulative Ljung-Box statistics for lags `1..=max_lag`.
#[derive(Clone, Debug, PartialEq)]
pub struct LjungBoxResult<T> {
    pub n: usize,
    pub max_lag: usize,
    /// `q_values[h - 1] = n(n+2) sum_{k<=h} r_k^2 / (n-k)`
    pub q_values: Vec<T>,
    /// Upper chi-squared tail of `q_values[h - 1]` with `h` degrees of freedom.
    pub p_values: Vec<T>,
    pub alpha: T,
    /// `p_values[h - 1] < alpha`
    pub rejected: Vec<bool>,
}

impl<T: Scalar> LjungBoxResult<T> {
    pub fn min_p_value(&self) -> T {
        self.p_values.iter().copied().fold(T::one(), T::min)
    }

    pub fn any_rejected(&self) -> bool {
        self.rejected.iter().any(|r| *r)
    }
}

/// Ljung-Box statistic from already-estimated autocorrelations.
pub fn ljung_box_from_acf<T: Scalar>(acf: &AcfResult<T>, alpha: T) -> Result<LjungBoxResult<T>, StatsError> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(StatsError::BadAlpha);
    }
    let n = acf.n;
    let nf = T::from_usize_lossy(n);
    let scale = nf * (nf + T::lit(2.0));
    let mut running = T::zero();
    let mut q_values = Vec::with_capacity(acf.max_lag);
    let mut p_values = Vec::with_capacity(acf.max_lag);
    for (i, r) in acf.coefficients.iter().enumerate() {
        let lag = i + 1;
        running += *r * *r / T::from_usize_lossy(n - lag);
        let q = scale * running;
        q_values.push(q);
        p_values.push(chi2_sf(q, lag)?);
    }
    let rejected = p_values.iter().map(|p| *p < alpha).collect();
    Ok(LjungBoxResult { n, max_lag: acf.max_lag, q_values, p_values, alpha, rejected })
}

/// Ljung-Box portmanteau test of no autocorrelation up to `max_lag`.
pub fn ljung_box<T: Scalar>(
    series: impl AsRef<[T]>,
    max_lag: usize,
    alpha: T,
) -> Result<LjungBoxResult<T>, StatsError> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(StatsError::BadAlpha);
    }
    ljung_box_from_acf(&acf(series, max_lag, alpha)?, alpha)
}

//! Chi-squared and normal distribution functions built on the regularized
//! incomplete gamma function.

use super::StatsError;
use crate::Scalar;

const MAX_ITER: usize = 10_000;
const QUANTILE_MAX_ITER: usize = 300;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = T::lit(std::f64::consts::PI);
        return (pi / (pi * x).sin().abs()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS[0]);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += T::lit(*c) / (x + T::from_usize_lossy(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    T::lit(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + half) * t.ln() - t + acc.ln()
}

/// `(P(a, x), Q(a, x))`, the regularized lower and upper incomplete gamma functions.
///
/// The smaller tail is computed directly (series below `a + 1`, Lentz continued
/// fraction above), so neither side suffers cancellation.
pub fn gamma_inc_pair<T: Scalar>(a: T, x: T) -> Result<(T, T), StatsError> {
    if !(a > T::zero()) || !(x >= T::zero()) {
        return Err(StatsError::Domain("incomplete gamma needs a > 0 and x >= 0"));
    }
    if x == T::zero() {
        return Ok((T::zero(), T::one()));
    }
    if x.is_infinite() {
        return Ok((T::one(), T::zero()));
    }
    let prefactor = (a * x.ln() - x - ln_gamma(a)).exp();
    if x < a + T::one() {
        let p = lower_series(a, x, prefactor)?;
        Ok((p, T::one() - p))
    } else {
        let q = upper_continued_fraction(a, x, prefactor)?;
        Ok((T::one() - q, q))
    }
}

fn lower_series<T: Scalar>(a: T, x: T, prefactor: T) -> Result<T, StatsError> {
    let mut ap = a;
    let mut term = T::one() / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += T::one();
        term = term * x / ap;
        sum += term;
        if term.abs() < sum.abs() * T::epsilon() {
            return Ok((prefactor * sum).min(T::one()));
        }
    }
    Err(StatsError::NoConvergence("incomplete gamma series"))
}

fn upper_continued_fraction<T: Scalar>(a: T, x: T, prefactor: T) -> Result<T, StatsError> {
    let tiny = T::min_positive_value() / T::epsilon();
    let two = T::lit(2.0);
    let mut b = x + T::one() - a;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let i = T::from_usize_lossy(i);
        let an = -i * (i - a);
        b += two;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let delta = d * c;
        h *= delta;
        if (delta - T::one()).abs() < T::epsilon() {
            return Ok((prefactor * h).min(T::one()));
        }
    }
    Err(StatsError::NoConvergence("incomplete gamma continued fraction"))
}

fn check_dof(k: usize) -> Result<(), StatsError> {
    if k < 1 {
        return Err(StatsError::Domain("chi-squared degrees of freedom must be >= 1"));
    }
    Ok(())
}

fn check_x<T: Scalar>(x: T) -> Result<(), StatsError> {
    if !(x >= T::zero()) {
        return Err(StatsError::Domain("chi-squared argument must be >= 0"));
    }
    Ok(())
}

/// Chi-squared CDF with `k` degrees of freedom: `P(k/2, x/2)`.
pub fn chi2_cdf<T: Scalar>(x: T, k: usize) -> Result<T, StatsError> {
    check_dof(k)?;
    check_x(x)?;
    let half = T::lit(0.5);
    Ok(gamma_inc_pair(T::from_usize_lossy(k) * half, x * half)?.0)
}

/// Chi-squared upper tail `1 − CDF`, computed without forming the CDF.
pub fn chi2_sf<T: Scalar>(x: T, k: usize) -> Result<T, StatsError> {
    check_dof(k)?;
    check_x(x)?;
    let half = T::lit(0.5);
    Ok(gamma_inc_pair(T::from_usize_lossy(k) * half, x * half)?.1)
}

/// Chi-squared density.
pub fn chi2_pdf<T: Scalar>(x: T, k: usize) -> Result<T, StatsError> {
    check_dof(k)?;
    check_x(x)?;
    let half_k = T::from_usize_lossy(k) * T::lit(0.5);
    if x == T::zero() {
        return Ok(match k {
            1 => T::infinity(),
            2 => T::lit(0.5),
            _ => T::zero(),
        });
    }
    let ln_pdf = (half_k - T::one()) * x.ln() - x * T::lit(0.5) - half_k * T::lit(2f64.ln()) - ln_gamma(half_k);
    Ok(ln_pdf.exp())
}

/// Inverse chi-squared CDF: the `x` with `chi2_cdf(x, k) = p`, for `0 <= p < 1`.
///
/// Brackets the root by doubling, then runs Newton steps that fall back to
/// bisection whenever they leave the bracket.
pub fn chi2_quantile<T: Scalar>(p: T, k: usize) -> Result<T, StatsError> {
    check_dof(k)?;
    if !(p >= T::zero() && p < T::one()) {
        return Err(StatsError::Domain("chi-squared quantile needs 0 <= p < 1"));
    }
    if p == T::zero() {
        return Ok(T::zero());
    }
    let upper = p > T::lit(0.5);
    let q = T::one() - p;
    // Signed residual cdf(x) − p, using the upper tail when p is close to 1.
    let residual = |x: T| -> Result<T, StatsError> { Ok(if upper { q - chi2_sf(x, k)? } else { chi2_cdf(x, k)? - p }) };

    let mut lo = T::zero();
    let mut hi = T::from_usize_lossy(k).max(T::one());
    while residual(hi)? < T::zero() {
        lo = hi;
        hi *= T::lit(2.0);
        if hi.is_infinite() {
            return Err(StatsError::NoConvergence("chi-squared quantile bracket"));
        }
    }

    let tol = T::epsilon() * T::lit(4.0);
    let mut x = (lo + hi) * T::lit(0.5);
    for _ in 0..QUANTILE_MAX_ITER {
        let f = residual(x)?;
        if f == T::zero() {
            return Ok(x);
        }
        if f < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let slope = chi2_pdf(x, k)?;
        let newton = x - f / slope;
        let next = if slope > T::zero() && newton > lo && newton < hi { newton } else { (lo + hi) * T::lit(0.5) };
        if (next - x).abs() <= tol * x.max(T::one()) || hi - lo <= tol * hi.max(T::one()) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Standard normal CDF, via `Φ(z) = (1 + sign(z)·P(1/2, z²/2)) / 2`.
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    let half = T::lit(0.5);
    if z.is_nan() {
        return z;
    }
    let (_, tail) = gamma_inc_pair(half, z * z * half).unwrap_or((T::one(), T::zero()));
    if z >= T::zero() {
        T::one() - half * tail
    } else {
        half * tail
    }
}

/// Standard normal quantile for `0 < p < 1`, via the one-degree chi-squared quantile.
pub fn normal_quantile<T: Scalar>(p: T) -> Result<T, StatsError> {
    if !(p > T::zero() && p < T::one()) {
        return Err(StatsError::Domain("normal quantile needs 0 < p < 1"));
    }
    let half = T::lit(0.5);
    if p == half {
        return Ok(T::zero());
    }
    let two = T::lit(2.0);
    if p > half {
        Ok(chi2_quantile(two * p - T::one(), 1)?.sqrt())
    } else {
        Ok(-chi2_quantile(T::one() - two * p, 1)?.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0f64)).abs() < 1e-15);
        assert!((ln_gamma(0.5f64) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0f64) - 362_880f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.1f64) - 2.252_712_651_734_206).abs() < 1e-13);
    }

    #[test]
    fn cdf_at_zero_is_zero() {
        for k in 1..50 {
            assert_eq!(chi2_cdf(0.0f64, k).unwrap(), 0.0);
            assert_eq!(chi2_sf(0.0f64, k).unwrap(), 1.0);
        }
    }

    #[test]
    fn closed_forms() {
        for &x in &[0.01, 0.5, 1.0, 3.0, 5.991_465, 20.0, 80.0] {
            let two_dof = 1.0 - (-x / 2.0f64).exp();
            assert!((chi2_cdf(x, 2).unwrap() - two_dof).abs() < 1e-14, "k=2 x={x}");
        }
        assert!((chi2_cdf(5.991_465f64, 2).unwrap() - 0.950_000_011_322_299_2).abs() < 1e-14);
        assert!((chi2_cdf(3.841_459f64, 1).unwrap() - 0.95).abs() < 1e-6);
        assert!((chi2_cdf(3.841_459f64, 1).unwrap() - 0.950_000_005_346_804_4).abs() < 1e-14);
    }

    #[test]
    fn deep_tail_keeps_precision() {
        // k = 2: sf = exp(-x/2) exactly.
        let sf = chi2_sf(1_000.0f64, 2).unwrap();
        assert!((sf / (-500.0f64).exp() - 1.0).abs() < 1e-12);
        assert_eq!(chi2_sf(1e6f64, 10).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(chi2_cdf(-1.0f64, 2).is_err());
        assert!(chi2_cdf(1.0f64, 0).is_err());
        assert!(chi2_quantile(1.0f64, 2).is_err());
        assert!(chi2_quantile(-0.1f64, 2).is_err());
        assert!(normal_quantile(0.0f64).is_err());
    }

    #[test]
    fn quantiles() {
        assert_eq!(chi2_quantile(0.0f64, 3).unwrap(), 0.0);
        let x = chi2_quantile(0.95f64, 2).unwrap();
        assert!((x + 2.0 * 0.05f64.ln()).abs() < 1e-10);
        let z = normal_quantile(0.975f64).unwrap();
        assert!((z - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(0.025f64).unwrap() + z).abs() < 1e-12);
        assert!((normal_cdf(z) - 0.975).abs() < 1e-14);
    }

    #[test]
    fn single_precision_works() {
        let x = chi2_quantile(0.95f32, 2).unwrap();
        assert!((x - 5.991_464_5).abs() < 1e-4);
        assert!((chi2_cdf(5.991_465f32, 2).unwrap() - 0.95).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn cdf_is_monotone(k in 1usize..60, a in 0.0f64..150.0, b in 0.0f64..150.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (cl, ch) = (chi2_cdf(lo, k).unwrap(), chi2_cdf(hi, k).unwrap());
            prop_assert!((0.0..=1.0).contains(&cl) && (0.0..=1.0).contains(&ch));
            prop_assert!(cl <= ch);
            let total = chi2_cdf(hi, k).unwrap() + chi2_sf(hi, k).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-14);
        }
    }
}

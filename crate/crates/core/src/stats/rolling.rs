use rayon::prelude::*;

use super::acf::{autocorrelations, mean};
use super::StatsError;
use crate::series::ReturnSeries;
use crate::Scalar;

/// Window positions handled per independent block. Block boundaries depend only on
/// the input, so sequential and parallel scans produce identical bits.
const BLOCK: usize = 512;

/// Lag-1 autocorrelation over a sliding window of returns.
#[derive(Clone, Debug, PartialEq)]
pub struct RollingAcfResult<T> {
    pub window_len: usize,
    pub step: usize,
    /// Timestamp of the last return in each window.
    pub window_end_timestamps: Vec<i64>,
    /// `None` marks a window with zero variance.
    pub r1_values: Vec<Option<T>>,
}

impl<T: Scalar> RollingAcfResult<T> {
    pub fn len(&self) -> usize {
        self.r1_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r1_values.is_empty()
    }

    /// Defined (non-gap) values.
    pub fn defined(&self) -> impl Iterator<Item = T> + '_ {
        self.r1_values.iter().flatten().copied()
    }

    pub fn gap_count(&self) -> usize {
        self.r1_values.iter().filter(|v| v.is_none()).count()
    }
}

/// Running sums over `y = x - shift` for one window.
struct Sums<T> {
    s1: T,
    s2: T,
    cross: T,
}

fn lag1_direct<T: Scalar>(window: &[T]) -> Option<T> {
    autocorrelations(window, 1).ok().map(|r| r[0])
}

/// Rolling lag-1 autocorrelation, `window_len` returns per window, advancing by `step`.
///
/// Each value is the estimator of [`super::acf`] applied to that window alone.
/// Constant windows yield a gap marker (`None`) rather than an error.
pub fn rolling_acf1<T: Scalar>(
    series: &ReturnSeries<T>,
    window_len: usize,
    step: usize,
) -> Result<RollingAcfResult<T>, StatsError> {
    let x = series.values();
    let n = x.len();
    if window_len < 3 {
        return Err(StatsError::WindowTooShort(window_len));
    }
    if window_len > n {
        return Err(StatsError::WindowTooLong { window_len, n });
    }
    if step == 0 {
        return Err(StatsError::ZeroStep);
    }

    // run[i]: length of the run of equal values ending at i.
    let mut run = vec![1usize; n];
    for i in 1..n {
        if x[i] == x[i - 1] {
            run[i] = run[i - 1] + 1;
        }
    }

    let positions = (n - window_len) / step + 1;
    let blocks: Vec<Vec<Option<T>>> = (0..positions.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let first = b * BLOCK;
            let last = (first + BLOCK).min(positions);
            scan_block(x, &run, window_len, step, first..last)
        })
        .collect();

    let stamps = series.timestamps();
    Ok(RollingAcfResult {
        window_len,
        step,
        window_end_timestamps: (0..positions).map(|p| stamps[p * step + window_len - 1]).collect(),
        r1_values: blocks.into_iter().flatten().collect(),
    })
}

fn scan_block<T: Scalar>(
    x: &[T],
    run: &[usize],
    w: usize,
    step: usize,
    positions: std::ops::Range<usize>,
) -> Vec<Option<T>> {
    let constant = |start: usize| run[start + w - 1] >= w;
    let mut out = Vec::with_capacity(positions.len());
    // Sliding only pays off when consecutive windows overlap substantially.
    if step * 4 >= w {
        for p in positions {
            let s = p * step;
            out.push(if constant(s) { None } else { lag1_direct(&x[s..s + w]) });
        }
        return out;
    }

    let first = positions.start * step;
    let shift = mean(&x[first..first + w]);
    let y = |i: usize| x[i] - shift;
    let mut sums = Sums { s1: T::zero(), s2: T::zero(), cross: T::zero() };
    for i in first..first + w {
        sums.s1 += y(i);
        sums.s2 += y(i) * y(i);
        if i + 1 < first + w {
            sums.cross += y(i) * y(i + 1);
        }
    }

    let wf = T::from_usize_lossy(w);
    let cancellation = T::epsilon().sqrt();
    let mut start = first;
    for p in positions {
        let s = p * step;
        while start < s {
            let (old, new) = (start, start + w);
            sums.s1 += y(new) - y(old);
            sums.s2 += y(new) * y(new) - y(old) * y(old);
            sums.cross += y(new - 1) * y(new) - y(old) * y(old + 1);
            start += 1;
        }
        if s == first {
            out.push(if constant(s) { None } else { lag1_direct(&x[s..s + w]) });
            continue;
        }
        if constant(s) {
            out.push(None);
            continue;
        }
        let m = sums.s1 / wf;
        let denom = sums.s2 - wf * m * m;
        if !(denom > cancellation * sums.s2) {
            out.push(lag1_direct(&x[s..s + w]));
            continue;
        }
        let (head, tail) = (y(s), y(s + w - 1));
        let num = sums.cross - m * (sums.s1 - tail) - m * (sums.s1 - head) + (wf - T::one()) * m * m;
        out.push(Some(num / denom));
    }
    out
}

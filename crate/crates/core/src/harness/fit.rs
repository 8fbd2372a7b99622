use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialFit {
    /// Negated slope of `log value` against `t`.
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(t, ln value)` over the last `tail_fraction` of the samples
/// (at least two).
pub fn fit_exponential_rate(
    times: &[f64],
    values: &[f64],
    tail_fraction: f64,
) -> Result<ExponentialFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            left: times.len(),
            right: values.len(),
        });
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidParameter(
            "tail_fraction must lie in (0, 1]".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("times must be increasing".into()));
    }
    let n = times.len();
    let take = ((n as f64 * tail_fraction).ceil() as usize).clamp(2.min(n), n);
    if take < 2 {
        return Err(Error::InvalidParameter(
            "need at least two samples to fit".into(),
        ));
    }
    let (t, v) = (&times[n - take..], &values[n - take..]);
    if v.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::NonPositiveValues);
    }
    let y: Vec<f64> = v.iter().map(|y| y.ln()).collect();
    let k = take as f64;
    let tm = t.iter().sum::<f64>() / k;
    let ym = y.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in t.iter().zip(&y) {
        sxy += (a - tm) * (b - ym);
        sxx += (a - tm) * (a - tm);
        syy += (b - ym) * (b - ym);
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(ExponentialFit {
        rate: -slope,
        amplitude: intercept.exp(),
        r_squared,
    })
}

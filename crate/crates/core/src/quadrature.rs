//! Composite Simpson rule on uniformly spaced samples.

use crate::error::{config, Result};

/// Weights `w` such that `sum(w[i] * y[i])` is the composite Simpson value of
/// the integral of `y` over `intervals` uniform steps of width `step`.
pub fn simpson_weights(intervals: usize, step: f64) -> Result<Vec<f64>> {
    if intervals == 0 || intervals % 2 != 0 {
        return config(format!(
            "composite Simpson needs an even, positive number of intervals (got {intervals})"
        ));
    }
    let mut w = vec![0.0; intervals + 1];
    let third = step / 3.0;
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = if i == 0 || i == intervals {
            third
        } else if i % 2 == 1 {
            4.0 * third
        } else {
            2.0 * third
        };
    }
    Ok(w)
}

/// Composite Simpson over samples `y[0..=n]` with spacing `step`.
pub fn simpson(y: &[f64], step: f64) -> Result<f64> {
    let w = simpson_weights(y.len().saturating_sub(1), step)?;
    Ok(w.iter().zip(y).map(|(w, y)| w * y).sum())
}

/// Simpson on a single panel `[x, x + width]` from its three samples.
#[inline]
pub fn simpson_panel(left: f64, mid: f64, right: f64, width: f64) -> f64 {
    width / 6.0 * (left + 4.0 * mid + right)
}

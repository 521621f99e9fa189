//! Two-time mobility measures over slot-aligned snapshots.

use super::MeasureError;
use crate::stats::{self, LinearTrend};

/// Ranks starting at 1, ties sharing the average of their positions.
/// The flag reports whether any tie occurred.
pub fn average_ranks(xs: &[f64]) -> (Vec<f64>, bool) {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut tied = false;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        if j - i > 1 {
            tied = true;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    (ranks, tied)
}

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<(), MeasureError> {
    if x.len() != y.len() {
        return Err(MeasureError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < min {
        return Err(MeasureError::TooFew {
            need: min,
            got: x.len(),
        });
    }
    Ok(())
}

/// Spearman rank correlation between the same slots at two times.
pub fn spearman(x_t: &[f64], x_t_delta: &[f64]) -> Result<f64, MeasureError> {
    check_pair(x_t, x_t_delta, 2)?;
    let (rx, tx) = average_ranks(x_t);
    let (ry, ty) = average_ranks(x_t_delta);
    if tx || ty {
        return stats::pearson(&rx, &ry).ok_or(MeasureError::DegenerateVariance("ranks"));
    }
    let n = x_t.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((1.0 - 6.0 * d2 / (n * (n * n - 1.0))).clamp(-1.0, 1.0))
}

/// Least-squares slope of `log x(t + delta)` on `log x(t)`.
pub fn earnings_elasticity(x_t: &[f64], x_t_delta: &[f64]) -> Result<f64, MeasureError> {
    check_pair(x_t, x_t_delta, 3)?;
    let logs = |xs: &[f64]| -> Result<Vec<f64>, MeasureError> {
        xs.iter()
            .enumerate()
            .map(|(index, &value)| {
                if value > 0.0 && value.is_finite() {
                    Ok(value.ln())
                } else {
                    Err(MeasureError::InvalidIncome { index, value })
                }
            })
            .collect()
    };
    let lx = logs(x_t)?;
    let ly = logs(x_t_delta)?;
    LinearTrend::fit(&lx, &ly)
        .map(|t| t.slope)
        .ok_or(MeasureError::DegenerateVariance("log income at the earlier time"))
}

//! Inequality indices of a single income snapshot.

use super::MeasureError;

fn check_nonnegative(incomes: &[f64]) -> Result<f64, MeasureError> {
    if incomes.len() < 2 {
        return Err(MeasureError::TooFew {
            need: 2,
            got: incomes.len(),
        });
    }
    let mut total = 0.0;
    for (index, &value) in incomes.iter().enumerate() {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(MeasureError::InvalidIncome { index, value });
        }
        total += value;
    }
    if total == 0.0 {
        return Err(MeasureError::AllZero);
    }
    Ok(total)
}

/// Gini coefficient from the sorted-rank formula
/// `2 sum_i i x_(i) / (n sum x) - (n + 1) / n`.
pub fn gini(incomes: &[f64]) -> Result<f64, MeasureError> {
    let total = check_nonnegative(incomes)?;
    let mut sorted = incomes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (i + 1) as f64 * x)
        .sum();
    let g = 2.0 * weighted / (n * total) - (n + 1.0) / n;
    Ok(g.clamp(0.0, 1.0))
}

/// Share of total income held by the richest `p` fraction,
/// with `k = max(1, round(p n))` individuals counted as the top.
pub fn top_share(incomes: &[f64], p: f64) -> Result<f64, MeasureError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(MeasureError::BadFraction(p));
    }
    let n = incomes.len();
    if (n as f64) * p < 1.0 - 1e-9 {
        return Err(MeasureError::TooSmallForFraction { p, n });
    }
    let total = check_nonnegative(incomes)?;
    let k = ((p * n as f64).round() as usize).max(1);
    let mut work = incomes.to_vec();
    let (_, pivot, top) = work.select_nth_unstable_by(n - k, f64::total_cmp);
    let head = *pivot + top.iter().sum::<f64>();
    Ok((head / total).clamp(0.0, 1.0))
}

/// Theil index `log(mean x) - mean(log x)`.
pub fn theil(incomes: &[f64]) -> Result<f64, MeasureError> {
    if incomes.len() < 2 {
        return Err(MeasureError::TooFew {
            need: 2,
            got: incomes.len(),
        });
    }
    let mut sum = 0.0;
    let mut log_sum = 0.0;
    for (index, &value) in incomes.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(MeasureError::InvalidIncome { index, value });
        }
        sum += value;
        log_sum += value.ln();
    }
    let n = incomes.len() as f64;
    Ok(((sum / n).ln() - log_sum / n).max(0.0))
}

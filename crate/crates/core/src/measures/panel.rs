//! Measures applied across every snapshot of a panel.

use super::{earnings_elasticity, gini, spearman, theil, top_share, MeasureError};
use crate::ensemble::SnapshotPanel;
use crate::stats;

/// Measures of one snapshot. The mobility columns compare this snapshot with
/// the one `delta` years later and are `None` when that snapshot is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRow {
    pub time: f64,
    pub gini: f64,
    /// Top shares in the order of [`MeasurePanel::fractions`].
    pub top_shares: Vec<f64>,
    pub theil: f64,
    pub spearman: Option<f64>,
    pub ee: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurePanel {
    pub fractions: Vec<f64>,
    pub delta: Option<f64>,
    pub rows: Vec<MeasureRow>,
}

impl MeasurePanel {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.time).collect()
    }

    pub fn gini_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gini).collect()
    }

    pub fn theil_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.theil).collect()
    }

    /// Top-share series for `fractions[i]`.
    pub fn top_share_series(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.top_shares[i]).collect()
    }

    /// `(time, value)` pairs of the Spearman column where defined.
    pub fn spearman_series(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.spearman.map(|v| (r.time, v)))
            .collect()
    }

    pub fn ee_series(&self) -> Vec<(f64, f64)> {
        self.rows.iter().filter_map(|r| r.ee.map(|v| (r.time, v))).collect()
    }
}

fn in_context(time: f64) -> impl Fn(MeasureError) -> MeasureError {
    move |e| MeasureError::AtSnapshot {
        time,
        source: Box::new(e),
    }
}

/// Applies every estimator to `panel`, pairing each snapshot at `t` with the
/// one at `t + delta` when `delta` is given.
///
/// A pair whose two rows are identical and constant has no rank or log
/// variance; it is reported as perfectly immobile (Spearman 1, elasticity 1).
pub fn measure_panel(
    panel: &SnapshotPanel,
    fractions: &[f64],
    delta: Option<f64>,
) -> Result<MeasurePanel, MeasureError> {
    if let Some(d) = delta {
        if !(d > 0.0 && d.is_finite()) {
            return Err(MeasureError::BadLag(d));
        }
    }
    let mut rows = Vec::with_capacity(panel.len());
    let mut any_pair = false;
    for (i, &time) in panel.times().iter().enumerate() {
        let x = panel.row(i);
        let ctx = in_context(time);
        let top_shares = fractions
            .iter()
            .map(|&p| top_share(x, p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(&ctx)?;
        let mut row = MeasureRow {
            time,
            gini: gini(x).map_err(&ctx)?,
            top_shares,
            theil: theil(x).map_err(&ctx)?,
            spearman: None,
            ee: None,
        };
        if let Some(j) = delta.and_then(|d| panel.index_of(time + d)) {
            any_pair = true;
            let y = panel.row(j);
            if x == y && x.iter().all(|&v| v == x[0]) {
                row.spearman = Some(1.0);
                row.ee = Some(1.0);
            } else {
                row.spearman = Some(spearman(x, y).map_err(&ctx)?);
                row.ee = Some(earnings_elasticity(x, y).map_err(&ctx)?);
            }
        }
        rows.push(row);
    }
    if let Some(d) = delta {
        if !any_pair && !panel.is_empty() {
            return Err(MeasureError::NoPairs(d));
        }
    }
    Ok(MeasurePanel {
        fractions: fractions.to_vec(),
        delta,
        rows,
    })
}

/// Ensemble mean and median income of one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub time: f64,
    pub mean: f64,
    pub median: f64,
}

pub fn summarize(panel: &SnapshotPanel) -> Vec<SummaryRow> {
    panel
        .times()
        .iter()
        .zip(panel.rows())
        .map(|(&time, row)| SummaryRow {
            time,
            mean: stats::mean(row),
            median: stats::median(row),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_snapshot_has_no_mobility_columns() {
        let panel = SnapshotPanel::new(vec![0.0], vec![vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let m = measure_panel(&panel, &[0.25], None).unwrap();
        assert_eq!(m.rows.len(), 1);
        assert_eq!(m.rows[0].spearman, None);
        assert_eq!(m.rows[0].ee, None);
        assert!((m.rows[0].gini - 0.25).abs() < 1e-15);
    }

    #[test]
    fn static_equal_population() {
        let panel = SnapshotPanel::new(vec![0.0, 10.0, 20.0], vec![vec![1.0; 5]; 3]).unwrap();
        let m = measure_panel(&panel, &[0.2], Some(10.0)).unwrap();
        for row in &m.rows[..2] {
            assert_eq!(row.gini, 0.0);
            assert_eq!(row.theil, 0.0);
            assert_eq!(row.spearman, Some(1.0));
            assert_eq!(row.ee, Some(1.0));
        }
        assert_eq!(m.rows[2].spearman, None);
    }

    #[test]
    fn errors_carry_snapshot_time() {
        let panel = SnapshotPanel::new(vec![0.0, 1.0], vec![vec![1.0; 5], vec![1.0; 5]]).unwrap();
        let err = measure_panel(&panel, &[0.01], None).unwrap_err();
        assert!(matches!(err, MeasureError::AtSnapshot { time, .. } if time == 0.0));
        assert!(matches!(
            measure_panel(&panel, &[0.2], Some(5.0)),
            Err(MeasureError::NoPairs(_))
        ));
    }

    #[test]
    fn summary_rows() {
        let panel = SnapshotPanel::new(vec![1.0], vec![vec![1.0, 2.0, 6.0]]).unwrap();
        let s = summarize(&panel);
        assert_eq!(s[0].mean, 3.0);
        assert_eq!(s[0].median, 2.0);
    }
}

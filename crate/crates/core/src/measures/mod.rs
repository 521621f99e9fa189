//! Inequality and mobility estimators.

mod gatsby;
mod inequality;
mod mobility;
mod panel;

use thiserror::Error;

use crate::ensemble::EnsembleError;
use crate::model::ModelError;

pub use gatsby::{gatsby_sweep, Boxplot, GatsbyPoint, SweepConfig};
pub use inequality::{gini, theil, top_share};
pub use mobility::{average_ranks, earnings_elasticity, spearman};
pub use panel::{measure_panel, summarize, MeasurePanel, MeasureRow, SummaryRow};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("income {value} at position {index} is not allowed here")]
    InvalidIncome { index: usize, value: f64 },
    #[error("all incomes are zero")]
    AllZero,
    #[error("fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error("top {p} share needs at least 1/p incomes, got {n}")]
    TooSmallForFraction { p: f64, n: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("zero variance in {0}")]
    DegenerateVariance(&'static str),
    #[error("lag {0} must be positive")]
    BadLag(f64),
    #[error("no snapshot pair is {0} years apart")]
    NoPairs(f64),
    #[error("invalid rate grid: {0}")]
    BadGrid(String),
    #[error("snapshot at t = {time}: {source}")]
    AtSnapshot {
        time: f64,
        source: Box<MeasureError>,
    },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

//! Machine-wise controlled selection with second-order Gaussian knockoffs.
//!
//! Each machine estimates the first two moments of its design, builds
//! equicorrelated knockoff copies, fits a cross-validated Lasso on the
//! augmented design `[X, X̃]` and keeps the features passing the knockoff+
//! cutoff at level `q`.

mod construction;
mod lasso;
mod moments;
mod threshold;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::selection::SelectionSet;

pub use construction::{equicorrelated_s, sample_knockoffs, ConditionalKnockoffLaw, KnockoffModel};
pub use lasso::{
    cv_curve, cv_errors, fold_of, lasso_w_stats, lasso_w_stats_at, CvCurve, CvRule, LambdaGrid, LassoSettings, PathFit,
    StandardizedProblem, WStats, WIDE_MIN_RATIO,
};
pub use moments::{estimate_moments, shrunk_moments, Moments, RIDGE_FLOOR};
pub use threshold::{knockoff_plus_threshold, KnockoffThreshold};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KnockoffError {
    #[error("need at least 2 observations, got {0}")]
    TooFewRows(usize),
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("covariance is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("knockoff construction failed: {0}")]
    Construction(String),
    #[error("lambda grid must be nonempty, nonnegative and strictly decreasing")]
    InvalidGrid,
    #[error("coordinate descent did not converge after {sweeps} sweeps (last max change {max_change:.3e})")]
    NotConverged { sweeps: usize, max_change: f64 },
    #[error("level q must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
}

/// One machine's rows.
#[derive(Debug, Clone)]
pub struct DatasetShard {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub machine_id: usize,
    /// Index of this shard's first row in the full dataset.
    pub row_offset: usize,
}

impl DatasetShard {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, machine_id: usize) -> Result<Self, KnockoffError> {
        if x.nrows() != y.len() {
            return Err(KnockoffError::Shape(format!(
                "X has {} rows, y has {}",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() < 2 {
            return Err(KnockoffError::TooFewRows(x.nrows()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(KnockoffError::NonFinite);
        }
        Ok(DatasetShard {
            x,
            y,
            machine_id,
            row_offset: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SelectorSettings {
    pub lasso: LassoSettings,
}

/// Moments used for the knockoff model: the floored sample estimate, or a
/// shrinkage estimate when the shard has no more rows than columns.
pub fn shard_moments(x: &DMatrix<f64>) -> Result<Moments, KnockoffError> {
    if x.nrows() <= x.ncols() {
        Ok(shrunk_moments(x)?.0)
    } else {
        estimate_moments(x)
    }
}

/// Fits the knockoff model for a shard and returns its statistics.
pub fn machine_statistics<R: Rng + ?Sized>(
    shard: &DatasetShard,
    settings: &SelectorSettings,
    rng: &mut R,
) -> Result<WStats, KnockoffError> {
    let moments = shard_moments(&shard.x)?;
    let s = equicorrelated_s(&moments.covariance)?;
    let model = KnockoffModel::new(moments.mean, moments.covariance, s)?;
    let x_tilde = sample_knockoffs(&shard.x, &model, rng)?;
    lasso_w_stats(&shard.x, &x_tilde, &shard.y, &settings.lasso)
}

pub fn check_level(q: f64) -> Result<(), KnockoffError> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(KnockoffError::InvalidLevel(q))
    }
}

/// Full machine-wise pipeline at level `q`.
pub fn machine_select<R: Rng + ?Sized>(
    shard: &DatasetShard,
    q: f64,
    settings: &SelectorSettings,
    rng: &mut R,
) -> Result<SelectionSet, KnockoffError> {
    check_level(q)?;
    let stats = machine_statistics(shard, settings, rng)?;
    Ok(knockoff_plus_threshold(&stats.w, q).selected)
}

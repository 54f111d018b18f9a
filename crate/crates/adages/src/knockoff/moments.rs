use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::KnockoffError;

/// Relative eigenvalue floor applied to sample covariances.
pub const RIDGE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Multiple of the identity added to reach the eigenvalue floor.
    pub ridge: f64,
    /// Columns with zero sample variance; they end up at the floor.
    pub constant_columns: Vec<usize>,
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Sample mean and unbiased covariance, inflated by `δ·I` so that the
/// smallest eigenvalue is at least `1e-6` times the mean diagonal.
pub fn estimate_moments(x: &DMatrix<f64>) -> Result<Moments, KnockoffError> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(KnockoffError::TooFewRows(n));
    }
    if d == 0 {
        return Err(KnockoffError::Shape("design has no columns".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(KnockoffError::NonFinite);
    }
    let mean = DVector::from_fn(d, |j, _| x.column(j).sum() / n as f64);
    let mut centered = x.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let mut covariance = centered.tr_mul(&centered) / (n as f64 - 1.0);
    covariance = (&covariance + covariance.transpose()) * 0.5;

    let constant_columns: Vec<usize> = (0..d).filter(|&j| covariance[(j, j)] <= 0.0).collect();
    let mean_diag = covariance.diagonal().mean();
    let floor = RIDGE_FLOOR * if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let ridge = (floor - min_eigenvalue(&covariance)).max(0.0);
    for j in 0..d {
        covariance[(j, j)] += ridge;
    }
    Ok(Moments {
        mean,
        covariance,
        ridge,
        constant_columns,
    })
}

/// Covariance with the off-diagonal correlations shrunk toward zero by the
/// Schäfer–Strimmer data-driven intensity. Sample variances are kept.
///
/// Used instead of the floored sample covariance when a shard has no more
/// rows than columns, where the sample estimate is singular and knockoffs
/// would collapse onto the originals. Returns the estimate and the
/// intensity in `[0, 1]`.
pub fn shrunk_moments(x: &DMatrix<f64>) -> Result<(Moments, f64), KnockoffError> {
    let base = estimate_moments(x)?;
    let (n, d) = x.shape();
    let nf = n as f64;
    let sd = DVector::from_fn(d, |j, _| (base.covariance[(j, j)] - base.ridge).max(0.0).sqrt());
    let z = DMatrix::from_fn(n, d, |i, j| {
        if sd[j] > 0.0 {
            (x[(i, j)] - base.mean[j]) / sd[j]
        } else {
            0.0
        }
    });
    let mut num = 0.0;
    let mut den = 0.0;
    let mut corr = DMatrix::identity(d, d);
    for a in 0..d {
        for b in (a + 1)..d {
            let w_bar = z.column(a).dot(&z.column(b)) / nf;
            let spread: f64 = (0..n).map(|i| (z[(i, a)] * z[(i, b)] - w_bar).powi(2)).sum();
            let r = nf / (nf - 1.0) * w_bar;
            num += nf / (nf - 1.0).powi(3) * spread;
            den += r * r;
            corr[(a, b)] = r;
            corr[(b, a)] = r;
        }
    }
    let intensity = if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 1.0 };
    let mut covariance = DMatrix::from_fn(d, d, |a, b| {
        let r = if a == b { 1.0 } else { (1.0 - intensity) * corr[(a, b)] };
        r * sd[a] * sd[b]
    });
    let mean_diag = covariance.diagonal().mean();
    let floor = RIDGE_FLOOR * if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let ridge = (floor - min_eigenvalue(&covariance)).max(0.0);
    for j in 0..d {
        covariance[(j, j)] += ridge;
    }
    Ok((
        Moments {
            mean: base.mean,
            covariance,
            ridge,
            constant_columns: base.constant_columns,
        },
        intensity,
    ))
}

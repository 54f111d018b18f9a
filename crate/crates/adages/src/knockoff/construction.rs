use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::moments::min_eigenvalue;
use super::KnockoffError;

/// Gaussian knockoff model: first two moments plus the diagonal `s`.
#[derive(Debug, Clone)]
pub struct KnockoffModel {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub s: DVector<f64>,
}

/// Tolerance used for the symmetry and PSD checks, relative to the scale of
/// the matrix involved.
const PSD_TOLERANCE: f64 = 1e-8;

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), KnockoffError> {
    if !m.is_square() {
        return Err(KnockoffError::Shape("covariance is not square".into()));
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > 1e-10 * m.abs().max().max(1.0) {
        return Err(KnockoffError::NotSymmetric(asym));
    }
    Ok(())
}

/// Equicorrelated knockoff diagonal: `min(1, 2 λ_min(corr Σ))` on the
/// correlation scale, mapped back by `diag(Σ)`.
pub fn equicorrelated_s(sigma: &DMatrix<f64>) -> Result<DVector<f64>, KnockoffError> {
    check_symmetric(sigma)?;
    if sigma.clone().cholesky().is_none() {
        return Err(KnockoffError::NotPositiveDefinite);
    }
    let d = sigma.nrows();
    let scale = DVector::from_fn(d, |j, _| sigma[(j, j)].sqrt());
    let corr = DMatrix::from_fn(d, d, |a, b| sigma[(a, b)] / (scale[a] * scale[b]));
    let lambda_min = min_eigenvalue(&corr);
    let level = (2.0 * lambda_min).clamp(0.0, 1.0);
    Ok(DVector::from_fn(d, |j, _| level * sigma[(j, j)]))
}

/// Precomputed pieces of the conditional law `X̃ | X`.
#[derive(Debug, Clone)]
pub struct ConditionalKnockoffLaw {
    /// `Σ⁻¹ diag(s)`; the conditional mean is `x − (x − μ) · shift`.
    pub shift: DMatrix<f64>,
    /// `2 diag(s) − diag(s) Σ⁻¹ diag(s)`.
    pub covariance: DMatrix<f64>,
    /// Right factor `L` with `Lᵀ L = covariance`.
    pub factor: DMatrix<f64>,
}

impl KnockoffModel {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, s: DVector<f64>) -> Result<Self, KnockoffError> {
        let d = mu.len();
        if sigma.shape() != (d, d) || s.len() != d {
            return Err(KnockoffError::Shape(format!(
                "mu has {d} entries, sigma is {:?}, s has {}",
                sigma.shape(),
                s.len()
            )));
        }
        check_symmetric(&sigma)?;
        if s.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(KnockoffError::Construction("s must be finite and nonnegative".into()));
        }
        Ok(KnockoffModel { mu, sigma, s })
    }

    pub fn dimension(&self) -> usize {
        self.mu.len()
    }

    /// Computes and validates the conditional knockoff covariance.
    pub fn conditional_law(&self) -> Result<ConditionalKnockoffLaw, KnockoffError> {
        let d = self.dimension();
        let chol = self
            .sigma
            .clone()
            .cholesky()
            .ok_or(KnockoffError::NotPositiveDefinite)?;
        let diag_s = DMatrix::from_diagonal(&self.s);
        let shift = chol.solve(&diag_s);
        let mut covariance = &diag_s * 2.0 - &diag_s * &shift;
        covariance = (&covariance + covariance.transpose()) * 0.5;

        let eigen = SymmetricEigen::new(covariance.clone());
        let scale = self.s.max().max(f64::MIN_POSITIVE);
        let lowest = eigen.eigenvalues.min();
        if lowest < -PSD_TOLERANCE * scale.max(1.0) {
            return Err(KnockoffError::Construction(format!(
                "conditional covariance has eigenvalue {lowest:.3e}"
            )));
        }
        // L = sqrt(Λ) Uᵀ, so Lᵀ L = U Λ Uᵀ.
        let roots = eigen.eigenvalues.map(|v| v.max(0.0).sqrt());
        let mut factor = eigen.eigenvectors.transpose();
        for (i, mut row) in factor.row_iter_mut().enumerate() {
            row *= roots[i];
        }
        debug_assert_eq!(factor.shape(), (d, d));
        Ok(ConditionalKnockoffLaw {
            shift,
            covariance,
            factor,
        })
    }
}

/// Draws second-order Gaussian knockoffs for every row of `x`.
///
/// Standard normals are consumed row by row, so output is a pure function
/// of the rng state.
pub fn sample_knockoffs<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    model: &KnockoffModel,
    rng: &mut R,
) -> Result<DMatrix<f64>, KnockoffError> {
    let (n, d) = x.shape();
    if d != model.dimension() {
        return Err(KnockoffError::Shape(format!(
            "X has {d} columns, model has dimension {}",
            model.dimension()
        )));
    }
    let law = model.conditional_law()?;
    let mut centered = x.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-model.mu[j]);
    }
    let mut z = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            z[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(x - centered * &law.shift + z * &law.factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn corr2(rho: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])
    }

    #[test]
    fn equicorrelated_identity() {
        let s = equicorrelated_s(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(s.as_slice(), &[1.0; 4]);
    }

    #[test]
    fn equicorrelated_two_by_two() {
        let s = equicorrelated_s(&corr2(0.5)).unwrap();
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let s = equicorrelated_s(&corr2(0.9)).unwrap();
        assert!(s.iter().all(|v| (v - 0.2).abs() < 1e-12), "{s}");
    }

    #[test]
    fn equicorrelated_scales_with_variance() {
        let sigma = DMatrix::from_row_slice(2, 2, &[4.0, 0.9 * 2.0 * 3.0, 0.9 * 2.0 * 3.0, 9.0]);
        let s = equicorrelated_s(&sigma).unwrap();
        assert!((s[0] - 0.8).abs() < 1e-10 && (s[1] - 1.8).abs() < 1e-10);
        let gap = &sigma * 2.0 - DMatrix::from_diagonal(&s);
        assert!(min_eigenvalue(&gap) > -1e-10);
    }

    #[test]
    fn equicorrelated_rejects_non_pd() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            equicorrelated_s(&bad),
            Err(KnockoffError::NotPositiveDefinite)
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(matches!(equicorrelated_s(&asym), Err(KnockoffError::NotSymmetric(_))));
    }

    #[test]
    fn zero_s_reproduces_x() {
        let mut rng = rng_from_seed(5);
        let x = DMatrix::from_fn(6, 3, |i, j| (i as f64 - 2.5) * (j as f64 + 1.0) + 0.3);
        let model = KnockoffModel::new(
            DVector::from_element(3, 0.1),
            DMatrix::identity(3, 3) * 2.0,
            DVector::zeros(3),
        )
        .unwrap();
        let xk = sample_knockoffs(&x, &model, &mut rng).unwrap();
        assert_eq!(xk, x);
    }

    #[test]
    fn identity_model_gives_independent_copies() {
        let mut rng = rng_from_seed(6);
        let n = 5000;
        let x = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let model = KnockoffModel::new(
            DVector::zeros(3),
            DMatrix::identity(3, 3),
            DVector::from_element(3, 1.0),
        )
        .unwrap();
        let xk = sample_knockoffs(&x, &model, &mut rng).unwrap();
        for j in 0..3 {
            let (a, b) = (x.column(j), xk.column(j));
            let (ma, mb) = (a.mean(), b.mean());
            let cov: f64 = a.iter().zip(b.iter()).map(|(u, v)| (u - ma) * (v - mb)).sum();
            let va: f64 = a.iter().map(|u| (u - ma).powi(2)).sum();
            let vb: f64 = b.iter().map(|v| (v - mb).powi(2)).sum();
            assert!((cov / (va * vb).sqrt()).abs() < 0.05);
            assert!(mb.abs() < 0.05);
            assert!((vb / n as f64 - 1.0).abs() < 0.06);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let x = DMatrix::from_fn(10, 4, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let sigma = crate::datagen::ar1_covariance(4, 0.25);
        let s = equicorrelated_s(&sigma).unwrap();
        let model = KnockoffModel::new(DVector::zeros(4), sigma, s).unwrap();
        let a = sample_knockoffs(&x, &model, &mut rng_from_seed(11)).unwrap();
        let b = sample_knockoffs(&x, &model, &mut rng_from_seed(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conditional_covariance_psd_and_factored() {
        let sigma = crate::datagen::ar1_covariance(6, 0.6);
        let s = equicorrelated_s(&sigma).unwrap();
        let model = KnockoffModel::new(DVector::zeros(6), sigma, s).unwrap();
        let law = model.conditional_law().unwrap();
        assert!(min_eigenvalue(&law.covariance) > -1e-10);
        let rebuilt = law.factor.tr_mul(&law.factor);
        assert!((&rebuilt - &law.covariance).abs().max() < 1e-10);
    }

    #[test]
    fn oversized_s_is_rejected() {
        let model = KnockoffModel::new(
            DVector::zeros(2),
            DMatrix::identity(2, 2),
            DVector::from_element(2, 3.0),
        )
        .unwrap();
        assert!(matches!(model.conditional_law(), Err(KnockoffError::Construction(_))));
    }
}

//! Lasso by cyclic coordinate descent on a standardized design.
//!
//! The objective is `(1/2n)‖y − Zβ‖² + λ‖β‖₁` where `Z` has centered,
//! unit-variance columns and `y` is centered. Updates work on the Gram
//! matrix `ZᵀZ/n`, so each coordinate step costs `O(p)` rather than `O(n)`.

use nalgebra::{DMatrix, DVector};

use super::KnockoffError;

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaGrid {
    /// `count` log-spaced values from the smallest penalty that zeroes every
    /// coefficient down to `min_ratio` times that value.
    Auto { count: usize, min_ratio: f64 },
    /// Explicit strictly decreasing penalties on the standardized scale.
    Explicit(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto {
            count: 40,
            min_ratio: 1e-3,
        }
    }
}

/// How the penalty is picked from the cross-validation curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CvRule {
    /// Smallest mean error.
    #[default]
    Min,
    /// Largest penalty within one standard error of the minimum.
    OneSe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSettings {
    pub grid: LambdaGrid,
    pub folds: usize,
    pub rule: CvRule,
    /// Converged once no coefficient moves more than this in a full sweep.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for LassoSettings {
    fn default() -> Self {
        LassoSettings {
            grid: LambdaGrid::default(),
            folds: 5,
            rule: CvRule::default(),
            tolerance: 1e-7,
            max_sweeps: 10_000,
        }
    }
}

/// Knockoff statistics `W_j = |β̂_j| − |β̂_{j+d}|`.
#[derive(Debug, Clone, PartialEq)]
pub struct WStats {
    pub w: Vec<f64>,
    pub lambda_used: f64,
}

/// Coefficients along a penalty path, possibly cut short.
#[derive(Debug, Clone)]
pub struct PathFit {
    pub betas: Vec<DVector<f64>>,
    pub failure: Option<KnockoffError>,
}

/// Least-squares data reduced to Gram form after standardization.
#[derive(Debug, Clone)]
pub struct StandardizedProblem {
    n: usize,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    means: DVector<f64>,
    scales: DVector<f64>,
    y_mean: f64,
    // false for constant columns, which stay at zero
    active: Vec<bool>,
}

fn soft_threshold(value: f64, lambda: f64) -> f64 {
    if value > lambda {
        value - lambda
    } else if value < -lambda {
        value + lambda
    } else {
        0.0
    }
}

impl StandardizedProblem {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self, KnockoffError> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(KnockoffError::Shape(format!("X has {n} rows, y has {}", y.len())));
        }
        if n < 2 {
            return Err(KnockoffError::TooFewRows(n));
        }
        let nf = n as f64;
        let means = DVector::from_fn(p, |j, _| x.column(j).sum() / nf);
        let mut z = x.clone();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            col.add_scalar_mut(-means[j]);
        }
        let y_mean = y.sum() / nf;
        let yc = y.add_scalar(-y_mean);

        let mut gram = z.tr_mul(&z) / nf;
        let mut xty = z.tr_mul(&yc) / nf;
        let mut scales = DVector::zeros(p);
        let mut active = vec![false; p];
        for j in 0..p {
            let var = gram[(j, j)];
            if var > 1e-12 * (1.0 + means[j].abs()).powi(2) {
                scales[j] = var.sqrt();
                active[j] = true;
            }
        }
        for a in 0..p {
            for b in 0..p {
                gram[(a, b)] = if active[a] && active[b] {
                    gram[(a, b)] / (scales[a] * scales[b])
                } else {
                    0.0
                };
            }
            xty[a] = if active[a] { xty[a] / scales[a] } else { 0.0 };
        }
        Ok(StandardizedProblem {
            n,
            gram,
            xty,
            yty: yc.norm_squared() / nf,
            means,
            scales,
            y_mean,
            active,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.xty.len()
    }

    /// Smallest penalty at which the all-zero solution is optimal.
    pub fn lambda_max(&self) -> f64 {
        self.xty.amax()
    }

    pub fn objective(&self, beta: &DVector<f64>, lambda: f64) -> f64 {
        let quad = beta.dot(&(&self.gram * beta));
        0.5 * self.yty - self.xty.dot(beta) + 0.5 * quad + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Largest violation of the Lasso optimality conditions.
    pub fn kkt_violation(&self, beta: &DVector<f64>, lambda: f64) -> f64 {
        let residual_corr = &self.xty - &self.gram * beta;
        (0..self.dimension())
            .filter(|&j| self.active[j])
            .map(|j| {
                let g = residual_corr[j];
                if beta[j] != 0.0 {
                    (g - lambda * beta[j].signum()).abs()
                } else {
                    (g.abs() - lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    fn sweep(&self, coords: &[usize], beta: &mut DVector<f64>, residual_corr: &mut DVector<f64>, lambda: f64) -> f64 {
        let mut max_change: f64 = 0.0;
        for &j in coords {
            let old = beta[j];
            let new = soft_threshold(residual_corr[j] + old, lambda);
            let delta = new - old;
            if delta != 0.0 {
                residual_corr.axpy(-delta, &self.gram.column(j), 1.0);
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    /// Exact minimizer on the current sign pattern, approached as far as the
    /// signs stay fixed. On that orthant face the objective is a plain
    /// quadratic, so the step never increases it.
    fn polish(&self, beta: &mut DVector<f64>, residual_corr: &mut DVector<f64>, lambda: f64) -> bool {
        let support: Vec<usize> = (0..self.dimension()).filter(|&j| beta[j] != 0.0).collect();
        if support.is_empty() {
            return false;
        }
        let m = support.len();
        let block = DMatrix::from_fn(m, m, |a, b| self.gram[(support[a], support[b])]);
        let rhs = DVector::from_fn(m, |a, _| {
            let j = support[a];
            self.xty[j] - lambda * beta[j].signum()
        });
        let target = match block.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            // collinear support: minimum-norm solution, kept only if it helps
            None => match block.pseudo_inverse(1e-10 * self.gram.diagonal().max().max(1.0)) {
                Ok(pinv) => pinv * &rhs,
                Err(_) => return false,
            },
        };
        if target.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let before = self.objective(beta, lambda);
        let saved = beta.clone();
        let mut step: f64 = 1.0;
        let mut blocking = None;
        for (a, &j) in support.iter().enumerate() {
            if target[a] * beta[j].signum() <= 0.0 {
                let t = beta[j] / (beta[j] - target[a]);
                if t < step {
                    step = t;
                    blocking = Some(j);
                }
            }
        }
        for (a, &j) in support.iter().enumerate() {
            beta[j] += step * (target[a] - beta[j]);
        }
        if let Some(j) = blocking {
            beta[j] = 0.0;
        }
        if self.objective(beta, lambda) > before {
            *beta = saved;
            return false;
        }
        *residual_corr = &self.xty - &self.gram * &*beta;
        true
    }

    /// Solves at one penalty, starting from `beta`. Returns the number of
    /// coordinate sweeps used; `on_sweep` sees every intermediate iterate.
    ///
    /// Full sweeps alternate with sweeps over the current support. When the
    /// support phase stalls (near-duplicate columns make plain coordinate
    /// descent crawl), an exact solve on the support is attempted.
    pub fn solve_traced<F>(
        &self,
        lambda: f64,
        beta: &mut DVector<f64>,
        tolerance: f64,
        max_sweeps: usize,
        mut on_sweep: F,
    ) -> Result<usize, KnockoffError>
    where
        F: FnMut(&DVector<f64>),
    {
        const POLISH_EVERY: usize = 20;
        let all: Vec<usize> = (0..self.dimension()).filter(|&j| self.active[j]).collect();
        let mut residual_corr = &self.xty - &self.gram * &*beta;
        let mut sweeps = 0;
        let mut last_change = f64::INFINITY;
        while sweeps < max_sweeps {
            last_change = self.sweep(&all, beta, &mut residual_corr, lambda);
            sweeps += 1;
            on_sweep(beta);
            if last_change < tolerance {
                return Ok(sweeps);
            }
            let support: Vec<usize> = all.iter().copied().filter(|&j| beta[j] != 0.0).collect();
            let mut inner = 0;
            while sweeps < max_sweeps {
                let change = self.sweep(&support, beta, &mut residual_corr, lambda);
                sweeps += 1;
                inner += 1;
                on_sweep(beta);
                if change < tolerance {
                    break;
                }
                if inner % POLISH_EVERY == 0 && self.polish(beta, &mut residual_corr, lambda) {
                    on_sweep(beta);
                }
            }
        }
        Err(KnockoffError::NotConverged {
            sweeps,
            max_change: last_change,
        })
    }

    pub fn solve(
        &self,
        lambda: f64,
        beta: &mut DVector<f64>,
        tolerance: f64,
        max_sweeps: usize,
    ) -> Result<usize, KnockoffError> {
        self.solve_traced(lambda, beta, tolerance, max_sweeps, |_| {})
    }

    /// Fraction of the centered response variance explained by `beta`.
    pub fn explained_deviance(&self, beta: &DVector<f64>) -> f64 {
        if self.yty <= 0.0 {
            return 1.0;
        }
        1.0 - 2.0 * self.objective(beta, 0.0) / self.yty
    }

    /// Fits a decreasing path with warm starts.
    pub fn path(&self, lambdas: &[f64], tolerance: f64, max_sweeps: usize) -> Result<Vec<DVector<f64>>, KnockoffError> {
        let fit = self.partial_path(lambdas, tolerance, max_sweeps, false);
        match fit.failure {
            Some(err) => Err(err),
            None => Ok(fit.betas),
        }
    }

    /// Like [`path`](Self::path) but keeps what was fitted before a
    /// failure. With `stop_when_saturated`, the path ends once the fit
    /// explains 99.9% of the variance or stops improving by 1e-5 (checked
    /// from the fifth penalty on).
    pub fn partial_path(
        &self,
        lambdas: &[f64],
        tolerance: f64,
        max_sweeps: usize,
        stop_when_saturated: bool,
    ) -> PathFit {
        let mut beta = DVector::zeros(self.dimension());
        let mut betas = Vec::with_capacity(lambdas.len());
        let mut previous = 0.0;
        for (i, &lambda) in lambdas.iter().enumerate() {
            if let Err(err) = self.solve(lambda, &mut beta, tolerance, max_sweeps) {
                return PathFit {
                    betas,
                    failure: Some(err),
                };
            }
            betas.push(beta.clone());
            let explained = self.explained_deviance(&beta);
            if stop_when_saturated && i >= 4 && (explained >= 0.999 || explained - previous < 1e-5) {
                break;
            }
            previous = explained;
        }
        PathFit { betas, failure: None }
    }

    /// Predictions on the original scale for raw rows `x`.
    pub fn predict(&self, x: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
        let coef = DVector::from_fn(self.dimension(), |j, _| {
            if self.active[j] {
                beta[j] / self.scales[j]
            } else {
                0.0
            }
        });
        let offset = self.y_mean - self.means.dot(&coef);
        (x * coef).add_scalar(offset)
    }
}

/// Smallest `min_ratio` used by the automatic grid when `n < p`.
pub const WIDE_MIN_RATIO: f64 = 1e-2;

fn log_grid(lambda_max: f64, count: usize, min_ratio: f64) -> Vec<f64> {
    if count == 1 {
        return vec![lambda_max];
    }
    let lo = (lambda_max * min_ratio).ln();
    let hi = lambda_max.ln();
    (0..count)
        .map(|i| (hi + (lo - hi) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

fn resolve_grid(grid: &LambdaGrid, problem: &StandardizedProblem) -> Result<Vec<f64>, KnockoffError> {
    match grid {
        LambdaGrid::Auto { count, min_ratio } => {
            if *count == 0 || !(*min_ratio > 0.0 && *min_ratio < 1.0) {
                return Err(KnockoffError::InvalidGrid);
            }
            let lambda_max = problem.lambda_max();
            if lambda_max <= 0.0 {
                // y is constant: every penalty yields the zero fit
                return Ok(vec![0.0]);
            }
            // with more columns than rows the tail of the path interpolates
            let floor = if problem.n() < problem.dimension() {
                WIDE_MIN_RATIO
            } else {
                0.0
            };
            Ok(log_grid(lambda_max, *count, min_ratio.max(floor)))
        }
        LambdaGrid::Explicit(values) => {
            let decreasing = values.windows(2).all(|w| w[0] > w[1]);
            if values.is_empty() || !decreasing || values.iter().any(|v| v.is_nan() || *v < 0.0) {
                return Err(KnockoffError::InvalidGrid);
            }
            Ok(values.clone())
        }
    }
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    x.select_rows(rows.iter())
}

fn select_entries(y: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]))
}

/// Fold of row `i` under the fixed assignment `i mod folds`.
pub fn fold_of(row: usize, folds: usize) -> usize {
    row % folds
}

/// Cross-validation curve: mean squared prediction error per penalty and
/// its standard error across folds.
#[derive(Debug, Clone, PartialEq)]
pub struct CvCurve {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

impl CvCurve {
    /// Index of the chosen penalty; ties go to the larger penalty.
    pub fn choose(&self, rule: CvRule) -> usize {
        let best = self
            .mean
            .iter()
            .enumerate()
            .fold(0, |best, (i, &e)| if e < self.mean[best] { i } else { best });
        match rule {
            CvRule::Min => best,
            CvRule::OneSe => {
                let cap = self.mean[best] + self.se[best];
                self.mean.iter().position(|&e| e <= cap).unwrap_or(best)
            }
        }
    }
}

/// Cross-validated prediction error for every penalty in `lambdas`.
///
/// A fold whose path fails to converge at some penalty cuts the result
/// short: only penalties every fold could fit are scored.
pub fn cv_curve(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    lambdas: &[f64],
    settings: &LassoSettings,
) -> Result<CvCurve, KnockoffError> {
    let n = design.nrows();
    let folds = settings.folds.min(n / 2).max(2);
    let mut usable = lambdas.len();
    // (fold size, squared error per penalty)
    let mut per_fold: Vec<(usize, Vec<f64>)> = Vec::with_capacity(folds);
    for fold in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of(i, folds) == fold);
        if test.is_empty() || train.len() < 2 {
            continue;
        }
        let problem = StandardizedProblem::new(&select_rows(design, &train), &select_entries(y, &train))?;
        let test_x = select_rows(design, &test);
        let test_y = select_entries(y, &test);
        let fit = problem.partial_path(&lambdas[..usable], settings.tolerance, settings.max_sweeps, false);
        if fit.betas.is_empty() {
            return Err(fit.failure.expect("empty path without failure"));
        }
        usable = fit.betas.len();
        let sse = fit
            .betas
            .iter()
            .map(|beta| (problem.predict(&test_x, beta) - &test_y).norm_squared())
            .collect();
        per_fold.push((test.len(), sse));
    }
    let total: usize = per_fold.iter().map(|(size, _)| size).sum();
    let used = per_fold.len();
    let mut curve = CvCurve {
        mean: Vec::with_capacity(usable),
        se: Vec::with_capacity(usable),
    };
    for i in 0..usable {
        let mean = per_fold.iter().map(|(_, sse)| sse[i]).sum::<f64>() / total as f64;
        let spread = per_fold
            .iter()
            .map(|(size, sse)| *size as f64 * (sse[i] / *size as f64 - mean).powi(2))
            .sum::<f64>()
            / total as f64;
        curve.mean.push(mean);
        curve.se.push((spread / (used.max(2) - 1) as f64).sqrt());
    }
    Ok(curve)
}

/// Mean cross-validated error per penalty; see [`cv_curve`].
pub fn cv_errors(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    lambdas: &[f64],
    settings: &LassoSettings,
) -> Result<Vec<f64>, KnockoffError> {
    Ok(cv_curve(design, y, lambdas, settings)?.mean)
}

fn augmented(x: &DMatrix<f64>, x_tilde: &DMatrix<f64>) -> Result<DMatrix<f64>, KnockoffError> {
    if x.shape() != x_tilde.shape() {
        return Err(KnockoffError::Shape(format!(
            "X is {:?} but knockoffs are {:?}",
            x.shape(),
            x_tilde.shape()
        )));
    }
    let (n, d) = x.shape();
    let mut design = DMatrix::zeros(n, 2 * d);
    design.columns_mut(0, d).copy_from(x);
    design.columns_mut(d, d).copy_from(x_tilde);
    Ok(design)
}

fn coefficient_difference(beta: &DVector<f64>, d: usize) -> Vec<f64> {
    (0..d).map(|j| beta[j].abs() - beta[j + d].abs()).collect()
}

/// Lasso coefficient-difference statistics at a cross-validated penalty.
pub fn lasso_w_stats(
    x: &DMatrix<f64>,
    x_tilde: &DMatrix<f64>,
    y: &DVector<f64>,
    settings: &LassoSettings,
) -> Result<WStats, KnockoffError> {
    let design = augmented(x, x_tilde)?;
    let problem = StandardizedProblem::new(&design, y)?;
    let mut lambdas = resolve_grid(&settings.grid, &problem)?;
    // the full-data path decides how far the grid is worth exploring
    let auto = matches!(settings.grid, LambdaGrid::Auto { .. });
    let full = problem.partial_path(&lambdas, settings.tolerance, settings.max_sweeps, auto);
    if let Some(err) = full.failure {
        return Err(err);
    }
    lambdas.truncate(full.betas.len());
    let best = if lambdas.len() > 1 {
        cv_curve(&design, y, &lambdas, settings)?.choose(settings.rule)
    } else {
        0
    };
    Ok(WStats {
        w: coefficient_difference(&full.betas[best], x.ncols()),
        lambda_used: lambdas[best],
    })
}

/// Statistics at a fixed penalty, bypassing cross-validation.
pub fn lasso_w_stats_at(
    x: &DMatrix<f64>,
    x_tilde: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    settings: &LassoSettings,
) -> Result<WStats, KnockoffError> {
    let design = augmented(x, x_tilde)?;
    let problem = StandardizedProblem::new(&design, y)?;
    let mut beta = DVector::zeros(problem.dimension());
    problem.solve(lambda, &mut beta, settings.tolerance, settings.max_sweeps)?;
    Ok(WStats {
        w: coefficient_difference(&beta, x.ncols()),
        lambda_used: lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::ar1_design;
    use crate::seed::rng_from_seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn regression(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = rng_from_seed(seed);
        let x = ar1_design(n, p, 0.3, &mut rng);
        let mut beta = DVector::zeros(p);
        beta[0] = 2.0;
        beta[2] = -1.5;
        let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &x * beta + noise;
        (x, y)
    }

    // Naive O(np) coordinate descent on explicitly standardized data.
    fn reference_lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
        let (n, p) = x.shape();
        let nf = n as f64;
        let mut z = x.clone();
        for mut col in z.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
            let sd = (col.norm_squared() / nf).sqrt();
            col /= sd;
        }
        let yc = y.add_scalar(-y.mean());
        let mut beta = DVector::zeros(p);
        for _ in 0..5000 {
            for j in 0..p {
                let r = &yc - &z * &beta;
                let rho = z.column(j).dot(&r) / nf + beta[j];
                beta[j] = soft_threshold(rho, lambda);
            }
        }
        beta
    }

    #[test]
    fn matches_naive_descent() {
        let (x, y) = regression(80, 6, 1);
        let problem = StandardizedProblem::new(&x, &y).unwrap();
        for lambda in [0.5, 0.1, 0.01] {
            let mut beta = DVector::zeros(6);
            problem.solve(lambda, &mut beta, 1e-10, 10_000).unwrap();
            let expected = reference_lasso(&x, &y, lambda);
            assert!((&beta - &expected).amax() < 1e-6, "lambda {lambda}");
        }
    }

    #[test]
    fn zero_response_gives_zero_stats() {
        let (x, _) = regression(60, 4, 2);
        let xk = ar1_design(60, 4, 0.3, &mut rng_from_seed(3));
        let y = DVector::zeros(60);
        let w = lasso_w_stats(&x, &xk, &y, &LassoSettings::default()).unwrap();
        assert!(w.w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lambda_max_zeroes_everything() {
        let (x, y) = regression(50, 5, 4);
        let problem = StandardizedProblem::new(&x, &y).unwrap();
        let mut beta = DVector::zeros(5);
        problem.solve(problem.lambda_max(), &mut beta, 1e-7, 100).unwrap();
        assert!(beta.iter().all(|&b| b == 0.0));
        problem.solve(0.9 * problem.lambda_max(), &mut beta, 1e-7, 100).unwrap();
        assert!(beta.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn objective_nonincreasing_and_kkt() {
        let (x, y) = regression(120, 30, 5);
        let problem = StandardizedProblem::new(&x, &y).unwrap();
        for lambda in [0.3, 0.05, 0.005] {
            let mut beta = DVector::zeros(30);
            let mut trace = vec![problem.objective(&beta, lambda)];
            problem
                .solve_traced(lambda, &mut beta, 1e-7, 10_000, |b| {
                    trace.push(problem.objective(b, lambda))
                })
                .unwrap();
            for pair in trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "objective rose: {pair:?}");
            }
            assert!(problem.kkt_violation(&beta, lambda) <= 1e-5);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let (x, y) = regression(40, 10, 6);
        let problem = StandardizedProblem::new(&x, &y).unwrap();
        let mut beta = DVector::zeros(10);
        let err = problem.solve(1e-4, &mut beta, 1e-14, 2).unwrap_err();
        assert!(matches!(err, KnockoffError::NotConverged { sweeps: 2, max_change } if max_change > 0.0));
    }

    #[test]
    fn constant_column_stays_zero() {
        let (mut x, y) = regression(40, 4, 7);
        x.column_mut(1).fill(3.0);
        let problem = StandardizedProblem::new(&x, &y).unwrap();
        let mut beta = DVector::zeros(4);
        problem.solve(0.01, &mut beta, 1e-7, 10_000).unwrap();
        assert_eq!(beta[1], 0.0);
    }

    #[test]
    fn grid_validation() {
        let (x, y) = regression(30, 3, 8);
        let bad = LassoSettings {
            grid: LambdaGrid::Explicit(vec![0.1, 0.2]),
            ..LassoSettings::default()
        };
        assert!(matches!(
            lasso_w_stats(&x, &x, &y, &bad),
            Err(KnockoffError::InvalidGrid)
        ));
        let empty = LassoSettings {
            grid: LambdaGrid::Explicit(vec![]),
            ..LassoSettings::default()
        };
        assert!(lasso_w_stats(&x, &x, &y, &empty).is_err());
    }

    #[test]
    fn cv_prefers_moderate_penalty() {
        let (x, y) = regression(200, 8, 9);
        let problem = StandardizedProblem::new(&x, &y).unwrap();
        let lambdas = log_grid(problem.lambda_max(), 20, 1e-3);
        let errors = cv_errors(&x, &y, &lambdas, &LassoSettings::default()).unwrap();
        // the null model is far worse than the fitted ones
        let best = errors.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(errors[0] > 2.0 * best);
    }

    #[test]
    fn near_duplicate_columns_converge() {
        let (x, y) = regression(60, 30, 21);
        let mut rng = rng_from_seed(22);
        let mut design = DMatrix::zeros(60, 60);
        design.columns_mut(0, 30).copy_from(&x);
        let jitter = DMatrix::from_fn(60, 30, |_, _| 1e-4 * rng.sample::<f64, _>(StandardNormal));
        design.columns_mut(30, 30).copy_from(&(&x + jitter));
        let problem = StandardizedProblem::new(&design, &y).unwrap();
        let lambdas = log_grid(problem.lambda_max(), 30, 1e-2);
        let mut last = f64::INFINITY;
        let mut beta = DVector::zeros(60);
        for &lambda in &lambdas {
            problem
                .solve_traced(lambda, &mut beta, 1e-7, 10_000, |b| {
                    let now = problem.objective(b, lambda);
                    assert!(now <= last + 1e-12);
                    last = now;
                })
                .unwrap();
            assert!(problem.kkt_violation(&beta, lambda) <= 1e-5);
            last = f64::INFINITY;
        }
    }

    #[test]
    fn cv_rules_pick_expected_index() {
        let curve = CvCurve {
            mean: vec![5.0, 2.0, 1.2, 1.0, 1.0, 1.1],
            se: vec![0.5, 0.3, 0.2, 0.25, 0.1, 0.1],
        };
        assert_eq!(curve.choose(CvRule::Min), 3);
        assert_eq!(curve.choose(CvRule::OneSe), 2);
    }
}

//! Synthetic sparse linear models with AR(1) Gaussian designs.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knockoff::DatasetShard;
use crate::selection::SelectionSet;

#[derive(Debug, Error)]
pub enum DataGenError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("cannot split {n} rows across {k} machines")]
    TooManyMachines { n: usize, k: usize },
    #[error("row count mismatch: X has {x_rows}, y has {y_len}")]
    ShapeMismatch { x_rows: usize, y_len: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn default_amplitude() -> f64 {
    2.0
}

/// `y = Xβ + ε` with rows of `X` drawn from `N(0, Σ)`, `Σ_ls = ρ^|l-s|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModelSpec {
    pub n: usize,
    pub d: usize,
    /// Number of nonzero coefficients.
    pub s: usize,
    pub rho: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

impl LinearModelSpec {
    pub fn validate(&self) -> Result<(), DataGenError> {
        let bad = |msg: String| Err(DataGenError::InvalidSpec(msg));
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if self.d == 0 || self.s == 0 || self.s > self.d {
            return bad(format!("need 1 <= s <= d, got s={} d={}", self.s, self.d));
        }
        if self.k == 0 || self.n < self.k {
            return bad(format!("need 1 <= k <= n, got k={} n={}", self.k, self.n));
        }
        if !self.amplitude.is_finite() || self.amplitude <= 0.0 {
            return bad(format!("amplitude must be positive, got {}", self.amplitude));
        }
        Ok(())
    }
}

/// True coefficients and their support.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub beta: DVector<f64>,
    pub support: SelectionSet,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub truth: GroundTruth,
}

/// Draws an `n × d` AR(1) design through the recursion
/// `x_l = ρ x_{l-1} + sqrt(1-ρ²) z_l`.
pub fn ar1_design<R: Rng + ?Sized>(n: usize, d: usize, rho: f64, rng: &mut R) -> DMatrix<f64> {
    let innovation = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        let mut prev: f64 = rng.sample(StandardNormal);
        x[(i, 0)] = prev;
        for l in 1..d {
            let z: f64 = rng.sample(StandardNormal);
            prev = rho * prev + innovation * z;
            x[(i, l)] = prev;
        }
    }
    x
}

/// Exact AR(1) covariance `ρ^|l-s|`.
pub fn ar1_covariance(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |l, s| rho.powi(l.abs_diff(s) as i32))
}

/// Uniform support of size `s` with signs drawn independently.
pub fn draw_truth<R: Rng + ?Sized>(
    d: usize,
    s: usize,
    amplitude: f64,
    rng: &mut R,
) -> Result<GroundTruth, DataGenError> {
    if s == 0 || s > d {
        return Err(DataGenError::InvalidSpec(format!("need 1 <= s <= d, got s={s} d={d}")));
    }
    let mut beta = DVector::zeros(d);
    let positions = sample(rng, d, s).into_vec();
    for &j in &positions {
        beta[j] = if rng.random::<bool>() { amplitude } else { -amplitude };
    }
    let support = SelectionSet::new(d, positions).expect("positions < d");
    Ok(GroundTruth { beta, support })
}

/// Generates one full dataset and its ground truth.
pub fn gen_instance<R: Rng + ?Sized>(spec: &LinearModelSpec, rng: &mut R) -> Result<Instance, DataGenError> {
    spec.validate()?;
    let truth = draw_truth(spec.d, spec.s, spec.amplitude, rng)?;
    let x = ar1_design(spec.n, spec.d, spec.rho, rng);
    let noise = DVector::from_fn(spec.n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = &x * &truth.beta + noise;
    Ok(Instance { x, y, truth })
}

/// Row counts for `k` contiguous shards of `n` rows; the first `n mod k`
/// shards get one extra row.
pub fn shard_sizes(n: usize, k: usize) -> Result<Vec<usize>, DataGenError> {
    if k == 0 || k > n {
        return Err(DataGenError::TooManyMachines { n, k });
    }
    let base = n / k;
    let extra = n % k;
    Ok((0..k).map(|i| base + usize::from(i < extra)).collect())
}

/// Splits rows into `k` disjoint contiguous shards.
pub fn partition(x: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Result<Vec<DatasetShard>, DataGenError> {
    if x.nrows() != y.len() {
        return Err(DataGenError::ShapeMismatch {
            x_rows: x.nrows(),
            y_len: y.len(),
        });
    }
    let sizes = shard_sizes(x.nrows(), k)?;
    let mut start = 0;
    let shards = sizes
        .into_iter()
        .enumerate()
        .map(|(machine_id, len)| {
            let shard = DatasetShard {
                x: x.rows(start, len).into_owned(),
                y: y.rows(start, len).into_owned(),
                machine_id,
                row_offset: start,
            };
            start += len;
            shard
        })
        .collect();
    Ok(shards)
}

/// Writes `x0,...,x{d-1},y` with one row per observation.
pub fn write_instance_csv<W: Write>(writer: W, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(), DataGenError> {
    if x.nrows() != y.len() {
        return Err(DataGenError::ShapeMismatch {
            x_rows: x.nrows(),
            y_len: y.len(),
        });
    }
    let mut out = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    out.write_record(&header)?;
    for i in 0..x.nrows() {
        let mut row: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        row.push(y[i].to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

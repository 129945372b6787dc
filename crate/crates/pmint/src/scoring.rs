//! Seeded Gaussian sampling and energy-score evaluation.
//!
//! The energy score of a predictive distribution `F` against the
//! realized vector `y`, estimated from `k` samples `x_1..x_k` of `F`:
//!
//! ```text
//! ES = (1/k) sum_i ||x_i - y||  -  (1/(2 k^2)) sum_i sum_j ||x_i - x_j||
//! ```
//!
//! Lower is better. The pairwise sum runs over all ordered pairs,
//! including the zero `i = j` terms; the implementation reuses each
//! pairwise norm for its mirror pair but accumulates in plain row-major
//! order, so it matches the naive O(k^2) double loop bit for bit.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::reconcile::{Method, ReconciledDistribution};

/// One scored (method, horizon) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    /// Method that produced the distribution.
    pub method: Method,
    /// Forecast horizon.
    pub h: usize,
    /// Energy score (lower is better).
    pub energy_score: f64,
    /// Number of Monte Carlo samples.
    pub k: usize,
    /// Seed the samples were drawn with.
    pub seed: u64,
}

/// Lower-triangular factor `L` with `L L' = cov` for a symmetric PSD
/// matrix, rank-deficiency handled by zeroing columns whose pivot
/// vanishes. Pivots more negative than tolerance are an error.
fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = cov.nrows();
    let scale = (0..m).fold(0.0f64, |acc, i| acc.max(cov[(i, i)].abs()));
    let zero_tol = 1e-10 * scale;
    let neg_tol = 1e-8 * scale;
    let mut l = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut d = cov[(j, j)];
        for t in 0..j {
            d -= l[(j, t)] * l[(j, t)];
        }
        if d > zero_tol {
            let pivot = d.sqrt();
            l[(j, j)] = pivot;
            for i in (j + 1)..m {
                let mut v = cov[(i, j)];
                for t in 0..j {
                    v -= l[(i, t)] * l[(j, t)];
                }
                l[(i, j)] = v / pivot;
            }
        } else if d >= -neg_tol {
            // Zero pivot: the column lies in the span of earlier ones.
        } else {
            return Err(Error::NotPositiveSemiDefinite {
                what: "sampling covariance".into(),
                eigenvalue: d,
            });
        }
    }
    Ok(l)
}

/// Draws `k` samples `x_i = mean + L z_i` with `z_i` standard normal from
/// a ChaCha stream seeded by `seed`. Same seed, same samples.
pub fn sample_gaussian(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    k: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let m = mean.len();
    if cov.nrows() != m || cov.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: format!("{m}x{m} covariance"),
            actual: format!("{}x{}", cov.nrows(), cov.ncols()),
        });
    }
    if k == 0 {
        return Err(Error::DimensionMismatch {
            expected: "k >= 1".into(),
            actual: "0".into(),
        });
    }
    let l = psd_factor(cov)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut samples = DMatrix::zeros(k, m);
    let mut z = DVector::zeros(m);
    for i in 0..k {
        for c in 0..m {
            z[c] = StandardNormal.sample(&mut rng);
        }
        let x = mean + &l * &z;
        for c in 0..m {
            samples[(i, c)] = x[c];
        }
    }
    Ok(samples)
}

fn euclid(a: &DMatrix<f64>, i: usize, j: usize, y: Option<&DVector<f64>>) -> f64 {
    let m = a.ncols();
    let mut acc = 0.0;
    for c in 0..m {
        let d = match y {
            Some(y) => a[(i, c)] - y[c],
            None => a[(i, c)] - a[(j, c)],
        };
        acc += d * d;
    }
    acc.sqrt()
}

/// Energy score of a sample matrix (`k x m`, one sample per row) against
/// the observation `y`.
pub fn energy_score(samples: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let k = samples.nrows();
    let m = samples.ncols();
    if k == 0 {
        return Err(Error::DimensionMismatch {
            expected: "at least one sample".into(),
            actual: "0".into(),
        });
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: format!("observation of length {m}"),
            actual: format!("{}", y.len()),
        });
    }

    let mut sum_obs = 0.0;
    for i in 0..k {
        sum_obs += euclid(samples, i, i, Some(y));
    }

    // Pairwise norms are symmetric bit for bit, so compute each once and
    // mirror; the accumulation below stays in naive row-major order.
    let mut dist = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let v = euclid(samples, i, j, None);
            dist[(i, j)] = v;
            dist[(j, i)] = v;
        }
    }
    let mut sum_pair = 0.0;
    for i in 0..k {
        for j in 0..k {
            sum_pair += dist[(i, j)];
        }
    }

    let kf = k as f64;
    Ok(sum_obs / kf - sum_pair / (2.0 * kf * kf))
}

/// Samples the full-hierarchy distribution and scores it against `y`.
/// Deterministic for a fixed seed.
pub fn energy_score_gaussian(
    dist: &ReconciledDistribution,
    y: &DVector<f64>,
    k: usize,
    seed: u64,
) -> Result<ScoreReport> {
    let samples = sample_gaussian(&dist.full_mean, &dist.full_cov, k, seed)?;
    let energy_score = energy_score(&samples, y)?;
    Ok(ScoreReport {
        method: dist.method,
        h: dist.h,
        energy_score,
        k,
        seed,
    })
}

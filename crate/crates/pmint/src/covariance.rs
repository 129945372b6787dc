//! Covariance estimation from one-step residuals.
//!
//! All predictive covariances in this crate derive from a single matrix:
//! the shrinkage covariance `W_1` of the one-step in-sample residuals
//! (convention: actual - forecast) of every series in the hierarchy.
//! `W_1` is then partitioned into the bottom block `Sigma_b1`, the
//! upper-noise block `Sigma_u1` and the cross block `M_1`, and scaled to
//! horizon `h` through the `k_h` convention `W_h = k_h W_1`.
//!
//! Sign convention for `M_1`: the upper-forecast noise is defined as
//! `eps_u = U_hat - A B`, so for coherent training data the sampled noise
//! is the *negated* upper residual and `M_1 = Cov(B, eps_u) = -Cov(e_b, e_u)`.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Horizon scaling convention for `W_h = k_h W_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KhMode {
    /// `k_h = 1`: variance held fixed across horizons.
    One,
    /// `k_h = h`: variance grows linearly with the horizon.
    H,
}

impl KhMode {
    /// The scalar `k_h` for horizon `h >= 1`.
    pub fn kh(self, h: usize) -> f64 {
        match self {
            KhMode::One => 1.0,
            KhMode::H => h as f64,
        }
    }
}

impl std::str::FromStr for KhMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "one" => Ok(KhMode::One),
            "h" => Ok(KhMode::H),
            other => Err(format!("unknown k_h mode '{other}' (expected 'one' or 'h')")),
        }
    }
}

impl std::fmt::Display for KhMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KhMode::One => write!(f, "one"),
            KhMode::H => write!(f, "h"),
        }
    }
}

/// Scales a covariance block to horizon `h`.
pub fn scale_kh(block: &DMatrix<f64>, mode: KhMode, h: usize) -> DMatrix<f64> {
    block * mode.kh(h)
}

/// An `N x m` matrix of one-step residuals (actual - forecast), one column
/// per series in hierarchy order.
#[derive(Debug, Clone)]
pub struct ResidualMatrix {
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl ResidualMatrix {
    /// Validates and wraps a residual matrix: at least two rows, all
    /// entries finite, one name per column.
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::TooFewResiduals(values.nrows()));
        }
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} column names", values.ncols()),
                actual: format!("{}", names.len()),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("residual matrix".into()));
        }
        Ok(Self { values, names })
    }

    /// Residual rows.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Series names in column order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of residual rows.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    /// True if there are no rows (never holds for a validated matrix).
    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }
}

/// Column-mean-centered copy of the residual rows.
fn centered(r: &ResidualMatrix) -> DMatrix<f64> {
    let mut x = r.values().clone();
    for mut col in x.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    x
}

/// Unbiased sample covariance (divisor N-1) of the residual rows.
pub fn sample_covariance(r: &ResidualMatrix) -> DMatrix<f64> {
    let x = centered(r);
    let n = x.nrows() as f64;
    x.transpose() * &x / (n - 1.0)
}

/// Schaefer-Strimmer shrinkage intensity towards the diagonal target,
/// computed on the correlation scale:
/// `lambda = clamp(sum_{i<j} var(r_ij) / sum_{i<j} r_ij^2, 0, 1)`.
///
/// Summing over ordered pairs `i != j` would double both sums and leave the
/// ratio unchanged. Pairs involving a zero-variance column contribute
/// nothing. With no off-diagonal signal at all the intensity is 1 (full
/// shrinkage, a no-op on an already-diagonal estimate).
fn shrinkage_lambda(r: &ResidualMatrix) -> f64 {
    let x = centered(r);
    let n_obs = x.nrows();
    let m = x.ncols();
    let n = n_obs as f64;

    let sd: Vec<f64> = (0..m)
        .map(|j| (x.column(j).map(|v| v * v).sum() / (n - 1.0)).sqrt())
        .collect();

    let mut var_sum = 0.0;
    let mut r2_sum = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            if sd[i] == 0.0 || sd[j] == 0.0 {
                continue;
            }
            // Cross-products of standardized entries; their scaled mean is
            // the sample correlation.
            let mut w_bar = 0.0;
            for t in 0..n_obs {
                w_bar += (x[(t, i)] / sd[i]) * (x[(t, j)] / sd[j]);
            }
            w_bar /= n;
            let mut var_w = 0.0;
            for t in 0..n_obs {
                let w = (x[(t, i)] / sd[i]) * (x[(t, j)] / sd[j]);
                var_w += (w - w_bar) * (w - w_bar);
            }
            let r_ij = w_bar * n / (n - 1.0);
            let var_r = var_w * n / ((n - 1.0) * (n - 1.0) * (n - 1.0));
            var_sum += var_r;
            r2_sum += r_ij * r_ij;
        }
    }
    if r2_sum == 0.0 {
        return 1.0;
    }
    (var_sum / r2_sum).clamp(0.0, 1.0)
}

/// Applies a given shrinkage intensity: off-diagonals scaled by
/// `1 - lambda`, diagonal kept equal to the sample covariance diagonal.
/// Verifies positive definiteness by Cholesky, retrying once with
/// `jitter * mean(diag)` added to the diagonal.
pub fn shrinkage_with_lambda(
    r: &ResidualMatrix,
    lambda: f64,
    jitter: f64,
) -> Result<(DMatrix<f64>, f64)> {
    let s = sample_covariance(r);
    let m = s.nrows();
    let mut w = &s * (1.0 - lambda);
    for i in 0..m {
        w[(i, i)] = s[(i, i)];
    }
    if Cholesky::new(w.clone()).is_some() {
        return Ok((w, lambda));
    }
    let ridge = jitter * s.diagonal().mean();
    if ridge > 0.0 {
        let mut jittered = w.clone();
        for i in 0..m {
            jittered[(i, i)] += ridge;
        }
        if Cholesky::new(jittered.clone()).is_some() {
            return Ok((jittered, lambda));
        }
    }
    Err(Error::NotPositiveDefinite {
        what: "shrinkage covariance".into(),
        condition: condition_estimate(&w),
    })
}

/// Shrinkage covariance of the residual rows: `W = lambda D + (1-lambda) S`
/// with `S` the sample covariance, `D = diag(S)` and `lambda` estimated by
/// [`shrinkage_lambda`]'s formula. Returns the matrix and the intensity.
pub fn shrinkage_covariance(r: &ResidualMatrix, jitter: f64) -> Result<(DMatrix<f64>, f64)> {
    let lambda = shrinkage_lambda(r);
    shrinkage_with_lambda(r, lambda, jitter)
}

/// Condition estimate of a symmetric matrix: ratio of extreme eigenvalue
/// magnitudes (infinite if exactly singular).
pub(crate) fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let min = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `W_1` and its blocks under the fixed hierarchy ordering
/// (uppers first, bottoms last).
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    /// Full residual covariance after shrinkage.
    pub w1: DMatrix<f64>,
    /// Bottom-block covariance (`n x n`).
    pub sigma_b1: DMatrix<f64>,
    /// Upper-noise covariance (`(m-n) x (m-n)`).
    pub sigma_u1: DMatrix<f64>,
    /// Cross-covariance `Cov(B, eps_u)` (`n x (m-n)`), sign-flipped from
    /// the residual cross block.
    pub m1: DMatrix<f64>,
    /// Horizon scaling convention the model is used under.
    pub kh_mode: KhMode,
    /// Shrinkage intensity used to produce `w1`.
    pub shrink_lambda: f64,
}

impl CovarianceModel {
    /// Partitions an `m x m` covariance into the model blocks, with `n`
    /// bottom series occupying the trailing rows/columns.
    ///
    /// Checks symmetry (1e-12 relative) and positive definiteness of the
    /// full matrix and of both diagonal blocks.
    pub fn from_w1(w1: DMatrix<f64>, n: usize, kh_mode: KhMode, shrink_lambda: f64) -> Result<Self> {
        let m = w1.nrows();
        if w1.ncols() != m || n == 0 || n > m {
            return Err(Error::DimensionMismatch {
                expected: format!("square matrix with at least {n} rows"),
                actual: format!("{}x{}", m, w1.ncols()),
            });
        }
        let scale = w1.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let mut max_asym = 0.0f64;
        for i in 0..m {
            for j in (i + 1)..m {
                max_asym = max_asym.max((w1[(i, j)] - w1[(j, i)]).abs());
            }
        }
        if max_asym > 1e-12 * scale {
            return Err(Error::NotSymmetric {
                what: "W1".into(),
                max_asymmetry: max_asym,
            });
        }

        let u = m - n;
        let sigma_u1 = DMatrix::from(w1.view((0, 0), (u, u)));
        let sigma_b1 = DMatrix::from(w1.view((u, u), (n, n)));
        let mut m1 = DMatrix::zeros(n, u);
        for i in 0..n {
            for j in 0..u {
                m1[(i, j)] = -w1[(u + i, j)];
            }
        }

        for (name, block) in [("W1", &w1), ("Sigma_b1", &sigma_b1), ("Sigma_u1", &sigma_u1)] {
            if block.nrows() > 0 && Cholesky::new(block.clone()).is_none() {
                return Err(Error::NotPositiveDefinite {
                    what: name.into(),
                    condition: condition_estimate(block),
                });
            }
        }

        Ok(Self {
            w1,
            sigma_b1,
            sigma_u1,
            m1,
            kh_mode,
            shrink_lambda,
        })
    }

    /// Estimates the model from residuals: shrinkage covariance of the full
    /// residual matrix, then partition. `n` is the bottom-series count.
    pub fn from_residuals(
        r: &ResidualMatrix,
        n: usize,
        kh_mode: KhMode,
        jitter: f64,
    ) -> Result<Self> {
        let (w1, lambda) = shrinkage_covariance(r, jitter)?;
        Self::from_w1(w1, n, kh_mode, lambda)
    }

    /// Number of series covered by `w1`.
    pub fn m(&self) -> usize {
        self.w1.nrows()
    }

    /// Number of bottom series.
    pub fn n(&self) -> usize {
        self.sigma_b1.nrows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn residuals(rows: &[&[f64]]) -> ResidualMatrix {
        let n = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let values = DMatrix::from_row_slice(rows.len(), n, &flat);
        let names = (0..n).map(|i| format!("s{i}")).collect();
        ResidualMatrix::new(values, names).unwrap()
    }

    fn random_residuals(rng: &mut ChaCha12Rng, n_rows: usize, m: usize) -> ResidualMatrix {
        let values = DMatrix::from_fn(n_rows, m, |_, _| StandardNormal.sample(rng));
        let names = (0..m).map(|i| format!("s{i}")).collect();
        ResidualMatrix::new(values, names).unwrap()
    }

    /// Independent recomputation of the shrinkage intensity, written as
    /// plain scalar loops straight off the formula.
    fn lambda_oracle(values: &DMatrix<f64>) -> f64 {
        let n_obs = values.nrows();
        let m = values.ncols();
        let n = n_obs as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let mean_i = values.column(i).mean();
                let mean_j = values.column(j).mean();
                let var_i: f64 = values
                    .column(i)
                    .iter()
                    .map(|v| (v - mean_i) * (v - mean_i))
                    .sum::<f64>()
                    / (n - 1.0);
                let var_j: f64 = values
                    .column(j)
                    .iter()
                    .map(|v| (v - mean_j) * (v - mean_j))
                    .sum::<f64>()
                    / (n - 1.0);
                if var_i == 0.0 || var_j == 0.0 {
                    continue;
                }
                let (si, sj) = (var_i.sqrt(), var_j.sqrt());
                let w: Vec<f64> = (0..n_obs)
                    .map(|t| (values[(t, i)] - mean_i) / si * ((values[(t, j)] - mean_j) / sj))
                    .collect();
                let w_bar = w.iter().sum::<f64>() / n;
                let r_ij = w_bar * n / (n - 1.0);
                let var_r = w.iter().map(|v| (v - w_bar) * (v - w_bar)).sum::<f64>() * n
                    / ((n - 1.0) * (n - 1.0) * (n - 1.0));
                num += var_r;
                den += r_ij * r_ij;
            }
        }
        if den == 0.0 {
            1.0
        } else {
            (num / den).clamp(0.0, 1.0)
        }
    }

    #[test]
    fn sample_covariance_two_rows() {
        let r = residuals(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let cov = sample_covariance(&r);
        assert_eq!(cov, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));
    }

    #[test]
    fn sample_covariance_identical_rows_is_zero() {
        let r = residuals(&[&[5.0, -1.0, 2.0], &[5.0, -1.0, 2.0], &[5.0, -1.0, 2.0]]);
        assert!(sample_covariance(&r).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sample_covariance_cross_pattern() {
        let r = residuals(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]);
        let cov = sample_covariance(&r);
        assert_relative_eq!(cov[(0, 0)], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(cov[(1, 1)], 2.0 / 3.0, max_relative = 1e-15);
        assert_eq!(cov[(0, 1)], 0.0);
        assert_eq!(cov[(1, 0)], 0.0);
    }

    #[test]
    fn rejects_single_row() {
        let values = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let err = ResidualMatrix::new(values, vec!["a".into(), "b".into()]).unwrap_err();
        assert!(matches!(err, Error::TooFewResiduals(1)));
    }

    #[test]
    fn rejects_non_finite() {
        let values = DMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]);
        let err = ResidualMatrix::new(values, vec!["a".into()]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn lambda_matches_oracle_on_random_data() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..5 {
            let r = random_residuals(&mut rng, 40, 4);
            let lambda = shrinkage_lambda(&r);
            let expected = lambda_oracle(r.values());
            assert_relative_eq!(lambda, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn independent_noise_shrinks_towards_diagonal() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let r = random_residuals(&mut rng, 500, 5);
        let (w, lambda) = shrinkage_covariance(&r, 0.0).unwrap();
        let s = sample_covariance(&r);
        assert!(lambda > 0.8, "lambda = {lambda}");
        assert_relative_eq!(lambda, lambda_oracle(r.values()), max_relative = 1e-12);
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert!(w[(i, j)].abs() < s[(i, j)].abs());
                }
            }
        }
    }

    #[test]
    fn perfect_correlation_barely_shrinks() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let col: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
        let values = DMatrix::from_fn(100, 2, |t, j| if j == 0 { col[t] } else { 2.0 * col[t] });
        let r = ResidualMatrix::new(values, vec!["a".into(), "b".into()]).unwrap();
        let (w, lambda) = shrinkage_covariance(&r, 1e-8).unwrap();
        let s = sample_covariance(&r);
        assert!(lambda < 0.1, "lambda = {lambda}");
        assert_relative_eq!(lambda, lambda_oracle(r.values()), max_relative = 1e-12);
        assert_relative_eq!(w[(0, 1)], s[(0, 1)], max_relative = 0.1);
    }

    #[test]
    fn single_column_lambda_has_no_effect() {
        let r = residuals(&[&[1.0], &[2.0], &[4.0]]);
        let (w, _lambda) = shrinkage_covariance(&r, 0.0).unwrap();
        let s = sample_covariance(&r);
        assert_eq!(w, s);
    }

    #[test]
    fn forced_endpoints() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let r = random_residuals(&mut rng, 30, 4);
        let s = sample_covariance(&r);
        let (w0, _) = shrinkage_with_lambda(&r, 0.0, 0.0).unwrap();
        assert_eq!(w0, s);
        let (w1, _) = shrinkage_with_lambda(&r, 1.0, 0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    assert_eq!(w1[(i, j)], s[(i, j)]);
                } else {
                    assert_eq!(w1[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_variance_column_without_jitter_fails() {
        // Perfectly correlated pair plus a constant column: the sample
        // covariance is singular and there is no ridge to rescue it.
        let values = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let r = ResidualMatrix::new(values, vec!["a".into(), "b".into()]).unwrap();
        let err = shrinkage_covariance(&r, 0.0).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn zero_variance_column_rescued_by_jitter() {
        let values = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let r = ResidualMatrix::new(values, vec!["a".into(), "b".into()]).unwrap();
        let (w, _) = shrinkage_covariance(&r, 1e-8).unwrap();
        assert!(Cholesky::new(w).is_some());
    }

    #[test]
    fn partition_identity() {
        let model = CovarianceModel::from_w1(DMatrix::identity(3, 3), 2, KhMode::One, 0.0).unwrap();
        assert_eq!(model.sigma_u1, DMatrix::identity(1, 1));
        assert_eq!(model.sigma_b1, DMatrix::identity(2, 2));
        assert_eq!(model.m1, DMatrix::zeros(2, 1));
    }

    #[test]
    fn partition_reads_blocks_with_sign_flip() {
        let w1 = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 2.0, 1.0, 3.0, 0.0, 2.0, 0.0, 5.0]);
        let model = CovarianceModel::from_w1(w1, 2, KhMode::One, 0.0).unwrap();
        assert_eq!(model.sigma_u1, DMatrix::from_row_slice(1, 1, &[4.0]));
        assert_eq!(
            model.sigma_b1,
            DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 5.0])
        );
        assert_eq!(model.m1, DMatrix::from_row_slice(2, 1, &[-1.0, -2.0]));
    }

    #[test]
    fn zero_cross_block_gives_zero_m1() {
        let w1 = DMatrix::from_row_slice(3, 3, &[4.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 5.0]);
        let model = CovarianceModel::from_w1(w1, 2, KhMode::One, 0.0).unwrap();
        assert!(model.m1.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn partition_rejects_asymmetry() {
        let w1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        let err = CovarianceModel::from_w1(w1, 1, KhMode::One, 0.0).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
    }

    #[test]
    fn partition_rejects_indefinite() {
        let w1 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = CovarianceModel::from_w1(w1, 1, KhMode::One, 0.0).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn scale_kh_modes() {
        let eye = DMatrix::identity(2, 2);
        assert_eq!(scale_kh(&eye, KhMode::One, 4), eye);
        assert_eq!(scale_kh(&eye, KhMode::H, 4), &eye * 4.0);
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(scale_kh(&zero, KhMode::H, 7), zero);
    }

    #[test]
    fn residual_identity_for_coherent_data() {
        use crate::hierarchy::{aggregate_bottom, HierarchySpec, SummingMatrix};
        let spec = HierarchySpec::from_json(
            r#"{"bottom": ["b1", "b2"], "aggregates": [{"name": "u", "children": ["b1", "b2"]}]}"#,
        )
        .unwrap();
        let s = SummingMatrix::from_spec(&spec);
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let t = 50;
        let bottom = DMatrix::from_fn(t, 2, |_, _| StandardNormal.sample(&mut rng));
        let panel = aggregate_bottom(&bottom, &s).unwrap();
        let forecasts = DMatrix::from_fn(t, 3, |_, _| StandardNormal.sample(&mut rng));
        let resid = &panel.values - &forecasts;
        let r = ResidualMatrix::new(resid.clone(), s.names().to_vec()).unwrap();
        let model = CovarianceModel::from_w1(sample_covariance(&r), 2, KhMode::One, 0.0).unwrap();

        // eps_u = u_hat - A b equals the negated upper residual exactly.
        let eps: Vec<f64> = (0..t)
            .map(|row| forecasts[(row, 0)] - (bottom[(row, 0)] + bottom[(row, 1)]))
            .collect();
        for (row, &e) in eps.iter().enumerate() {
            assert_eq!(e, -resid[(row, 0)]);
        }
        let eps_mean = eps.iter().sum::<f64>() / t as f64;
        let eps_var =
            eps.iter().map(|e| (e - eps_mean) * (e - eps_mean)).sum::<f64>() / (t as f64 - 1.0);
        assert_relative_eq!(eps_var, model.sigma_u1[(0, 0)], max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn reassembled_blocks_reproduce_w1(seed in 0u64..1000, m in 2usize..7) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = 1 + (seed as usize) % (m - 1);
            let r = random_residuals(&mut rng, m + 5, m);
            let (w1, _) = shrinkage_covariance(&r, 1e-8).unwrap();
            let model = CovarianceModel::from_w1(w1.clone(), n, KhMode::One, 0.0).unwrap();
            let u = m - n;
            let mut rebuilt = DMatrix::zeros(m, m);
            rebuilt.view_mut((0, 0), (u, u)).copy_from(&model.sigma_u1);
            rebuilt.view_mut((0, u), (u, n)).copy_from(&(-model.m1.transpose()));
            rebuilt.view_mut((u, 0), (n, u)).copy_from(&(-model.m1.clone()));
            rebuilt.view_mut((u, u), (n, n)).copy_from(&model.sigma_b1);
            prop_assert_eq!(rebuilt, w1);
        }

        #[test]
        fn sample_covariance_matches_brute_force(seed in 0u64..1000) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let (n_rows, m) = (12, 3);
            let r = random_residuals(&mut rng, n_rows, m);
            let cov = sample_covariance(&r);
            let x = r.values();
            for i in 0..m {
                for j in 0..m {
                    let mean_i = x.column(i).mean();
                    let mean_j = x.column(j).mean();
                    let mut acc = 0.0;
                    for t in 0..n_rows {
                        acc += (x[(t, i)] - mean_i) * (x[(t, j)] - mean_j);
                    }
                    acc /= (n_rows - 1) as f64;
                    prop_assert!((acc - cov[(i, j)]).abs() <= 1e-12 * acc.abs().max(1.0));
                }
            }
        }

        #[test]
        fn lambda_always_in_unit_interval(seed in 0u64..1000) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let r = random_residuals(&mut rng, 8, 4);
            let lambda = shrinkage_lambda(&r);
            prop_assert!((0.0..=1.0).contains(&lambda));
        }
    }
}

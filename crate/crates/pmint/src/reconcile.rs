//! Reconciliation of base forecasts into coherent Gaussian distributions.
//!
//! The generative model treats the upper base forecasts as noisy
//! observations of sums of the bottom series, `U_hat = A B + eps_u`, with
//! `Cov(B) = k_h Sigma_b1`, `Cov(eps_u) = k_h Sigma_u1` and
//! `Cov(B, eps_u) = k_h M_1`. Conditioning the bottom prior on the
//! observed upper forecasts gives the posterior
//!
//! ```text
//! G        = (Sigma_b1 A' + M_1) (A Sigma_b1 A' + Sigma_u1 + A M_1 + M_1' A')^-1
//! b_tilde  = b_hat + G (u_hat - A b_hat)
//! Var[B|.] = k_h (Sigma_b1 - G (A Sigma_b1 + M_1'))
//! ```
//!
//! `k_h` cancels in `G`, so the reconciled mean is horizon-free while the
//! variance scales. The `lg` variant sets `M_1 = 0`; probabilistic
//! bottom-up ignores the uppers entirely. The reconciled bottom mean is a
//! linear map `P y_hat` of the base forecasts with `P = [G | I - G A]`,
//! which coincides numerically with the trace-minimizing GLS projection
//! `P = (S' W^-1 S)^-1 S' W^-1` computed from the same `W_1`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basefc::BaseForecasts;
use crate::covariance::{condition_estimate, CovarianceModel, KhMode};
use crate::error::{Error, Result};
use crate::hierarchy::SummingMatrix;

/// Reconciliation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Probabilistic bottom-up.
    Bu,
    /// Bayesian update assuming upper noise independent of the bottoms.
    Lg,
    /// Bayesian update with correlated upper noise.
    Pmint,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Bu => write!(f, "bu"),
            Method::Lg => write!(f, "lg"),
            Method::Pmint => write!(f, "pmint"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bu" => Ok(Method::Bu),
            "lg" => Ok(Method::Lg),
            "pmint" => Ok(Method::Pmint),
            other => Err(format!("unknown method '{other}' (expected bu, lg or pmint)")),
        }
    }
}

impl Method {
    /// Stable small integer used for seed derivation.
    pub fn tag(self) -> u64 {
        match self {
            Method::Bu => 1,
            Method::Lg => 2,
            Method::Pmint => 3,
        }
    }
}

/// Which cross-covariance assumption the gain is computed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainVariant {
    /// `M_1 = 0`.
    Lg,
    /// Full `M_1`.
    Pmint,
}

impl GainVariant {
    /// The method label of distributions produced under this variant.
    pub fn method(self) -> Method {
        match self {
            GainVariant::Lg => Method::Lg,
            GainVariant::Pmint => Method::Pmint,
        }
    }
}

/// A coherent joint Gaussian over the full hierarchy.
#[derive(Debug, Clone)]
pub struct ReconciledDistribution {
    /// Method that produced the distribution.
    pub method: Method,
    /// Forecast horizon.
    pub h: usize,
    /// Horizon scaling convention.
    pub kh_mode: KhMode,
    /// Series names, hierarchy order.
    pub names: Vec<String>,
    /// Reconciled bottom mean.
    pub bottom_mean: DVector<f64>,
    /// Reconciled bottom covariance (symmetric PSD).
    pub bottom_cov: DMatrix<f64>,
    /// Full-hierarchy mean `S b_tilde` (coherent by construction).
    pub full_mean: DVector<f64>,
    /// Full-hierarchy covariance `S Var[B|.] S'` (rank <= n).
    pub full_cov: DMatrix<f64>,
    /// Shrinkage intensity behind the covariance blocks, if estimated.
    pub shrink_lambda: Option<f64>,
}

/// Symmetrizes and clips tiny negative eigenvalues (down to
/// `-1e-10 * trace`) to zero; anything more negative is an error.
fn psd_repair(c: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = (c + c.transpose()) * 0.5;
    let trace = sym.trace();
    let tol = 1e-10 * trace.max(0.0);
    let mut eig = SymmetricEigen::new(sym);
    for v in eig.eigenvalues.iter_mut() {
        if *v < -tol {
            return Err(Error::NotPositiveSemiDefinite {
                what: what.into(),
                eigenvalue: *v,
            });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let rebuilt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues)
        * eig.eigenvectors.transpose();
    Ok((&rebuilt + rebuilt.transpose()) * 0.5)
}

/// The gain `G = (Sigma_b1 A' + M_1) K^-1` with
/// `K = A Sigma_b1 A' + Sigma_u1 + A M_1 + M_1' A'`; `M_1 = 0` under the
/// `lg` variant. Solved through a Cholesky factorization of `K`.
pub fn gain_matrix(
    cov: &CovarianceModel,
    a: &DMatrix<f64>,
    variant: GainVariant,
) -> Result<DMatrix<f64>> {
    let n = cov.n();
    let u = a.nrows();
    if a.ncols() != n || cov.m() != n + u {
        return Err(Error::DimensionMismatch {
            expected: format!("A with {n} columns matching an m={} model", cov.m()),
            actual: format!("{}x{}", u, a.ncols()),
        });
    }
    if u == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let m1 = match variant {
        GainVariant::Lg => DMatrix::zeros(n, u),
        GainVariant::Pmint => cov.m1.clone(),
    };
    let sigma_b_at = &cov.sigma_b1 * a.transpose();
    let rhs = &sigma_b_at + &m1;
    let am = a * &m1;
    let inner = a * &sigma_b_at + &cov.sigma_u1 + &am + am.transpose();
    let inner = (&inner + inner.transpose()) * 0.5;
    let chol = Cholesky::new(inner.clone()).ok_or_else(|| Error::NotPositiveDefinite {
        what: "gain inner matrix".into(),
        condition: condition_estimate(&inner),
    })?;
    // G' = K^-1 (Sigma_b1 A' + M_1)'.
    Ok(chol.solve(&rhs.transpose()).transpose())
}

/// Posterior reconciliation (Bayes update of the bottom prior on the
/// observed upper forecasts) for horizon `h`, under the given variant.
pub fn reconcile_pmint(
    base: &BaseForecasts,
    cov: &CovarianceModel,
    s: &SummingMatrix,
    h: usize,
    kh_mode: KhMode,
    variant: GainVariant,
) -> Result<ReconciledDistribution> {
    check_horizon(base, s, h)?;
    if cov.m() != s.m() || cov.n() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: format!("covariance for m={}, n={}", s.m(), s.n()),
            actual: format!("m={}, n={}", cov.m(), cov.n()),
        });
    }
    let a = s.a();
    let g = gain_matrix(cov, &a, variant)?;
    let u_hat = base.upper(h);
    let b_hat = base.bottom(h);

    let incoherence = &u_hat - &a * &b_hat;
    let bottom_mean = &b_hat + &g * &incoherence;

    let m1t = match variant {
        GainVariant::Lg => DMatrix::zeros(s.uppers(), s.n()),
        GainVariant::Pmint => cov.m1.transpose(),
    };
    let raw = &cov.sigma_b1 - &g * (&a * &cov.sigma_b1 + m1t);
    let base_cov = psd_repair(&raw, "reconciled bottom covariance")?;
    let base_full = s.s() * &base_cov * s.s().transpose();

    let kh = kh_mode.kh(h);
    Ok(ReconciledDistribution {
        method: variant.method(),
        h,
        kh_mode,
        names: s.names().to_vec(),
        full_mean: s.s() * &bottom_mean,
        full_cov: base_full * kh,
        bottom_mean,
        bottom_cov: base_cov * kh,
        shrink_lambda: Some(cov.shrink_lambda),
    })
}

/// Probabilistic bottom-up: sums the bottom prior through `S`, ignoring
/// the upper forecasts.
pub fn reconcile_bottom_up(
    base: &BaseForecasts,
    sigma_b1: &DMatrix<f64>,
    s: &SummingMatrix,
    h: usize,
    kh_mode: KhMode,
) -> Result<ReconciledDistribution> {
    check_horizon(base, s, h)?;
    if sigma_b1.nrows() != s.n() || sigma_b1.ncols() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0} bottom covariance", s.n()),
            actual: format!("{}x{}", sigma_b1.nrows(), sigma_b1.ncols()),
        });
    }
    let bottom_mean = base.bottom(h);
    let base_cov = psd_repair(sigma_b1, "bottom covariance")?;
    let base_full = s.s() * &base_cov * s.s().transpose();
    let kh = kh_mode.kh(h);
    Ok(ReconciledDistribution {
        method: Method::Bu,
        h,
        kh_mode,
        names: s.names().to_vec(),
        full_mean: s.s() * &bottom_mean,
        full_cov: base_full * kh,
        bottom_mean,
        bottom_cov: base_cov * kh,
        shrink_lambda: None,
    })
}

fn check_horizon(base: &BaseForecasts, s: &SummingMatrix, h: usize) -> Result<()> {
    if base.m() != s.m() || base.n_bottom != s.n() {
        return Err(Error::DimensionMismatch {
            expected: format!("forecasts for m={}, n={}", s.m(), s.n()),
            actual: format!("m={}, n={}", base.m(), base.n_bottom),
        });
    }
    if h == 0 || h > base.horizon() {
        return Err(Error::DimensionMismatch {
            expected: format!("horizon in 1..={}", base.horizon()),
            actual: format!("{h}"),
        });
    }
    Ok(())
}

/// The trace-minimizing GLS projection `P = (S' W^-1 S)^-1 S' W^-1`,
/// computed through Cholesky factorizations (no explicit inverses).
/// Satisfies `P S = I`.
pub fn mint_p_matrix(w: &DMatrix<f64>, s: &SummingMatrix) -> Result<DMatrix<f64>> {
    if w.nrows() != s.m() || w.ncols() != s.m() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0} error covariance", s.m()),
            actual: format!("{}x{}", w.nrows(), w.ncols()),
        });
    }
    let chol_w = Cholesky::new(w.clone()).ok_or_else(|| Error::NotPositiveDefinite {
        what: "W".into(),
        condition: condition_estimate(w),
    })?;
    let w_inv_s = chol_w.solve(s.s());
    let gram = s.s().transpose() * &w_inv_s;
    let gram = (&gram + gram.transpose()) * 0.5;
    let chol_g = Cholesky::new(gram.clone()).ok_or_else(|| Error::NotPositiveDefinite {
        what: "S' W^-1 S".into(),
        condition: condition_estimate(&gram),
    })?;
    Ok(chol_g.solve(&w_inv_s.transpose()))
}

/// Assembles the projection `[G | I - G A]` of the Bayes update, columns
/// ordered uppers-then-bottoms to match `y_hat = [u_hat; b_hat]`.
pub fn pmint_p_matrix(g: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let u = g.ncols();
    let right = DMatrix::identity(n, n) - g * a;
    let mut p = DMatrix::zeros(n, u + n);
    p.view_mut((0, 0), (n, u)).copy_from(g);
    p.view_mut((0, u), (n, n)).copy_from(&right);
    p
}

/// Closed-form gains of the two-bottom hierarchy (`U = B1 + B2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoBottomGains {
    /// Gain on `b_hat_1` ignoring bottom/upper-noise cross-covariance.
    pub g1: f64,
    /// Gain on `b_hat_2` ignoring bottom/upper-noise cross-covariance.
    pub g2: f64,
    /// Gain on `b_hat_1` accounting for the cross-covariances.
    pub g1_star: f64,
    /// Gain on `b_hat_2` accounting for the cross-covariances.
    pub g2_star: f64,
}

/// Evaluates the two-bottom closed forms. `sigma_u1`/`sigma_u2` are the
/// cross-covariances between each bottom series and the *upper residual*,
/// i.e. the negated entries of `M_1`.
pub fn two_bottom_gains(
    sigma1_sq: f64,
    sigma2_sq: f64,
    sigma12: f64,
    sigma_u_sq: f64,
    sigma_u1: f64,
    sigma_u2: f64,
) -> Result<TwoBottomGains> {
    let den = sigma_u_sq + sigma1_sq + sigma2_sq + 2.0 * sigma12;
    let den_star = den - 2.0 * sigma_u1 - 2.0 * sigma_u2;
    if den == 0.0 || den_star == 0.0 {
        return Err(Error::NotPositiveDefinite {
            what: "two-bottom gain denominator".into(),
            condition: f64::INFINITY,
        });
    }
    Ok(TwoBottomGains {
        g1: (sigma1_sq + sigma12) / den,
        g2: (sigma2_sq + sigma12) / den,
        g1_star: (sigma1_sq + sigma12 - sigma_u1) / den_star,
        g2_star: (sigma2_sq + sigma12 - sigma_u2) / den_star,
    })
}

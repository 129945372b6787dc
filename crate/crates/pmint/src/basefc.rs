//! Base forecasts: independent per-series autoregressive models.
//!
//! Every series of the hierarchy (uppers included) gets its own AR(p)
//! model fitted by least squares; the one-step in-sample residuals of all
//! `m` models feed the covariance estimation, and the iterated plug-in
//! means feed the reconciliation. Externally produced forecasts and
//! residuals can be ingested instead through [`ingest_base_forecasts`].

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::covariance::ResidualMatrix;
use crate::error::{Error, Result};
use crate::hierarchy::{HierarchySpec, SeriesPanel};
use crate::io;

/// A fitted autoregressive model `y_t = c + phi_1 y_{t-1} + ... + phi_p y_{t-p} + e_t`.
#[derive(Debug, Clone)]
pub struct ArModel {
    /// Autoregressive order `p`.
    pub order: usize,
    /// Intercept `c`.
    pub intercept: f64,
    /// Coefficients `phi_1..phi_p` (lag 1 first).
    pub coeffs: Vec<f64>,
    /// Innovation variance estimate.
    pub sigma2: f64,
    /// Length of the series the model was fitted on.
    pub fitted_len: usize,
    /// True when a singular design forced the intercept-only fallback.
    pub fallback: bool,
}

impl ArModel {
    /// One-step prediction from the `p` most recent values
    /// (`recent[0]` is `y_{t-1}`, `recent[1]` is `y_{t-2}`, ...).
    fn predict_one(&self, recent: &[f64]) -> f64 {
        let mut y = self.intercept;
        for (i, &phi) in self.coeffs.iter().enumerate() {
            y += phi * recent[i];
        }
        y
    }
}

/// Fits an AR(p) model by least squares of `y_t` on `(1, y_{t-1}, ..., y_{t-p})`.
///
/// A rank-deficient design (e.g. a constant series with `p >= 1`) falls
/// back to the intercept-only model, keeping the requested order so the
/// residual window stays aligned across series.
pub fn fit_ar(series: &[f64], p: usize) -> Result<ArModel> {
    let t = series.len();
    if t < p + 2 {
        return Err(Error::SeriesTooShort {
            len: t,
            order: p,
            min: p + 2,
        });
    }
    if !series.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("series".into()));
    }

    let rows = t - p;
    let design = DMatrix::from_fn(rows, p + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            series[p + r - c]
        }
    });
    let target = DVector::from_fn(rows, |r, _| series[p + r]);

    let svd = design.clone().svd(true, true);
    let eps = 1e-10 * svd.singular_values.max();
    let rank = svd.rank(eps);

    let (intercept, coeffs, fallback) = if rank < p + 1 {
        // Intercept-only fallback: the mean of the regression targets.
        (target.mean(), vec![0.0; p], true)
    } else {
        let beta = svd
            .solve(&target, eps)
            .map_err(|msg| Error::Parse {
                file: "ar design".into(),
                message: msg.into(),
            })?;
        (beta[0], beta.as_slice()[1..].to_vec(), false)
    };

    let model = ArModel {
        order: p,
        intercept,
        coeffs,
        sigma2: 0.0,
        fitted_len: t,
        fallback,
    };
    let resid = one_step_residuals(&model, series)?;
    let rss: f64 = resid.iter().map(|e| e * e).sum();
    let dof = rows as isize - (p + 1) as isize;
    let sigma2 = if dof > 0 { rss / dof as f64 } else { 0.0 };

    Ok(ArModel { sigma2, ..model })
}

/// Iterated plug-in mean forecasts for `h = 1..=horizon`, substituting
/// earlier forecasts for unobserved values.
pub fn forecast_ar(model: &ArModel, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if history.len() < model.order {
        return Err(Error::SeriesTooShort {
            len: history.len(),
            order: model.order,
            min: model.order,
        });
    }
    // Most recent value first.
    let mut recent: Vec<f64> = history.iter().rev().take(model.order).copied().collect();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let y = model.predict_one(&recent);
        out.push(y);
        if model.order > 0 {
            recent.pop();
            recent.insert(0, y);
        }
    }
    Ok(out)
}

/// One-step in-sample residuals `e_t = y_t - (c + sum phi_i y_{t-i})` for
/// `t = p+1..=T` (convention: actual - forecast). Length `T - p`.
pub fn one_step_residuals(model: &ArModel, series: &[f64]) -> Result<Vec<f64>> {
    let t = series.len();
    let p = model.order;
    if t < p + 1 {
        return Err(Error::SeriesTooShort {
            len: t,
            order: p,
            min: p + 1,
        });
    }
    let mut out = Vec::with_capacity(t - p);
    for i in p..t {
        let recent: Vec<f64> = (1..=p).map(|lag| series[i - lag]).collect();
        out.push(series[i] - model.predict_one(&recent));
    }
    Ok(out)
}

/// Per-horizon base point forecasts for all `m` series, in hierarchy order
/// (uppers first, bottoms last).
#[derive(Debug, Clone)]
pub struct BaseForecasts {
    /// `H x m` matrix of means; row `h-1` holds the forecasts for horizon `h`.
    pub means: DMatrix<f64>,
    /// Series names in column order.
    pub names: Vec<String>,
    /// Number of bottom series (trailing columns).
    pub n_bottom: usize,
    /// Forecast-origin index (number of observations the forecasts were
    /// issued from).
    pub origin: usize,
}

impl BaseForecasts {
    /// Maximum horizon.
    pub fn horizon(&self) -> usize {
        self.means.nrows()
    }

    /// Total number of series.
    pub fn m(&self) -> usize {
        self.means.ncols()
    }

    /// Upper-series forecasts for horizon `h` (1-based).
    pub fn upper(&self, h: usize) -> DVector<f64> {
        let u = self.m() - self.n_bottom;
        DVector::from_fn(u, |i, _| self.means[(h - 1, i)])
    }

    /// Bottom-series forecasts for horizon `h` (1-based).
    pub fn bottom(&self, h: usize) -> DVector<f64> {
        let u = self.m() - self.n_bottom;
        DVector::from_fn(self.n_bottom, |i, _| self.means[(h - 1, u + i)])
    }
}

/// Fits an AR(p) model to every column of the panel, forecasts
/// `h = 1..=horizon` and collects the aligned one-step residuals.
pub fn forecast_panel(
    panel: &SeriesPanel,
    n_bottom: usize,
    p: usize,
    horizon: usize,
) -> Result<(BaseForecasts, ResidualMatrix, Vec<ArModel>)> {
    let m = panel.values.ncols();
    let t = panel.len();
    let mut means = DMatrix::zeros(horizon, m);
    let mut residuals = DMatrix::zeros(t - p, m);
    let mut models = Vec::with_capacity(m);
    for col in 0..m {
        let series: Vec<f64> = panel.values.column(col).iter().copied().collect();
        let model = fit_ar(&series, p)?;
        let fc = forecast_ar(&model, &series, horizon)?;
        for h in 0..horizon {
            means[(h, col)] = fc[h];
        }
        let res = one_step_residuals(&model, &series)?;
        for (row, &e) in res.iter().enumerate() {
            residuals[(row, col)] = e;
        }
        models.push(model);
    }
    let base = BaseForecasts {
        means,
        names: panel.names.clone(),
        n_bottom,
        origin: t,
    };
    let resid = ResidualMatrix::new(residuals, panel.names.clone())?;
    Ok((base, resid, models))
}

/// Reads externally produced base forecasts (`series,h,mean` CSV) and
/// residuals (wide CSV), reordering both to hierarchy order and validating
/// completeness.
pub fn ingest_base_forecasts(
    forecast_path: &Path,
    residual_path: &Path,
    spec: &HierarchySpec,
) -> Result<(BaseForecasts, ResidualMatrix)> {
    let names = spec.names();
    let means = io::read_forecasts(forecast_path, &names)?;
    let resid = io::read_residuals(residual_path, &names)?;
    let base = BaseForecasts {
        means,
        names,
        n_bottom: spec.n(),
        origin: 0,
    };
    Ok((base, resid))
}

//! Synthetic data generator: a 7-series hierarchy of correlated AR(1)
//! bottom series with sign-alternating observation noise.
//!
//! The four bottom series follow `z_t = phi .* z_{t-1} + w_t` with
//! `w_t ~ N(0, Sigma)` and per-series coefficients drawn uniformly from
//! the stationary region `(-1, 1)`. The observed bottoms add a shared
//! scalar noise `eta_t` with signs `(+, -, +, -)`, so the noise cancels
//! exactly in every upper series (A = AA + AB, B = BA + BB, Total).

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hierarchy::{aggregate_bottom, HierarchySpec, SeriesPanel, SummingMatrix};

/// Steps simulated and discarded before recording, so the recorded window
/// starts near the stationary distribution.
const BURN_IN: usize = 100;

/// The fixed generating hierarchy: Total = A + B, A = AA + AB, B = BA + BB.
pub fn synthetic_spec() -> HierarchySpec {
    HierarchySpec::from_json(
        r#"{
            "bottom": ["AA", "AB", "BA", "BB"],
            "aggregates": [
                {"name": "Total", "children": ["A", "B"]},
                {"name": "A", "children": ["AA", "AB"]},
                {"name": "B", "children": ["BA", "BB"]}
            ]
        }"#,
    )
    .expect("static spec is valid")
}

/// Configuration of one simulated replicate.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// Recorded series length.
    pub t: usize,
    /// RNG seed.
    pub seed: u64,
    /// Innovation covariance of the four bottom series.
    pub sigma: DMatrix<f64>,
    /// Variance of the shared observation noise.
    pub eta_var: f64,
    /// Noise signs over (AA, AB, BA, BB).
    pub noise_signs: [f64; 4],
}

impl SynthConfig {
    /// Default generating process for a given length and seed: innovation
    /// covariance with stronger correlation between siblings, observation
    /// noise variance 10 and alternating signs.
    pub fn new(t: usize, seed: u64) -> Self {
        Self {
            t,
            seed,
            sigma: DMatrix::from_row_slice(
                4,
                4,
                &[
                    5.0, 3.0, 2.0, 1.0, //
                    3.0, 5.0, 2.0, 1.0, //
                    2.0, 2.0, 5.0, 3.0, //
                    1.0, 1.0, 3.0, 5.0,
                ],
            ),
            eta_var: 10.0,
            noise_signs: [1.0, -1.0, 1.0, -1.0],
        }
    }
}

/// One simulated replicate.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Full coherent panel over (Total, A, B, AA, AB, BA, BB).
    pub panel: SeriesPanel,
    /// True AR coefficients of the four bottom series.
    pub phi: Vec<f64>,
    /// The shared observation-noise sequence (one draw per recorded step).
    pub eta: Vec<f64>,
}

/// Simulates one replicate of the generating process.
pub fn simulate_hierarchy(config: &SynthConfig) -> Result<SynthOutput> {
    if config.t < 10 {
        return Err(Error::DimensionMismatch {
            expected: "series length >= 10".into(),
            actual: format!("{}", config.t),
        });
    }
    if config.eta_var < 0.0 {
        return Err(Error::NonFinite("eta_var must be >= 0".into()));
    }
    let chol = Cholesky::new(config.sigma.clone()).ok_or_else(|| Error::NotPositiveDefinite {
        what: "innovation covariance".into(),
        condition: crate::covariance::condition_estimate(&config.sigma),
    })?;
    let l = chol.l();
    let spec = synthetic_spec();
    let s = SummingMatrix::from_spec(&spec);

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let phi: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let eta_sd = config.eta_var.sqrt();

    let mut z: DVector<f64> = DVector::zeros(4);
    let mut bottom = DMatrix::zeros(config.t, 4);
    let mut eta = Vec::with_capacity(config.t);
    for step in 0..(BURN_IN + config.t) {
        let noise = DVector::from_fn(4, |_, _| StandardNormal.sample(&mut rng));
        let w = &l * noise;
        for i in 0..4 {
            z[i] = phi[i] * z[i] + w[i];
        }
        if step >= BURN_IN {
            let draw: f64 = StandardNormal.sample(&mut rng);
            let e = eta_sd * draw;
            let row = step - BURN_IN;
            for i in 0..4 {
                bottom[(row, i)] = z[i] + config.noise_signs[i] * e;
            }
            eta.push(e);
        }
    }

    let panel = aggregate_bottom(&bottom, &s)?;
    Ok(SynthOutput { panel, phi, eta })
}

//! The continuous Merton market and the payoff families priced on it.
//!
//! Asset `i` follows
//!
//! ```text
//! S_i(t) = S_i(0) exp((r + mu_i - sum_j sigma_ij^2 / 2) t + sum_j sigma_ij W_j(t)) prod_{k <= N(t)} (1 + U^(k)_i)
//! ```
//!
//! with `N` a Poisson process of intensity `lambda`. The drift `mu_i` is
//! never user supplied: it is fixed at `-lambda E[U_i]` so that discounted
//! prices are martingales.

mod jumps;
mod payoff;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use jumps::{JumpLaw, JumpSampler, DEFAULT_SAMPLER_SEED};
pub use payoff::{lipschitz_probe, Payoff, PayoffFamily, PayoffSpec};

use crate::numeric::{accurate_dot, compensated_sum};
use crate::rng;

/// Number of draws used to estimate `E[U]` for sampler jump laws.
pub const DRIFT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model needs at least one asset")]
    NoAssets,
    #[error("spot[{index}] = {value} is not positive")]
    NonPositiveSpot { index: usize, value: f64 },
    #[error("volatility matrix is singular (|det| = {det:e} after row scaling)")]
    SingularVol { det: f64 },
    #[error("jump atom {atom}, component {component}: value {value} is not > -1")]
    JumpBelowMinusOne { atom: usize, component: usize, value: f64 },
    #[error("bad jump probabilities: {0}")]
    BadProbabilities(String),
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("{name} = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
}

/// Unvalidated market parameters, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub spot: Vec<f64>,
    pub rate: f64,
    pub horizon: f64,
    pub vol: Vec<Vec<f64>>,
    pub intensity: f64,
    pub jumps: JumpLaw,
}

/// How the drift `E[U]` was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftSource {
    /// Exact finite sum over the atoms.
    Exact,
    /// Sample mean over `samples` draws from stream `seed`.
    Estimated { samples: usize, seed: u64 },
}

/// A validated Merton market. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MertonModel {
    raw: RawModel,
    jumps: JumpLaw,
    jump_mean: Vec<f64>,
    drift: Vec<f64>,
    drift_source: DriftSource,
}

/// Validates raw parameters and computes the martingale drift.
pub fn validate_model(raw: RawModel) -> Result<MertonModel, ModelError> {
    let d = raw.spot.len();
    if d == 0 {
        return Err(ModelError::NoAssets);
    }
    for (index, &value) in raw.spot.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(ModelError::NonPositiveSpot { index, value });
        }
    }
    check_param("rate", raw.rate, raw.rate >= 0.0, "must be finite and >= 0")?;
    check_param("horizon", raw.horizon, raw.horizon > 0.0, "must be finite and > 0")?;
    check_param("intensity", raw.intensity, raw.intensity >= 0.0, "must be finite and >= 0")?;
    if raw.vol.len() != d {
        return Err(ModelError::DimensionMismatch { what: "vol", expected: d, found: raw.vol.len() });
    }
    for row in &raw.vol {
        if row.len() != d {
            return Err(ModelError::DimensionMismatch { what: "vol[..]", expected: d, found: row.len() });
        }
        if let Some(&x) = row.iter().find(|x| !x.is_finite()) {
            return Err(ModelError::InvalidParameter { name: "vol", value: x, reason: "must be finite" });
        }
    }
    let det = scaled_determinant(&raw.vol);
    if !(det.abs() > 1e-12) {
        return Err(ModelError::SingularVol { det });
    }
    let jumps = raw.jumps.validated(d)?;
    let (jump_mean, drift_source) = jump_mean(&jumps, d);
    let drift = jump_mean.iter().map(|&m| -(raw.intensity * m)).collect();
    Ok(MertonModel { raw, jumps, jump_mean, drift, drift_source })
}

fn check_param(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), ModelError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { name, value, reason })
    }
}

/// Determinant after scaling each row to unit max-norm.
fn scaled_determinant(vol: &[Vec<f64>]) -> f64 {
    let d = vol.len();
    let m = DMatrix::from_fn(d, d, |i, j| {
        let scale = vol[i].iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if scale == 0.0 {
            0.0
        } else {
            vol[i][j] / scale
        }
    });
    m.determinant()
}

fn jump_mean(jumps: &JumpLaw, d: usize) -> (Vec<f64>, DriftSource) {
    match jumps {
        JumpLaw::Discrete { values, probs } => {
            let mean = (0..d)
                .map(|i| {
                    let column: Vec<f64> = values.iter().map(|v| v[i]).collect();
                    accurate_dot(probs, &column)
                })
                .collect();
            (mean, DriftSource::Exact)
        }
        JumpLaw::Sampler { seed, .. } => {
            let mut gen = rng::substream(*seed, rng::DRIFT_STREAM);
            let mut sums = vec![crate::numeric::CompensatedSum::new(); d];
            let mut draw = vec![0.0; d];
            for _ in 0..DRIFT_SAMPLES {
                jumps.sample_into(&mut gen, &mut draw);
                for (s, x) in sums.iter_mut().zip(&draw) {
                    s.add(*x);
                }
            }
            let mean = sums.iter().map(|s| s.value() / DRIFT_SAMPLES as f64).collect();
            (mean, DriftSource::Estimated { samples: DRIFT_SAMPLES, seed: *seed })
        }
    }
}

impl MertonModel {
    /// The parameters this model was validated from.
    pub fn raw(&self) -> &RawModel {
        &self.raw
    }

    pub fn dim(&self) -> usize {
        self.raw.spot.len()
    }

    pub fn spot(&self) -> &[f64] {
        &self.raw.spot
    }

    pub fn rate(&self) -> f64 {
        self.raw.rate
    }

    pub fn horizon(&self) -> f64 {
        self.raw.horizon
    }

    pub fn vol(&self) -> &[Vec<f64>] {
        &self.raw.vol
    }

    pub fn intensity(&self) -> f64 {
        self.raw.intensity
    }

    /// Validated jump law (probabilities renormalized).
    pub fn jumps(&self) -> &JumpLaw {
        &self.jumps
    }

    /// `E[U_i]`, exact for discrete laws.
    pub fn jump_mean(&self) -> &[f64] {
        &self.jump_mean
    }

    /// `mu_i = -lambda E[U_i]`.
    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn drift_source(&self) -> DriftSource {
        self.drift_source
    }

    /// `sum_j sigma_ij^2` for each asset.
    pub fn total_variance_rate(&self) -> Vec<f64> {
        self.raw.vol.iter().map(|row| compensated_sum(row.iter().map(|x| x * x))).collect()
    }
}

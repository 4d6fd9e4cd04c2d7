//! Closed-form European prices for one asset.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn black_scholes(kind: OptionKind, spot: f64, strike: f64, sigma: f64, rate: f64, horizon: f64) -> f64 {
    let df = (-rate * horizon).exp();
    if strike <= 0.0 {
        return match kind {
            OptionKind::Call => spot,
            OptionKind::Put => 0.0,
        };
    }
    let vol = sigma * horizon.sqrt();
    if vol <= 0.0 {
        return match kind {
            OptionKind::Call => (spot - strike * df).max(0.0),
            OptionKind::Put => (strike * df - spot).max(0.0),
        };
    }
    let d1 = ((spot / strike).ln() + (rate + 0.5 * sigma * sigma) * horizon) / vol;
    let d2 = d1 - vol;
    match kind {
        OptionKind::Call => spot * norm_cdf(d1) - strike * df * norm_cdf(d2),
        OptionKind::Put => strike * df * norm_cdf(-d2) - spot * norm_cdf(-d1),
    }
}

/// Poisson tail mass below which the mixture series is cut.
pub const MIXTURE_TAIL: f64 = 1e-12;

/// European price with a single deterministic jump size `u`:
/// conditioning on `N(T) = k` leaves a lognormal with spot
/// `S0 (1 + u)^k e^{-lambda u T}`.
#[allow(clippy::too_many_arguments)]
pub fn poisson_mixture_european(
    kind: OptionKind,
    spot: f64,
    strike: f64,
    sigma: f64,
    rate: f64,
    horizon: f64,
    intensity: f64,
    jump: f64,
) -> f64 {
    if intensity == 0.0 || jump == 0.0 {
        return black_scholes(kind, spot, strike, sigma, rate, horizon);
    }
    let mean = intensity * horizon;
    let compensator = (-intensity * jump * horizon).exp();
    let mut weight = (-mean).exp();
    let mut mass = 0.0;
    let mut price = 0.0;
    let mut k = 0u32;
    loop {
        let shifted = spot * (1.0 + jump).powi(k as i32) * compensator;
        price += weight * black_scholes(kind, shifted, strike, sigma, rate, horizon);
        mass += weight;
        if 1.0 - mass < MIXTURE_TAIL || k > 10_000 {
            break;
        }
        k += 1;
        weight *= mean / k as f64;
    }
    price
}

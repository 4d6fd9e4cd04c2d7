use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffFamily {
    /// `max(K - w.s, 0)`
    BasketPut,
    /// `max(w.s - K, 0)`
    BasketCall,
    /// `max(max_i s_i - K, 0)`
    MaxCall,
    /// `max(K - min_i s_i, 0)`
    MinPut,
    /// `K` regardless of state.
    Constant,
}

/// Wire form of a payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffSpec {
    pub family: PayoffFamily,
    pub strike: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
}

/// A Markovian payoff `F(s, t)` from a closed parametric family, with a
/// known Lipschitz constant `L >= 1`:
///
/// `|F(v, t) - F(v', s)| <= L sum|v_i - v'_i| + L (t - s)(1 + sum|v_i|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PayoffSpec", into = "PayoffSpec")]
pub struct Payoff {
    family: PayoffFamily,
    strike: f64,
    weights: Vec<f64>,
    lipschitz: f64,
}

impl Payoff {
    pub fn new(family: PayoffFamily, strike: f64, weights: Vec<f64>) -> Result<Self, ModelError> {
        if !(strike.is_finite() && strike >= 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "payoff.strike",
                value: strike,
                reason: "must be finite and >= 0",
            });
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(ModelError::InvalidParameter {
                name: "payoff.weights",
                value: w,
                reason: "must be finite and >= 0",
            });
        }
        let basket = matches!(family, PayoffFamily::BasketPut | PayoffFamily::BasketCall);
        if basket && weights.is_empty() {
            return Err(ModelError::InvalidParameter {
                name: "payoff.weights",
                value: 0.0,
                reason: "basket payoffs need one weight per asset",
            });
        }
        // Time-independent families: only the state slope matters.
        let lipschitz = if basket { weights.iter().sum::<f64>().max(1.0) } else { 1.0 };
        Ok(Self { family, strike, weights, lipschitz })
    }

    pub fn basket_put(strike: f64, weights: Vec<f64>) -> Self {
        Self::new(PayoffFamily::BasketPut, strike, weights).expect("valid basket put")
    }

    pub fn basket_call(strike: f64, weights: Vec<f64>) -> Self {
        Self::new(PayoffFamily::BasketCall, strike, weights).expect("valid basket call")
    }

    pub fn constant(value: f64) -> Self {
        Self::new(PayoffFamily::Constant, value, Vec::new()).expect("valid constant")
    }

    pub fn family(&self) -> PayoffFamily {
        self.family
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Declared Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Checks that the payoff can be evaluated on `d` assets.
    pub fn check_dimension(&self, d: usize) -> Result<(), ModelError> {
        match self.family {
            PayoffFamily::BasketPut | PayoffFamily::BasketCall if self.weights.len() != d => {
                Err(ModelError::DimensionMismatch { what: "payoff.weights", expected: d, found: self.weights.len() })
            }
            _ => Ok(()),
        }
    }

    /// `F(s, t)`; nonnegative for every `s` in the positive orthant.
    #[inline]
    pub fn eval(&self, s: &[f64], _t: f64) -> f64 {
        match self.family {
            PayoffFamily::BasketPut => (self.strike - self.basket(s)).max(0.0),
            PayoffFamily::BasketCall => (self.basket(s) - self.strike).max(0.0),
            PayoffFamily::MaxCall => {
                let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (m - self.strike).max(0.0)
            }
            PayoffFamily::MinPut => {
                let m = s.iter().copied().fold(f64::INFINITY, f64::min);
                (self.strike - m).max(0.0)
            }
            PayoffFamily::Constant => self.strike,
        }
    }

    #[inline]
    fn basket(&self, s: &[f64]) -> f64 {
        self.weights.iter().zip(s).map(|(w, x)| w * x).sum()
    }
}

impl TryFrom<PayoffSpec> for Payoff {
    type Error = ModelError;

    fn try_from(spec: PayoffSpec) -> Result<Self, Self::Error> {
        Payoff::new(spec.family, spec.strike, spec.weights)
    }
}

impl From<Payoff> for PayoffSpec {
    fn from(p: Payoff) -> Self {
        PayoffSpec { family: p.family, strike: p.strike, weights: p.weights }
    }
}

/// Worst observed Lipschitz ratio
/// `|F(s,t) - F(s',t')| / (sum|s_i - s'_i| + |t - t'| (1 + sum|s_i|))`
/// over random pairs on the box `[0, 2(K+1)]^d x [0, 1]`, where `s` is the
/// later of the two time points. Deterministic given `seed`.
pub fn lipschitz_probe(payoff: &Payoff, dim: usize, pairs: usize, seed: u64) -> f64 {
    let mut gen = rng::substream(seed, rng::PROBE_STREAM);
    let side = 2.0 * (payoff.strike() + 1.0);
    let mut a = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        for x in a.iter_mut().chain(b.iter_mut()) {
            *x = side * rng::uniform(&mut gen);
        }
        let ta = rng::uniform(&mut gen);
        let tb = rng::uniform(&mut gen);
        let (late, early, t_late, t_early) = if ta >= tb { (&a, &b, ta, tb) } else { (&b, &a, tb, ta) };
        let dist: f64 = late.iter().zip(early.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>()
            + (t_late - t_early) * (1.0 + late.iter().map(|x| x.abs()).sum::<f64>());
        if dist == 0.0 {
            continue;
        }
        let diff = (payoff.eval(late, t_late) - payoff.eval(early, t_early)).abs();
        worst = worst.max(diff / dist);
    }
    worst
}

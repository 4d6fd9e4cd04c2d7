use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::rng;

/// Default seed for sampler-based moment estimates.
pub const DEFAULT_SAMPLER_SEED: u64 = 0x6a75_6d70;

/// Law of the relative jump sizes `U`, with values in `(-1, inf)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    /// Finitely many atoms with their probabilities.
    Discrete { values: Vec<Vec<f64>>, probs: Vec<f64> },
    /// A seedable generator. The user is responsible for the law having
    /// finite second moments; this cannot be checked from samples.
    Sampler {
        sampler: JumpSampler,
        #[serde(default = "default_sampler_seed")]
        seed: u64,
    },
}

fn default_sampler_seed() -> u64 {
    DEFAULT_SAMPLER_SEED
}

/// Built-in jump generators. Coordinates are drawn independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpSampler {
    /// `U_i ~ Uniform(low_i, high_i)`.
    Uniform { low: Vec<f64>, high: Vec<f64> },
    /// `log(1 + U_i) ~ Normal(mean_i, std_i^2)`, the classical Merton jump.
    LogNormal { mean: Vec<f64>, std: Vec<f64> },
}

impl JumpSampler {
    pub fn dim(&self) -> usize {
        match self {
            JumpSampler::Uniform { low, .. } => low.len(),
            JumpSampler::LogNormal { mean, .. } => mean.len(),
        }
    }

    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        match self {
            JumpSampler::Uniform { low, high } => {
                check_len("jumps.sampler.high", low.len(), high.len())?;
                for (i, (&a, &b)) in low.iter().zip(high).enumerate() {
                    if !(a.is_finite() && b.is_finite() && a < b) {
                        return Err(ModelError::InvalidParameter {
                            name: "jumps.sampler.low/high",
                            value: a,
                            reason: "need finite low < high",
                        });
                    }
                    if a <= -1.0 {
                        return Err(ModelError::JumpBelowMinusOne { atom: 0, component: i, value: a });
                    }
                }
            }
            JumpSampler::LogNormal { mean, std } => {
                check_len("jumps.sampler.std", mean.len(), std.len())?;
                for (&m, &s) in mean.iter().zip(std) {
                    if !(m.is_finite() && s.is_finite() && s >= 0.0) {
                        return Err(ModelError::InvalidParameter {
                            name: "jumps.sampler.mean/std",
                            value: s,
                            reason: "need finite mean and std >= 0",
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            JumpSampler::Uniform { low, high } => {
                for ((o, &a), &b) in out.iter_mut().zip(low).zip(high) {
                    *o = a + (b - a) * rng::uniform(rng);
                }
            }
            JumpSampler::LogNormal { mean, std } => {
                for ((o, &m), &s) in out.iter_mut().zip(mean).zip(std) {
                    *o = (m + s * rng::standard_normal(rng)).exp_m1();
                }
            }
        }
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), ModelError> {
    if expected != found {
        return Err(ModelError::DimensionMismatch { what, expected, found });
    }
    Ok(())
}

impl JumpLaw {
    pub fn dim(&self) -> usize {
        match self {
            JumpLaw::Discrete { values, .. } => values.first().map_or(0, Vec::len),
            JumpLaw::Sampler { sampler, .. } => sampler.dim(),
        }
    }

    /// A single deterministic jump vector.
    pub fn deterministic(u: Vec<f64>) -> Self {
        JumpLaw::Discrete { values: vec![u], probs: vec![1.0] }
    }

    /// Checks support and probabilities against dimension `d`; returns the
    /// law with probabilities renormalized to sum to one.
    pub(crate) fn validated(&self, d: usize) -> Result<JumpLaw, ModelError> {
        match self {
            JumpLaw::Discrete { values, probs } => {
                if values.is_empty() {
                    return Err(ModelError::BadProbabilities("jump law has no atoms".into()));
                }
                if values.len() != probs.len() {
                    return Err(ModelError::BadProbabilities(format!(
                        "{} atoms but {} probabilities",
                        values.len(),
                        probs.len()
                    )));
                }
                for (atom, v) in values.iter().enumerate() {
                    check_len("jumps.values[..]", d, v.len())?;
                    for (component, &x) in v.iter().enumerate() {
                        if !(x > -1.0 && x.is_finite()) {
                            return Err(ModelError::JumpBelowMinusOne { atom, component, value: x });
                        }
                    }
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(ModelError::BadProbabilities("probabilities must be finite and >= 0".into()));
                }
                let total = crate::numeric::compensated_sum(probs.iter().copied());
                if (total - 1.0).abs() > 1e-9 {
                    return Err(ModelError::BadProbabilities(format!("probabilities sum to {total}")));
                }
                let probs = if total == 1.0 {
                    probs.clone()
                } else {
                    probs.iter().map(|p| p / total).collect()
                };
                Ok(JumpLaw::Discrete { values: values.clone(), probs })
            }
            JumpLaw::Sampler { sampler, .. } => {
                check_len("jumps.sampler", d, sampler.dim())?;
                sampler.validate()?;
                Ok(self.clone())
            }
        }
    }

    /// Draws one jump vector. Discrete laws are sampled by CDF inversion.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            JumpLaw::Discrete { values, probs } => {
                let u = rng::uniform(rng);
                let mut cdf = 0.0;
                let mut pick = values.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    cdf += p;
                    if u < cdf {
                        pick = i;
                        break;
                    }
                }
                out.copy_from_slice(&values[pick]);
            }
            JumpLaw::Sampler { sampler, .. } => sampler.sample_into(rng, out),
        }
    }
}

//! Ladders of lattice prices against a reference and an empirical error rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{discretize_jumps, JumpMode};
use crate::model::{JumpLaw, MertonModel, Payoff, PayoffFamily};
use crate::montecarlo::{
    black_scholes, lsmc_american, mc_european, poisson_mixture_european, MCConfig, MCEstimate, McError, OptionKind,
};
use crate::pricer::{price_american, price_european, ExerciseStyle, PricerConfig, PricerError};

/// Errors below this are treated as exact agreement and left out of the fit.
pub const EXACT_FLOOR: f64 = 1e-14;

/// Rate that the lattice error is checked against.
pub const SHAPE_RATE: f64 = 0.125;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvergenceError {
    #[error("ladder needs at least 3 strictly increasing values of n, got {0:?}")]
    InsufficientLadder(Vec<usize>),
    #[error("fewer than two errors above {EXACT_FLOOR:e}; report exact agreement instead")]
    DegenerateFit,
    #[error("no {mode:?} reference for this study: {reason}")]
    UnsupportedReference { mode: ReferenceMode, reason: String },
    #[error(transparent)]
    Pricer(#[from] PricerError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    ClosedForm,
    MonteCarlo,
    Richardson,
}

impl ReferenceMode {
    pub fn label(self) -> &'static str {
        match self {
            ReferenceMode::ClosedForm => "closed_form",
            ReferenceMode::MonteCarlo => "mc",
            ReferenceMode::Richardson => "richardson",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub n_list: Vec<usize>,
    pub style: ExerciseStyle,
    pub reference: ReferenceMode,
    pub jump_mode: JumpMode,
    pub tail_samples: usize,
    /// Assumed error order for Richardson extrapolation.
    pub richardson_order: f64,
    /// Cross-check an American Richardson reference against LSMC.
    pub lsmc_band: bool,
    pub pricer: PricerConfig,
}

impl StudySpec {
    pub fn new(n_list: Vec<usize>, style: ExerciseStyle, reference: ReferenceMode) -> Self {
        Self {
            n_list,
            style,
            reference,
            jump_mode: JumpMode::Native,
            tail_samples: 100_000,
            richardson_order: 1.0,
            lsmc_band: false,
            pricer: PricerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub n: usize,
    pub value: f64,
    pub error: f64,
    pub seconds: f64,
    pub final_states: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub value: f64,
    pub mode: ReferenceMode,
    /// 99% half-width for Monte Carlo references.
    pub half_width: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub c: f64,
    pub beta: f64,
    /// Residual standard error of the log-log regression.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SanityBand {
    pub lsmc: MCEstimate,
    /// Allowed distance: LSMC half-width plus the last ladder increment.
    pub tolerance: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub style: ExerciseStyle,
    pub rows: Vec<LadderRow>,
    pub reference: Reference,
    /// `None` when every error is below [`EXACT_FLOOR`].
    pub fit: Option<RateFit>,
    /// `max_n e_n n^{1/8}`.
    pub max_scaled_error: f64,
    /// Ladder steps where the error did not strictly decrease.
    pub inversions: usize,
    pub shape_consistent: bool,
    pub sanity: Option<SanityBand>,
}

impl ConvergenceReport {
    pub fn errors(&self) -> Vec<(usize, f64)> {
        self.rows.iter().map(|r| (r.n, r.error)).collect()
    }
}

/// `(2^p V_b - V_a) / (2^p - 1)` for `V_a` at `n` and `V_b` at `2n`.
pub fn richardson(v_a: f64, v_b: f64, p: f64) -> f64 {
    richardson_ratio(v_a, v_b, 2.0, p)
}

/// Extrapolation for `V_b` at `ratio` times the steps of `V_a`.
pub fn richardson_ratio(v_a: f64, v_b: f64, ratio: f64, p: f64) -> f64 {
    if v_a == v_b {
        return v_a;
    }
    let w = ratio.powf(p);
    (w * v_b - v_a) / (w - 1.0)
}

/// Least squares of `log e` on `log n`: `e ~ C n^{-beta}`. Points with
/// `e < EXACT_FLOOR` are dropped.
pub fn fit_rate(pairs: &[(usize, f64)]) -> Result<RateFit, ConvergenceError> {
    let pts: Vec<(f64, f64)> =
        pairs.iter().filter(|(_, e)| *e >= EXACT_FLOOR).map(|&(n, e)| ((n as f64).ln(), e.ln())).collect();
    let m = pts.len();
    if m < 2 {
        return Err(ConvergenceError::DegenerateFit);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(ConvergenceError::DegenerateFit);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = if m > 2 {
        let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (ssr / (m - 2) as f64).sqrt()
    } else {
        0.0
    };
    Ok(RateFit { c: intercept.exp(), beta: -slope, residual })
}

/// Steps `k` with `e_{k+1} >= e_k`, ignoring pairs that are both exact.
pub fn count_inversions(errors: &[f64]) -> usize {
    errors.windows(2).filter(|w| w[1] >= w[0] && !(w[0] < EXACT_FLOOR && w[1] < EXACT_FLOOR)).count()
}

pub fn run_study(
    model: &MertonModel,
    payoff: &Payoff,
    spec: &StudySpec,
    mc: &MCConfig,
) -> Result<ConvergenceReport, ConvergenceError> {
    let ns = &spec.n_list;
    if ns.len() < 3 || ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] == 0 {
        return Err(ConvergenceError::InsufficientLadder(ns.clone()));
    }
    // Fail on an unsupported reference before the expensive part.
    let analytic = match spec.reference {
        ReferenceMode::ClosedForm => Some(closed_form_reference(model, payoff, spec.style)?),
        _ => None,
    };

    let mut prices = Vec::with_capacity(ns.len());
    for &n in ns {
        let jumps = discretize_jumps(model.jumps(), n, spec.jump_mode, spec.tail_samples).map_err(PricerError::from)?;
        let res = match spec.style {
            ExerciseStyle::American => price_american(model, payoff, n, &jumps, &spec.pricer)?,
            ExerciseStyle::European => price_european(model, payoff, n, &jumps, &spec.pricer)?,
        };
        prices.push(res);
    }

    let reference = match spec.reference {
        ReferenceMode::ClosedForm => Reference {
            value: analytic.expect("computed above"),
            mode: ReferenceMode::ClosedForm,
            half_width: None,
            seed: None,
        },
        ReferenceMode::MonteCarlo => {
            let est = match spec.style {
                ExerciseStyle::European => mc_european(model, payoff, mc)?,
                ExerciseStyle::American => lsmc_american(model, payoff, mc)?.estimate,
            };
            Reference {
                value: est.mean,
                mode: ReferenceMode::MonteCarlo,
                half_width: Some(est.half_width()),
                seed: Some(mc.seed),
            }
        }
        ReferenceMode::Richardson => {
            let k = ns.len();
            let ratio = ns[k - 1] as f64 / ns[k - 2] as f64;
            let value = richardson_ratio(prices[k - 2].value, prices[k - 1].value, ratio, spec.richardson_order);
            Reference { value, mode: ReferenceMode::Richardson, half_width: None, seed: None }
        }
    };

    let rows: Vec<LadderRow> = prices
        .iter()
        .map(|p| LadderRow {
            n: p.n,
            value: p.value,
            error: (p.value - reference.value).abs(),
            seconds: p.elapsed.as_secs_f64(),
            final_states: p.final_states(),
        })
        .collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let pairs: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.error)).collect();
    let fit = match fit_rate(&pairs) {
        Ok(f) => Some(f),
        Err(ConvergenceError::DegenerateFit) => None,
        Err(e) => return Err(e),
    };
    let max_scaled_error = rows.iter().map(|r| r.error * (r.n as f64).powf(SHAPE_RATE)).fold(0.0, f64::max);
    let shape_consistent = max_scaled_error.is_finite() && fit.is_none_or(|f| f.beta >= SHAPE_RATE);

    let sanity = if spec.lsmc_band && spec.style == ExerciseStyle::American && spec.reference == ReferenceMode::Richardson
    {
        let lsmc = lsmc_american(model, payoff, mc)?.estimate;
        let k = rows.len();
        let tolerance = lsmc.half_width() + (rows[k - 1].value - rows[k - 2].value).abs();
        let agrees = (reference.value - lsmc.mean).abs() <= tolerance;
        Some(SanityBand { lsmc, tolerance, agrees })
    } else {
        None
    };

    Ok(ConvergenceReport {
        style: spec.style,
        inversions: count_inversions(&errors),
        rows,
        reference,
        fit,
        max_scaled_error,
        shape_consistent,
        sanity,
    })
}

/// Closed-form price of the continuous model, where one exists: constant
/// payoffs, and one-asset calls and puts with no jumps or a single jump size.
/// One-asset American calls coincide with the European ones.
pub fn closed_form_reference(
    model: &MertonModel,
    payoff: &Payoff,
    style: ExerciseStyle,
) -> Result<f64, ConvergenceError> {
    let unsupported = |reason: &str| ConvergenceError::UnsupportedReference {
        mode: ReferenceMode::ClosedForm,
        reason: reason.to_string(),
    };
    let (r, t, k) = (model.rate(), model.horizon(), payoff.strike());
    if payoff.family() == PayoffFamily::Constant {
        let european = (-r * t).exp() * k;
        return Ok(match style {
            ExerciseStyle::European => european,
            ExerciseStyle::American => k.max(european),
        });
    }
    if model.dim() != 1 {
        return Err(unsupported("closed forms cover one asset only"));
    }
    let (kind, scale) = match payoff.family() {
        PayoffFamily::BasketCall => (OptionKind::Call, payoff.weights()[0]),
        PayoffFamily::BasketPut => (OptionKind::Put, payoff.weights()[0]),
        PayoffFamily::MaxCall => (OptionKind::Call, 1.0),
        PayoffFamily::MinPut => (OptionKind::Put, 1.0),
        PayoffFamily::Constant => unreachable!(),
    };
    if scale <= 0.0 {
        return Err(unsupported("basket weight must be positive"));
    }
    if style == ExerciseStyle::American && kind == OptionKind::Put {
        return Err(unsupported("the American put has no closed form"));
    }
    let jump = single_jump(model).ok_or_else(|| unsupported("jump law must have a single atom"))?;
    let sigma = model.vol()[0][0].abs();
    Ok(poisson_mixture_european(kind, scale * model.spot()[0], k, sigma, r, t, model.intensity(), jump))
}

fn single_jump(model: &MertonModel) -> Option<f64> {
    if model.intensity() == 0.0 {
        return Some(0.0);
    }
    match model.jumps() {
        JumpLaw::Discrete { values, probs } => {
            let support: Vec<f64> = values.iter().zip(probs).filter(|(_, p)| **p > 0.0).map(|(v, _)| v[0]).collect();
            let first = *support.first()?;
            support.iter().all(|u| *u == first).then_some(first)
        }
        JumpLaw::Sampler { .. } => None,
    }
}

/// Black-Scholes price for the one-asset, jump-free case.
pub fn black_scholes_reference(model: &MertonModel, kind: OptionKind, strike: f64) -> f64 {
    black_scholes(kind, model.spot()[0], strike, model.vol()[0][0].abs(), model.rate(), model.horizon())
}

//! Backward induction on the recombining multinomial state space.
//!
//! Layer values are stored already discounted to time 0:
//!
//! ```text
//! V_n(x) = e^{-rT} F(S(x), T)
//! V_k(x) = max(e^{-rkT/n} F(S(x), kT/n), sum_b p_b V_{k+1}(x + b))
//! ```
//!
//! The root value is the `n`-step price. Exercise is chosen on ties.

mod compositions;
mod oracle;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::lattice::StateKey;
pub use oracle::{enumerate_stopping_oracle, snell_on_tree, ORACLE_MAX_BRANCHES, ORACLE_MAX_STEPS};

use crate::lattice::{build_lattice, DiscreteJumpLaw, LatticeError, LatticeSpec};
use crate::model::{MertonModel, ModelError, Payoff};
use crate::numeric::{binomial, CompensatedSum};
use compositions::{CompositionCounts, Compositions};

pub const DEFAULT_STATE_BUDGET: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricerError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("state budget exceeded: the last layer holds {states} states, budget is {budget}")]
    StateBudgetExceeded { states: u64, budget: usize },
    #[error("enumeration oracle needs n <= 3 and at most 12 branches (n = {n}, {branches} branches)")]
    TooLarge { n: usize, branches: usize },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExerciseStyle {
    #[default]
    American,
    European,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricerConfig {
    /// Cap on the number of states in the largest layer.
    pub state_budget: usize,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub threads: Option<usize>,
    /// Record the per-step fraction of states where exercise is optimal.
    pub exercise_stats: bool,
}

impl Default for PricerConfig {
    fn default() -> Self {
        Self { state_budget: DEFAULT_STATE_BUDGET, threads: None, exercise_stats: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingResult {
    pub value: f64,
    pub n: usize,
    pub style: ExerciseStyle,
    /// Number of states in layer `k`, `k = 0..=n`.
    pub states_per_step: Vec<usize>,
    /// Whether immediate exercise is optimal at the root (American only).
    pub root_exercise: bool,
    /// Fraction of states of layer `k < n` where exercise is optimal.
    pub exercise_fraction: Option<Vec<f64>>,
    pub elapsed: Duration,
}

impl PricingResult {
    pub fn final_states(&self) -> usize {
        *self.states_per_step.last().expect("at least the root layer")
    }

    pub fn total_states(&self) -> usize {
        self.states_per_step.iter().sum()
    }
}

/// American price `V_n` of the `n`-step market.
pub fn price_american(
    model: &MertonModel,
    payoff: &Payoff,
    n: usize,
    jumps: &DiscreteJumpLaw,
    cfg: &PricerConfig,
) -> Result<PricingResult, PricerError> {
    let spec = build_lattice(model, jumps, n)?;
    price_on_lattice(&spec, model.spot(), payoff, ExerciseStyle::American, cfg)
}

/// European price on the same lattice (no early exercise).
pub fn price_european(
    model: &MertonModel,
    payoff: &Payoff,
    n: usize,
    jumps: &DiscreteJumpLaw,
    cfg: &PricerConfig,
) -> Result<PricingResult, PricerError> {
    let spec = build_lattice(model, jumps, n)?;
    price_on_lattice(&spec, model.spot(), payoff, ExerciseStyle::European, cfg)
}

/// States in the last layer: `C(n + d, d) * C(n + J, J)`.
pub fn final_layer_states(spec: &LatticeSpec) -> Option<u64> {
    let n = spec.steps() as u64;
    let a = binomial(n + spec.diffusion_outcomes() as u64 - 1, spec.diffusion_outcomes() as u64 - 1)?;
    let b = binomial(n + spec.jump_outcomes() as u64 - 1, spec.jump_outcomes() as u64 - 1)?;
    a.checked_mul(b)
}

pub fn price_on_lattice(
    spec: &LatticeSpec,
    spot: &[f64],
    payoff: &Payoff,
    style: ExerciseStyle,
    cfg: &PricerConfig,
) -> Result<PricingResult, PricerError> {
    payoff.check_dimension(spec.dim())?;
    if spot.len() != spec.dim() {
        return Err(ModelError::DimensionMismatch { what: "spot", expected: spec.dim(), found: spot.len() }.into());
    }
    let states = final_layer_states(spec).unwrap_or(u64::MAX);
    if states > cfg.state_budget as u64 {
        return Err(PricerError::StateBudgetExceeded { states, budget: cfg.state_budget });
    }
    match cfg.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| PricerError::ThreadPool(e.to_string()))?;
            Ok(pool.install(|| sweep(spec, spot, payoff, style, cfg.exercise_stats)))
        }
        None => Ok(sweep(spec, spot, payoff, style, cfg.exercise_stats)),
    }
}

/// Per-layer partial products `prod_w f_{w,i}^{c_w}` for every composition.
fn partial_products(comps: &Compositions, powers: &[Vec<Vec<f64>>], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; comps.len() * dim];
    out.par_chunks_mut(dim).enumerate().for_each(|(idx, row)| {
        let comp = comps.get(idx);
        for (i, slot) in row.iter_mut().enumerate() {
            *slot = comp.iter().zip(powers).fold(1.0, |acc, (&c, pw)| acc * pw[c as usize][i]);
        }
    });
    out
}

/// `powers[w][c][i] = factors[w][i]^c`, `c = 0..=n`.
fn power_table(factors: &[Vec<f64>], n: usize) -> Vec<Vec<Vec<f64>>> {
    factors
        .iter()
        .map(|f| (0..=n).map(|c| f.iter().map(|x| x.powi(c as i32)).collect()).collect())
        .collect()
}

fn sweep(spec: &LatticeSpec, spot: &[f64], payoff: &Payoff, style: ExerciseStyle, stats: bool) -> PricingResult {
    let start = Instant::now();
    let n = spec.steps();
    let dim = spec.dim();
    let pd = spec.diffusion_outcomes();
    let pj = spec.jump_outcomes();
    let dcounts = CompositionCounts::new(n, pd);
    let jcounts = CompositionCounts::new(n, pj);
    let dpow = power_table(spec.diffusion_factors(), n);
    let jpow = power_table(spec.jump_factors(), n);
    let probs: Vec<f64> = spec.branches().iter().map(|b| b.prob).collect();
    let dt = spec.dt();

    let layer_prices = |dcomps: &Compositions, jcomps: &Compositions| {
        (partial_products(dcomps, &dpow, dim), partial_products(jcomps, &jpow, dim))
    };

    let mut states_per_step = vec![0usize; n + 1];
    let mut exercise_fraction = vec![0.0; n];

    // Terminal layer.
    let mut dcomps = Compositions::new(n, pd);
    let mut jcomps = Compositions::new(n, pj);
    let (dpart, jpart) = layer_prices(&dcomps, &jcomps);
    let nj = jcomps.len();
    let disc = spec.discount(n);
    let t_end = spec.horizon();
    let mut next = vec![0.0; dcomps.len() * nj];
    next.par_chunks_mut(nj).enumerate().for_each(|(di, out)| {
        let mut s = vec![0.0; dim];
        for (ji, slot) in out.iter_mut().enumerate() {
            for i in 0..dim {
                s[i] = spot[i] * dpart[di * dim + i] * jpart[ji * dim + i];
            }
            *slot = disc * payoff.eval(&s, t_end);
        }
    });
    states_per_step[n] = next.len();

    let mut root_exercise = false;
    for k in (0..n).rev() {
        let dlayer = Compositions::new(k, pd);
        let jlayer = Compositions::new(k, pj);
        let dsucc = dlayer.successors(&dcounts);
        let jsucc = jlayer.successors(&jcounts);
        let nj_next = jcomps.len();
        let nj = jlayer.len();
        let american = style == ExerciseStyle::American;
        let (dpart, jpart) = if american { layer_prices(&dlayer, &jlayer) } else { (Vec::new(), Vec::new()) };
        let disc = spec.discount(k);
        let t = dt * k as f64;
        let mut cur = vec![0.0; dlayer.len() * nj];
        let exercised: usize = cur
            .par_chunks_mut(nj)
            .enumerate()
            .map(|(di, out)| {
                let mut s = vec![0.0; dim];
                let mut count = 0usize;
                for (ji, slot) in out.iter_mut().enumerate() {
                    let mut acc = CompensatedSum::new();
                    for w in 0..pd {
                        let base = dsucc[di * pd + w] * nj_next;
                        for m in 0..pj {
                            acc.add(probs[w * pj + m] * next[base + jsucc[ji * pj + m]]);
                        }
                    }
                    let continuation = acc.value();
                    if american {
                        for i in 0..dim {
                            s[i] = spot[i] * dpart[di * dim + i] * jpart[ji * dim + i];
                        }
                        let immediate = disc * payoff.eval(&s, t);
                        if immediate >= continuation {
                            *slot = immediate;
                            count += 1;
                        } else {
                            *slot = continuation;
                        }
                    } else {
                        *slot = continuation;
                    }
                }
                count
            })
            .sum();
        states_per_step[k] = cur.len();
        exercise_fraction[k] = exercised as f64 / cur.len() as f64;
        if k == 0 {
            root_exercise = american && exercised == 1;
        }
        next = cur;
        dcomps = dlayer;
        jcomps = jlayer;
    }
    debug_assert_eq!(dcomps.len() * jcomps.len(), 1);

    PricingResult {
        value: next[0],
        n,
        style,
        states_per_step,
        root_exercise,
        exercise_fraction: (stats && style == ExerciseStyle::American).then_some(exercise_fraction),
        elapsed: start.elapsed(),
    }
}

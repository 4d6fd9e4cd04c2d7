//! Regression-based American estimator.
//!
//! A stopping rule is fitted on one set of paths by regressing realized
//! discounted cash flows on polynomials of the in-the-money states, then
//! evaluated on a fresh set of paths. The out-of-sample value is the value
//! of a feasible stopping rule and therefore biased low.

use nalgebra::{DMatrix, DVector};

use super::{simulate_grid_paths_from, GridPaths, MCConfig, MCEstimate, McError};
use crate::model::{MertonModel, Payoff};

pub const RIDGE_PENALTY: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LsmcResult {
    pub estimate: MCEstimate,
    /// The fitted rule stops at time 0.
    pub exercise_at_start: bool,
    /// Steps whose regression needed the ridge fallback.
    pub ridge_steps: Vec<usize>,
    /// Steps with too few in-the-money paths to regress (never exercised).
    pub skipped_steps: Vec<usize>,
}

/// Exponent vectors of all monomials of total degree `<= degree` in `dim` variables.
fn monomials(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == dim {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e as u32);
            rec(dim, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, degree, &mut Vec::new(), &mut out);
    out
}

fn basis_row(exps: &[Vec<u32>], x: &[f64], out: &mut [f64]) {
    for (o, e) in out.iter_mut().zip(exps) {
        *o = e.iter().zip(x).fold(1.0, |acc, (&k, v)| acc * v.powi(k as i32));
    }
}

struct Rule {
    exps: Vec<Vec<u32>>,
    /// Coefficients per exercise date; `None` means never exercise there.
    coeffs: Vec<Option<DVector<f64>>>,
    scale: Vec<f64>,
}

impl Rule {
    fn continuation(&self, k: usize, state: &[f64], buf: &mut [f64], x: &mut [f64]) -> Option<f64> {
        let beta = self.coeffs[k].as_ref()?;
        for ((xi, s), c) in x.iter_mut().zip(state).zip(&self.scale) {
            *xi = s / c;
        }
        basis_row(&self.exps, x, buf);
        Some(buf.iter().zip(beta.iter()).map(|(a, b)| a * b).sum())
    }
}

pub fn lsmc_american(model: &MertonModel, payoff: &Payoff, cfg: &MCConfig) -> Result<LsmcResult, McError> {
    cfg.validate()?;
    if cfg.steps < 2 {
        return Err(McError::InvalidConfig("regression estimator needs steps >= 2".into()));
    }
    payoff.check_dimension(model.dim())?;
    let d = model.dim();
    let steps = cfg.steps;
    let dt = model.horizon() / steps as f64;
    let disc = |k: usize| (-model.rate() * dt * k as f64).exp();
    let exps = monomials(d, cfg.basis_degree);
    let nb = exps.len();

    let train = simulate_grid_paths_from(model, steps, cfg.seed, 0, cfg.paths);
    let mut cash: Vec<f64> =
        (0..train.count).map(|p| disc(steps) * payoff.eval(train.state(p, steps), model.horizon())).collect();
    let mut rule = Rule { exps, coeffs: vec![None; steps], scale: model.spot().to_vec() };
    let mut ridge_steps = Vec::new();
    let mut skipped_steps = Vec::new();
    let mut row = vec![0.0; nb];
    let mut x = vec![0.0; d];

    for k in (1..steps).rev() {
        let t = dt * k as f64;
        let itm: Vec<(usize, f64)> = (0..train.count)
            .filter_map(|p| {
                let f = payoff.eval(train.state(p, k), t);
                (f > 0.0).then_some((p, disc(k) * f))
            })
            .collect();
        if itm.len() < 2 * nb {
            skipped_steps.push(k);
            continue;
        }
        let mut gram = DMatrix::<f64>::zeros(nb, nb);
        let mut rhs = DVector::<f64>::zeros(nb);
        for &(p, _) in &itm {
            for ((xi, s), c) in x.iter_mut().zip(train.state(p, k)).zip(&rule.scale) {
                *xi = s / c;
            }
            basis_row(&rule.exps, &x, &mut row);
            for a in 0..nb {
                rhs[a] += row[a] * cash[p];
                for b in 0..=a {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..nb {
            for b in 0..a {
                gram[(b, a)] = gram[(a, b)];
            }
        }
        let beta = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                ridge_steps.push(k);
                let ridged = gram + DMatrix::identity(nb, nb) * RIDGE_PENALTY;
                ridged.cholesky().ok_or(McError::RegressionSingular { step: k })?.solve(&rhs)
            }
        };
        rule.coeffs[k] = Some(beta);
        let mut buf = vec![0.0; nb];
        for &(p, exercise) in &itm {
            let cont = rule.continuation(k, train.state(p, k), &mut buf, &mut x).expect("fitted");
            if exercise >= cont {
                cash[p] = exercise;
            }
        }
    }

    let held = MCEstimate::from_samples(&cash, cfg.seed).mean;
    let immediate = payoff.eval(model.spot(), 0.0);
    if immediate >= held {
        let estimate = MCEstimate { mean: immediate, stderr: 0.0, paths: cfg.paths, seed: cfg.seed };
        return Ok(LsmcResult { estimate, exercise_at_start: true, ridge_steps, skipped_steps });
    }

    let test = simulate_grid_paths_from(model, steps, cfg.seed, cfg.paths as u64, cfg.paths);
    let values = evaluate_rule(&rule, &test, payoff, model, &disc);
    Ok(LsmcResult {
        estimate: MCEstimate::from_samples(&values, cfg.seed),
        exercise_at_start: false,
        ridge_steps,
        skipped_steps,
    })
}

fn evaluate_rule(rule: &Rule, paths: &GridPaths, payoff: &Payoff, model: &MertonModel, disc: &dyn Fn(usize) -> f64) -> Vec<f64> {
    let steps = paths.steps;
    let dt = model.horizon() / steps as f64;
    let nb = rule.exps.len();
    let mut buf = vec![0.0; nb];
    let mut x = vec![0.0; paths.dim];
    (0..paths.count)
        .map(|p| {
            for k in 1..steps {
                let f = payoff.eval(paths.state(p, k), dt * k as f64);
                if f <= 0.0 {
                    continue;
                }
                let exercise = disc(k) * f;
                if let Some(cont) = rule.continuation(k, paths.state(p, k), &mut buf, &mut x) {
                    if exercise >= cont {
                        return exercise;
                    }
                }
            }
            disc(steps) * payoff.eval(paths.state(p, steps), model.horizon())
        })
        .collect()
}

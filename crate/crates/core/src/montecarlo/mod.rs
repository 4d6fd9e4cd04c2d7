//! Simulation of the continuous model and reference prices.
//!
//! Path `i` draws only from substream `(seed, i)`, so results do not depend
//! on how paths are spread over threads. Per-path values are collected in
//! path order and reduced sequentially.

mod closed_form;
mod lsmc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use closed_form::{black_scholes, norm_cdf, poisson_mixture_european, OptionKind, MIXTURE_TAIL};
pub use lsmc::{lsmc_american, LsmcResult, RIDGE_PENALTY};

use crate::model::{MertonModel, ModelError, Payoff};
use crate::numeric::CompensatedSum;
use crate::rng::{self, StreamRng};

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.576;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("invalid Monte Carlo config: {0}")]
    InvalidConfig(String),
    #[error("regression at step {step} is singular even with ridge penalty")]
    RegressionSingular { step: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MCConfig {
    pub paths: usize,
    /// Exercise dates `T/steps, 2T/steps, ..., T` for the regression estimator.
    pub steps: usize,
    pub seed: u64,
    #[serde(default = "default_basis_degree")]
    pub basis_degree: usize,
}

fn default_basis_degree() -> usize {
    2
}

impl Default for MCConfig {
    fn default() -> Self {
        Self { paths: 100_000, steps: 50, seed: 20_091_120, basis_degree: 2 }
    }
}

impl MCConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if self.paths < 100 {
            return Err(McError::InvalidConfig(format!("paths = {} < 100", self.paths)));
        }
        if self.steps < 1 {
            return Err(McError::InvalidConfig("steps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    pub seed: u64,
}

impl MCEstimate {
    /// Half-width of the 99% confidence interval.
    pub fn half_width(&self) -> f64 {
        Z99 * self.stderr
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width()
    }

    /// Mean and standard error of per-path values, reduced in path order.
    pub fn from_samples(values: &[f64], seed: u64) -> Self {
        let n = values.len();
        let first = values[0];
        if values.iter().all(|v| *v == first) {
            return Self { mean: first, stderr: 0.0, paths: n, seed };
        }
        let mut sum = CompensatedSum::new();
        for v in values {
            sum.add(*v);
        }
        let mean = sum.value() / n as f64;
        let mut sq = CompensatedSum::new();
        for v in values {
            sq.add((v - mean) * (v - mean));
        }
        let var = sq.value() / (n - 1) as f64;
        Self { mean, stderr: (var / n as f64).sqrt(), paths: n, seed }
    }
}

/// Row-major `rows x cols` matrix of simulated values.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl PathMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Simulated paths on the grid `{0, T/steps, ..., T}`; the state of path
/// `p` at grid index `k` is `row(p)[k*d..(k+1)*d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPaths {
    pub count: usize,
    pub steps: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl GridPaths {
    pub fn state(&self, path: usize, k: usize) -> &[f64] {
        let stride = (self.steps + 1) * self.dim;
        let start = path * stride + k * self.dim;
        &self.data[start..start + self.dim]
    }
}

/// Per-asset deterministic log-drift rate `r + mu_i - sum_j sigma_ij^2 / 2`.
fn log_drift(model: &MertonModel) -> Vec<f64> {
    model
        .drift()
        .iter()
        .zip(model.total_variance_rate())
        .map(|(mu, v)| model.rate() + mu - 0.5 * v)
        .collect()
}

/// Advances `state` over an interval of length `dt` with exact lognormal
/// increments and a Poisson number of jumps.
fn step_exact(
    model: &MertonModel,
    drift: &[f64],
    dt: f64,
    rng: &mut StreamRng,
    normals: &mut [f64],
    jump: &mut [f64],
    state: &mut [f64],
) {
    let sqrt_dt = dt.sqrt();
    for z in normals.iter_mut() {
        *z = sqrt_dt * rng::standard_normal(rng);
    }
    let count = rng::poisson_inversion(rng, model.intensity() * dt);
    for (i, s) in state.iter_mut().enumerate() {
        let shock: f64 = model.vol()[i].iter().zip(normals.iter()).map(|(a, w)| a * w).sum();
        *s *= (drift[i] * dt + shock).exp();
    }
    for _ in 0..count {
        model.jumps().sample_into(rng, jump);
        for (s, u) in state.iter_mut().zip(jump.iter()) {
            *s *= 1.0 + *u;
        }
    }
}

fn terminal_into(model: &MertonModel, drift: &[f64], seed: u64, path: u64, out: &mut [f64]) {
    let d = model.dim();
    let mut rng = rng::substream(seed, path);
    let mut normals = vec![0.0; d];
    let mut jump = vec![0.0; d];
    out.copy_from_slice(model.spot());
    step_exact(model, drift, model.horizon(), &mut rng, &mut normals, &mut jump, out);
}

/// `count` independent draws of `S(T)`, one row per path.
pub fn simulate_terminal(model: &MertonModel, seed: u64, count: usize) -> PathMatrix {
    let d = model.dim();
    let drift = log_drift(model);
    let mut data = vec![0.0; count * d];
    data.par_chunks_mut(d).enumerate().for_each(|(p, row)| terminal_into(model, &drift, seed, p as u64, row));
    PathMatrix { rows: count, cols: d, data }
}

/// Paths on `{0, T/steps, ..., T}` using streams `first..first + count`.
pub fn simulate_grid_paths_from(model: &MertonModel, steps: usize, seed: u64, first: u64, count: usize) -> GridPaths {
    let d = model.dim();
    let drift = log_drift(model);
    let dt = model.horizon() / steps as f64;
    let stride = (steps + 1) * d;
    let mut data = vec![0.0; count * stride];
    data.par_chunks_mut(stride).enumerate().for_each(|(p, row)| {
        let mut rng = rng::substream(seed, first + p as u64);
        let mut normals = vec![0.0; d];
        let mut jump = vec![0.0; d];
        let mut state = model.spot().to_vec();
        row[..d].copy_from_slice(&state);
        for k in 1..=steps {
            step_exact(model, &drift, dt, &mut rng, &mut normals, &mut jump, &mut state);
            row[k * d..(k + 1) * d].copy_from_slice(&state);
        }
    });
    GridPaths { count, steps, dim: d, data }
}

pub fn simulate_grid_paths(model: &MertonModel, steps: usize, seed: u64, count: usize) -> GridPaths {
    simulate_grid_paths_from(model, steps, seed, 0, count)
}

/// Monte Carlo estimate of `e^{-rT} E[F(S(T), T)]`.
pub fn mc_european(model: &MertonModel, payoff: &Payoff, cfg: &MCConfig) -> Result<MCEstimate, McError> {
    cfg.validate()?;
    payoff.check_dimension(model.dim())?;
    let d = model.dim();
    let drift = log_drift(model);
    let df = (-model.rate() * model.horizon()).exp();
    let values: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |s, p| {
                terminal_into(model, &drift, cfg.seed, p as u64, s);
                df * payoff.eval(s, model.horizon())
            },
        )
        .collect();
    Ok(MCEstimate::from_samples(&values, cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_model, JumpLaw, RawModel};

    fn model(intensity: f64, jump: f64) -> MertonModel {
        validate_model(RawModel {
            spot: vec![1.0],
            rate: 0.05,
            horizon: 1.0,
            vol: vec![vec![0.2]],
            intensity,
            jumps: JumpLaw::deterministic(vec![jump]),
        })
        .unwrap()
    }

    #[test]
    fn lognormal_moments_without_jumps() {
        let m = model(0.0, 0.0);
        let n = 1_000_000;
        let paths = simulate_terminal(&m, 3, n);
        let logs: Vec<f64> = paths.data.iter().map(|s| s.ln()).collect();
        let est = MCEstimate::from_samples(&logs, 3);
        // log S(T) ~ N((r - 0.02) T, 0.04 T)
        assert!((est.mean - 0.03).abs() < 5.0 * est.stderr, "{est:?}");
        let var = est.stderr * est.stderr * n as f64;
        let var_se = 0.04 * (2.0 / n as f64).sqrt();
        assert!((var - 0.04).abs() < 5.0 * var_se, "var {var}");
    }

    #[test]
    fn deterministic_jump_keeps_the_martingale() {
        let m = model(1.0, -0.5);
        let paths = simulate_terminal(&m, 5, 400_000);
        let disc: Vec<f64> = paths.data.iter().map(|s| s * (-0.05f64).exp()).collect();
        let est = MCEstimate::from_samples(&disc, 5);
        assert!((est.mean - 1.0).abs() < 5.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn fixed_seed_is_reproducible_across_thread_counts() {
        let m = model(0.5, -0.25);
        let run = |t| {
            rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(|| simulate_terminal(&m, 9, 5000))
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn grid_paths_end_where_terminal_law_says() {
        let m = model(0.5, -0.25);
        let paths = simulate_grid_paths(&m, 4, 1, 100_000);
        for k in [2, 4] {
            let disc: Vec<f64> = (0..paths.count).map(|p| paths.state(p, k)[0] * (-0.05 * k as f64 / 4.0).exp()).collect();
            let est = MCEstimate::from_samples(&disc, 1);
            assert!((est.mean - 1.0).abs() < 5.0 * est.stderr);
        }
        assert_eq!(paths.state(7, 0), &[1.0]);
    }

    #[test]
    fn constant_payoff_has_zero_error() {
        let m = model(0.5, -0.25);
        let cfg = MCConfig { paths: 1000, ..Default::default() };
        let est = mc_european(&m, &Payoff::constant(2.0), &cfg).unwrap();
        assert_eq!(est.mean, (-0.05f64).exp() * 2.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn config_validation() {
        let cfg = MCConfig { paths: 99, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(McError::InvalidConfig(_))));
        let cfg = MCConfig { steps: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}

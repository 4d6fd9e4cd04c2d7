//! One-step structure of the multinomial market.
//!
//! Each step draws one of `d + 1` equiprobable diffusion outcomes `xi` and,
//! independently, either no jump (probability `1 - p`, `p = 1 - exp(-lambda T / n)`)
//! or jump atom `m` (probability `p q_m`). Asset `i` moves by
//!
//! ```text
//! e^{rT/n} (1 + sqrt(T/n) sum_j sigma_ij xi_j) (1 + u_i if jump) / (1 + p E[u_i])
//! ```
//!
//! and the denominator makes every discounted price a martingale. Because
//! all step factors commute, a node is determined by how often each
//! diffusion outcome and each jump outcome occurred ([`StateKey`]).

mod discretize;
mod xi;

use thiserror::Error;

pub use discretize::{discretize_jumps, DiscreteJumpLaw, JumpGrid, JumpMode, JumpOrigin, LEVEL_CAP_FACTOR};
pub use xi::{build_xi, XiDefects, XiTable, XI_CONSTRUCTION};

use crate::model::{MertonModel, ModelError};
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("step count must be at least 1")]
    ZeroSteps,
    #[error(
        "negative diffusion factor {value} for asset {asset}, outcome {outcome}; increase the step count above {n}"
    )]
    NegativeDiffusionFactor { n: usize, asset: usize, outcome: usize, value: f64 },
    #[error("jump tail not resolvable for n = {n}: no level up to {cap} passes with {samples} samples")]
    TailNotResolvable { n: usize, cap: usize, samples: usize },
    #[error("native jump mode needs a discrete jump law")]
    NativeRequiresDiscrete,
    #[error("jump law has dimension {found}, model has {expected}")]
    JumpDimension { expected: usize, found: usize },
    #[error("state counts inconsistent with step {step}: {reason}")]
    InconsistentCounts { step: usize, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A lattice node: step index with diffusion and jump outcome counts.
///
/// `diffusion[w]` counts outcome `w` of `d + 1`; `jumps[0]` counts steps
/// without a jump and `jumps[m]` steps with atom `m`. Both sum to `step`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateKey {
    pub step: usize,
    pub diffusion: Vec<u32>,
    pub jumps: Vec<u32>,
}

impl StateKey {
    pub fn root(spec: &LatticeSpec) -> Self {
        Self {
            step: 0,
            diffusion: vec![0; spec.diffusion_outcomes()],
            jumps: vec![0; spec.jump_outcomes()],
        }
    }

    /// The node reached by taking branch `(w, m)`.
    pub fn advance(&self, w: usize, m: usize) -> Self {
        let mut next = self.clone();
        next.step += 1;
        next.diffusion[w] += 1;
        next.jumps[m] += 1;
        next
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Diffusion outcome index.
    pub diffusion: usize,
    /// Jump outcome; 0 means no jump.
    pub jump: usize,
    pub prob: f64,
    /// Per-asset multiplicative factor.
    pub factor: Vec<f64>,
}

/// The per-step branch set of an `n`-step lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    n: usize,
    dim: usize,
    rate: f64,
    horizon: f64,
    dt: f64,
    jump_prob: f64,
    xi: XiTable,
    denom: Vec<f64>,
    diffusion_factors: Vec<Vec<f64>>,
    jump_factors: Vec<Vec<f64>>,
    jump_probs: Vec<f64>,
    branches: Vec<Branch>,
}

/// Builds the branch set for `n` steps. A zero diffusion factor is allowed
/// (the asset is absorbed at 0); a negative one is an error.
pub fn build_lattice(model: &MertonModel, jumps: &DiscreteJumpLaw, n: usize) -> Result<LatticeSpec, LatticeError> {
    build_lattice_with_xi(model, jumps, n, build_xi(model.dim()))
}

pub fn build_lattice_with_xi(
    model: &MertonModel,
    jumps: &DiscreteJumpLaw,
    n: usize,
    xi: XiTable,
) -> Result<LatticeSpec, LatticeError> {
    if n == 0 {
        return Err(LatticeError::ZeroSteps);
    }
    let d = model.dim();
    if jumps.dim() != d {
        return Err(LatticeError::JumpDimension { expected: d, found: jumps.dim() });
    }
    assert_eq!(xi.dim(), d, "xi table dimension");
    let horizon = model.horizon();
    let dt = horizon / n as f64;
    let sqrt_dt = dt.sqrt();
    let growth = (model.rate() * dt).exp();
    let jump_prob = if model.intensity() > 0.0 { -(-model.intensity() * dt).exp_m1() } else { 0.0 };

    let denom: Vec<f64> = jumps.mean().iter().map(|m| 1.0 + jump_prob * m).collect();

    let mut diffusion_factors = Vec::with_capacity(d + 1);
    for (outcome, row) in xi.rows().iter().enumerate() {
        let mut factors = Vec::with_capacity(d);
        for (asset, sigma) in model.vol().iter().enumerate() {
            let shock: f64 = sigma.iter().zip(row).map(|(s, x)| s * x).sum();
            let base = 1.0 + sqrt_dt * shock;
            if base < 0.0 {
                return Err(LatticeError::NegativeDiffusionFactor { n, asset, outcome, value: base });
            }
            factors.push(growth * base / denom[asset]);
        }
        diffusion_factors.push(factors);
    }

    let mut jump_factors = vec![vec![1.0; d]];
    let mut jump_probs = vec![1.0 - jump_prob];
    if jump_prob > 0.0 {
        for (v, q) in jumps.values().iter().zip(jumps.probs()) {
            jump_factors.push(v.iter().map(|u| 1.0 + u).collect());
            jump_probs.push(jump_prob * q);
        }
    }

    let pd = 1.0 / (d + 1) as f64;
    let mut branches = Vec::with_capacity((d + 1) * jump_probs.len());
    for (w, df) in diffusion_factors.iter().enumerate() {
        for (m, (jf, q)) in jump_factors.iter().zip(&jump_probs).enumerate() {
            branches.push(Branch {
                diffusion: w,
                jump: m,
                prob: pd * q,
                factor: df.iter().zip(jf).map(|(a, b)| a * b).collect(),
            });
        }
    }

    Ok(LatticeSpec {
        n,
        dim: d,
        rate: model.rate(),
        horizon,
        dt,
        jump_prob,
        xi,
        denom,
        diffusion_factors,
        jump_factors,
        jump_probs,
        branches,
    })
}

impl LatticeSpec {
    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Per-step jump probability `1 - exp(-lambda T / n)`.
    pub fn jump_prob(&self) -> f64 {
        self.jump_prob
    }

    pub fn xi(&self) -> &XiTable {
        &self.xi
    }

    /// `1 + p E[u_i]` for each asset.
    pub fn denom(&self) -> &[f64] {
        &self.denom
    }

    pub fn diffusion_outcomes(&self) -> usize {
        self.diffusion_factors.len()
    }

    /// `J + 1`, or 1 when there are no jumps.
    pub fn jump_outcomes(&self) -> usize {
        self.jump_factors.len()
    }

    /// Diffusion part of the step factor, `e^{rT/n}(1 + sqrt(T/n) sigma xi) / denom`.
    pub fn diffusion_factors(&self) -> &[Vec<f64>] {
        &self.diffusion_factors
    }

    /// Jump part of the step factor; row 0 is the no-jump outcome.
    pub fn jump_factors(&self) -> &[Vec<f64>] {
        &self.jump_factors
    }

    pub fn jump_probs(&self) -> &[f64] {
        &self.jump_probs
    }

    /// All `(d+1)(J+1)` branches, diffusion-major.
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// `e^{-r k T / n}`.
    pub fn discount(&self, step: usize) -> f64 {
        (-self.rate * self.dt * step as f64).exp()
    }

    /// Largest deviation of `sum_b p_b f_{b,i} / e^{rT/n}` from 1 over assets.
    pub fn martingale_defect(&self) -> f64 {
        let growth = (self.rate * self.dt).exp();
        (0..self.dim)
            .map(|i| {
                let mut acc = CompensatedSum::new();
                for b in &self.branches {
                    acc.add(b.prob * b.factor[i]);
                }
                (acc.value() / growth - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Deviation of the branch probabilities from summing to one.
    pub fn probability_defect(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for b in &self.branches {
            acc.add(b.prob);
        }
        (acc.value() - 1.0).abs()
    }
}

/// Asset prices at a node:
/// `spot_i * prod_w D_{w,i}^{c_w} * prod_m J_{m,i}^{m_m}`.
pub fn state_price(spot: &[f64], key: &StateKey, spec: &LatticeSpec) -> Result<Vec<f64>, LatticeError> {
    let inconsistent = |reason: String| LatticeError::InconsistentCounts { step: key.step, reason };
    if key.diffusion.len() != spec.diffusion_outcomes() {
        return Err(inconsistent(format!(
            "{} diffusion counts, expected {}",
            key.diffusion.len(),
            spec.diffusion_outcomes()
        )));
    }
    if key.jumps.len() != spec.jump_outcomes() {
        return Err(inconsistent(format!("{} jump counts, expected {}", key.jumps.len(), spec.jump_outcomes())));
    }
    let sd: u64 = key.diffusion.iter().map(|&c| c as u64).sum();
    let sj: u64 = key.jumps.iter().map(|&c| c as u64).sum();
    if sd != key.step as u64 || sj != key.step as u64 {
        return Err(inconsistent(format!("diffusion counts sum to {sd}, jump counts to {sj}")));
    }
    if key.step > spec.steps() {
        return Err(inconsistent(format!("beyond the last step {}", spec.steps())));
    }
    if spot.len() != spec.dim() {
        return Err(inconsistent(format!("spot has {} assets, lattice {}", spot.len(), spec.dim())));
    }
    Ok((0..spec.dim())
        .map(|i| {
            let diffusion = diffusion_part(spec, &key.diffusion, i);
            let jump = jump_part(spec, &key.jumps, i);
            spot[i] * diffusion * jump
        })
        .collect())
}

#[inline]
pub(crate) fn diffusion_part(spec: &LatticeSpec, counts: &[u32], asset: usize) -> f64 {
    counts
        .iter()
        .zip(&spec.diffusion_factors)
        .fold(1.0, |acc, (&c, f)| acc * f[asset].powi(c as i32))
}

#[inline]
pub(crate) fn jump_part(spec: &LatticeSpec, counts: &[u32], asset: usize) -> f64 {
    counts
        .iter()
        .zip(&spec.jump_factors)
        .fold(1.0, |acc, (&c, f)| acc * f[asset].powi(c as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_model, JumpLaw, RawModel};

    fn unit_model(rate: f64, intensity: f64, jumps: JumpLaw) -> MertonModel {
        validate_model(RawModel { spot: vec![1.0], rate, horizon: 1.0, vol: vec![vec![1.0]], intensity, jumps })
            .unwrap()
    }

    fn native(model: &MertonModel) -> DiscreteJumpLaw {
        discretize_jumps(model.jumps(), 1, JumpMode::Native, 0).unwrap()
    }

    #[test]
    fn one_step_hand_example() {
        let r = 0.03;
        let model = unit_model(r, 0.0, JumpLaw::deterministic(vec![0.2]));
        let spec = build_lattice(&model, &native(&model), 1).unwrap();
        assert_eq!(spec.branches().len(), 2);
        let e = r.exp();
        assert_eq!(spec.branches()[0].factor[0], 0.0);
        assert!((spec.branches()[1].factor[0] - 2.0 * e).abs() < 1e-15);
        assert_eq!(spec.branches()[0].prob, 0.5);
        assert_eq!(spec.branches()[1].prob, 0.5);
        assert!(spec.martingale_defect() < 1e-12);
    }

    #[test]
    fn negative_factor_is_an_error() {
        let model = validate_model(RawModel {
            spot: vec![1.0],
            rate: 0.0,
            horizon: 1.0,
            vol: vec![vec![1.5]],
            intensity: 0.0,
            jumps: JumpLaw::deterministic(vec![0.0]),
        })
        .unwrap();
        let err = build_lattice(&model, &native(&model), 1).unwrap_err();
        assert!(matches!(err, LatticeError::NegativeDiffusionFactor { n: 1, .. }));
        assert!(build_lattice(&model, &native(&model), 3).is_ok());
    }

    #[test]
    fn branch_count_is_product_of_outcomes() {
        let jumps = JumpLaw::Discrete { values: vec![vec![-0.2, 0.1], vec![0.3, -0.1]], probs: vec![0.4, 0.6] };
        let raw = RawModel {
            spot: vec![1.0, 2.0],
            rate: 0.02,
            horizon: 0.5,
            vol: vec![vec![0.3, 0.0], vec![0.1, 0.2]],
            intensity: 1.5,
            jumps,
        };
        let model = validate_model(raw.clone()).unwrap();
        let law = native(&model);
        for n in [1, 7, 50] {
            let spec = build_lattice(&model, &law, n).unwrap();
            assert_eq!(spec.branches().len(), 3 * 3);
            assert!(spec.martingale_defect() < 1e-12);
            assert!(spec.probability_defect() < 1e-12);
        }
        let no_jumps = validate_model(RawModel { intensity: 0.0, ..raw }).unwrap();
        let spec = build_lattice(&no_jumps, &native(&no_jumps), 10).unwrap();
        assert_eq!(spec.branches().len(), 3);
        assert_eq!(spec.jump_outcomes(), 1);
    }

    #[test]
    fn state_price_products() {
        let model = unit_model(0.03, 0.0, JumpLaw::deterministic(vec![0.0]));
        let spec = build_lattice(&model, &native(&model), 1).unwrap();
        let root = StateKey::root(&spec);
        assert_eq!(state_price(&[1.7], &root, &spec).unwrap(), vec![1.7]);
        let up = root.advance(1, 0);
        let price = state_price(&[1.0], &up, &spec).unwrap();
        assert_eq!(price[0], spec.diffusion_factors()[1][0]);
        assert!((price[0] - 2.0 * 0.03f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn state_price_rejects_bad_counts() {
        let model = unit_model(0.03, 0.0, JumpLaw::deterministic(vec![0.0]));
        let spec = build_lattice(&model, &native(&model), 4).unwrap();
        let key = StateKey { step: 2, diffusion: vec![1, 0], jumps: vec![2] };
        assert!(matches!(state_price(&[1.0], &key, &spec), Err(LatticeError::InconsistentCounts { .. })));
        let key = StateKey { step: 1, diffusion: vec![1, 0, 0], jumps: vec![1] };
        assert!(state_price(&[1.0], &key, &spec).is_err());
    }
}

//! Mapping of a jump law onto a finite grid.
//!
//! For `n` steps the grid spacing is `h = n^{-1/8} / 2` and the grid points
//! are `g_k = k h - 1`, `k = 1..=M`. A jump component in the cell
//! `(g_{k-1}, g_k]` moves to `g_k`; components above `g_M` are truncated to
//! zero. `M` is the smallest level whose tail mass
//! `sum_j E[|U_j| 1{U_j > g_M}]` falls below `h`, which bounds
//! `E|U_j - U^n_j|` by `n^{-1/8}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LatticeError;
use crate::model::JumpLaw;
use crate::numeric::accurate_dot;
use crate::rng;

/// Multiplier `c` in the sampler scan cap `ceil(c n^{1/4})`.
pub const LEVEL_CAP_FACTOR: f64 = 64.0;

/// Confidence multiplier applied to the sampled tail estimate.
const TAIL_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpMode {
    /// Use a finite-support law as is (fixed number of growth rates).
    #[default]
    Native,
    /// Map onto the `n`-dependent grid.
    Discretized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpGrid {
    n: usize,
    levels: usize,
    spacing: f64,
}

impl JumpGrid {
    pub fn new(n: usize, levels: usize) -> Self {
        assert!(n >= 1 && levels >= 1);
        Self { n, levels, spacing: 0.5 * (n as f64).powf(-0.125) }
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    /// `M(n)`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `g_k = k h - 1`.
    #[inline]
    pub fn point(&self, k: usize) -> f64 {
        k as f64 * self.spacing - 1.0
    }

    pub fn top(&self) -> f64 {
        self.point(self.levels)
    }

    /// Index `k >= 1` of the cell `(g_{k-1}, g_k]` holding `x`, ignoring the
    /// truncation level.
    pub fn cell_index(&self, x: f64) -> usize {
        let mut k = (((x + 1.0) / self.spacing).ceil() as usize).max(1);
        while k > 1 && x <= self.point(k - 1) {
            k -= 1;
        }
        while x > self.point(k) {
            k += 1;
        }
        k
    }

    /// Cell index, or `None` above the truncation level.
    pub fn cell(&self, x: f64) -> Option<usize> {
        let k = self.cell_index(x);
        (k <= self.levels).then_some(k)
    }

    /// Discretized value of one component.
    #[inline]
    pub fn snap(&self, x: f64) -> f64 {
        self.cell(x).map_or(0.0, |k| self.point(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpOrigin {
    Native,
    Discretized {
        grid: JumpGrid,
        /// Tail mass at the chosen level (estimate for samplers).
        tail: f64,
        /// Draws used, for sampler input.
        samples: Option<usize>,
    },
}

/// A finite-support jump law ready for lattice construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJumpLaw {
    values: Vec<Vec<f64>>,
    probs: Vec<f64>,
    mean: Vec<f64>,
    origin: JumpOrigin,
}

impl DiscreteJumpLaw {
    fn from_parts(values: Vec<Vec<f64>>, probs: Vec<f64>, origin: JumpOrigin) -> Self {
        let d = values.first().map_or(0, Vec::len);
        let mean = (0..d)
            .map(|i| {
                let column: Vec<f64> = values.iter().map(|v| v[i]).collect();
                accurate_dot(&probs, &column)
            })
            .collect();
        Self { values, probs, mean, origin }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of atoms `J`.
    pub fn atoms(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn origin(&self) -> JumpOrigin {
        self.origin
    }

    pub fn grid(&self) -> Option<JumpGrid> {
        match self.origin {
            JumpOrigin::Native => None,
            JumpOrigin::Discretized { grid, .. } => Some(grid),
        }
    }
}

/// Produces the jump law used by an `n`-step lattice.
pub fn discretize_jumps(
    law: &JumpLaw,
    n: usize,
    mode: JumpMode,
    tail_samples: usize,
) -> Result<DiscreteJumpLaw, LatticeError> {
    if n == 0 {
        return Err(LatticeError::ZeroSteps);
    }
    let law = law.validated(law.dim())?;
    match (&law, mode) {
        (JumpLaw::Discrete { values, probs }, JumpMode::Native) => {
            Ok(DiscreteJumpLaw::from_parts(values.clone(), probs.clone(), JumpOrigin::Native))
        }
        (JumpLaw::Sampler { .. }, JumpMode::Native) => Err(LatticeError::NativeRequiresDiscrete),
        (JumpLaw::Discrete { values, probs }, JumpMode::Discretized) => Ok(discretize_atoms(values, probs, n)),
        (JumpLaw::Sampler { seed, .. }, JumpMode::Discretized) => discretize_sampler(&law, *seed, n, tail_samples),
    }
}

fn tail_mass(values: &[Vec<f64>], probs: &[f64], threshold: f64) -> f64 {
    values
        .iter()
        .zip(probs)
        .map(|(v, p)| p * v.iter().filter(|x| **x > threshold).map(|x| x.abs()).sum::<f64>())
        .sum()
}

fn discretize_atoms(values: &[Vec<f64>], probs: &[f64], n: usize) -> DiscreteJumpLaw {
    let probe = JumpGrid::new(n, 1);
    let h = probe.spacing();
    // The tail is a step function of the level that only drops where the
    // grid top passes an atom, so jump between those points.
    let mut level = 1;
    let tail = loop {
        let threshold = probe.point(level);
        let t = tail_mass(values, probs, threshold);
        if t < h {
            break t;
        }
        level = values
            .iter()
            .flatten()
            .filter(|x| **x > threshold)
            .map(|x| probe.cell_index(*x))
            .min()
            .expect("positive tail has an atom above the threshold");
    };
    let grid = JumpGrid::new(n, level);
    let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (v, p) in values.iter().zip(probs) {
        let key = v.iter().map(|x| grid.cell(*x).unwrap_or(0)).collect();
        *merged.entry(key).or_insert(0.0) += p;
    }
    build_from_cells(grid, merged, JumpOrigin::Discretized { grid, tail, samples: None })
}

fn discretize_sampler(law: &JumpLaw, seed: u64, n: usize, samples: usize) -> Result<DiscreteJumpLaw, LatticeError> {
    let cap = (LEVEL_CAP_FACTOR * (n as f64).powf(0.25)).ceil() as usize;
    if samples < 2 {
        return Err(LatticeError::TailNotResolvable { n, cap, samples });
    }
    let d = law.dim();
    let mut gen = rng::substream(seed, rng::TAIL_STREAM);
    let mut draws = vec![0.0; samples * d];
    for chunk in draws.chunks_exact_mut(d) {
        law.sample_into(&mut gen, chunk);
    }
    let probe = JumpGrid::new(n, 1);
    let h = probe.spacing();
    let mut chosen = None;
    for level in 1..=cap {
        let threshold = probe.point(level);
        let (mut s1, mut s2) = (0.0, 0.0);
        for chunk in draws.chunks_exact(d) {
            let z: f64 = chunk.iter().filter(|x| **x > threshold).map(|x| x.abs()).sum();
            s1 += z;
            s2 += z * z;
        }
        let mean = s1 / samples as f64;
        let var = ((s2 - samples as f64 * mean * mean) / (samples - 1) as f64).max(0.0);
        let se = (var / samples as f64).sqrt();
        if mean + TAIL_Z * se < h {
            chosen = Some((level, mean));
            break;
        }
    }
    let (level, tail) = chosen.ok_or(LatticeError::TailNotResolvable { n, cap, samples })?;
    let grid = JumpGrid::new(n, level);
    let mut counts: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for chunk in draws.chunks_exact(d) {
        let key = chunk.iter().map(|x| grid.cell(*x).unwrap_or(0)).collect();
        *counts.entry(key).or_insert(0.0) += 1.0;
    }
    for c in counts.values_mut() {
        *c /= samples as f64;
    }
    Ok(build_from_cells(grid, counts, JumpOrigin::Discretized { grid, tail, samples: Some(samples) }))
}

fn build_from_cells(grid: JumpGrid, cells: BTreeMap<Vec<usize>, f64>, origin: JumpOrigin) -> DiscreteJumpLaw {
    let (values, probs) = cells
        .into_iter()
        .map(|(key, p)| {
            let v = key.iter().map(|&k| if k == 0 { 0.0 } else { grid.point(k) }).collect::<Vec<_>>();
            (v, p)
        })
        .unzip();
    DiscreteJumpLaw::from_parts(values, probs, origin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JumpSampler;

    fn uniform_law() -> JumpLaw {
        JumpLaw::Sampler { sampler: JumpSampler::Uniform { low: vec![-0.5], high: vec![0.5] }, seed: 5 }
    }

    #[test]
    fn native_discrete_is_unchanged() {
        let law = JumpLaw::deterministic(vec![-0.5]);
        let out = discretize_jumps(&law, 64, JumpMode::Native, 0).unwrap();
        assert_eq!(out.values(), &[vec![-0.5]]);
        assert_eq!(out.probs(), &[1.0]);
        assert_eq!(out.origin(), JumpOrigin::Native);
    }

    #[test]
    fn native_sampler_is_rejected() {
        assert!(matches!(
            discretize_jumps(&uniform_law(), 16, JumpMode::Native, 1000),
            Err(LatticeError::NativeRequiresDiscrete)
        ));
    }

    #[test]
    fn hand_cell_lookup_at_256_steps() {
        // n = 256: n^{-1/8} = 1/2, so g_k = k/4 - 1. Six levels cover (-1, 0.5].
        let grid = JumpGrid::new(256, 6);
        assert_eq!(grid.spacing(), 0.25);
        assert_eq!(grid.point(3), -0.25);
        assert_eq!(grid.snap(-0.3), -0.25);
        assert_eq!(grid.snap(0.49), 0.5);
        assert_eq!(grid.snap(-0.25), -0.25);
        assert_eq!(grid.snap(0.51), 0.0);
        assert_eq!(grid.cell(-0.999), Some(1));
    }

    #[test]
    fn snapping_rounds_up_by_less_than_the_spacing() {
        let grid = JumpGrid::new(37, 400);
        let mut x = -0.9999;
        while x < grid.top() {
            let y = grid.snap(x);
            assert!(y >= x && y - x < grid.spacing(), "{x} -> {y}");
            x += 0.0137;
        }
    }

    #[test]
    fn minimal_level_for_discrete_law() {
        // n = 256, h = 1/4. Atoms -0.3 (p=.5) and 0.4 (p=.5).
        // Level M needs 0.5*|-0.3|*1{-0.3 > g_M} + 0.5*0.4*1{0.4 > g_M} < 1/4.
        // g_M < -0.3 gives 0.35; g_M in [-0.3, 0.4) gives 0.2 -> M = 3 (g = -0.25).
        let law = JumpLaw::Discrete { values: vec![vec![-0.3], vec![0.4]], probs: vec![0.5, 0.5] };
        let out = discretize_jumps(&law, 256, JumpMode::Discretized, 0).unwrap();
        let grid = out.grid().unwrap();
        assert_eq!(grid.levels(), 3);
        assert_eq!(out.values(), &[vec![0.0], vec![-0.25]]);
        assert_eq!(out.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn atoms_landing_in_one_cell_merge() {
        let law = JumpLaw::Discrete { values: vec![vec![-0.3], vec![-0.28]], probs: vec![0.25, 0.75] };
        let out = discretize_jumps(&law, 256, JumpMode::Discretized, 0).unwrap();
        assert_eq!(out.atoms(), 1);
        assert_eq!(out.values()[0], vec![-0.25]);
        assert_eq!(out.probs()[0], 1.0);
    }

    #[test]
    fn sampler_discretization_is_deterministic_and_normalized() {
        let a = discretize_jumps(&uniform_law(), 256, JumpMode::Discretized, 50_000).unwrap();
        let b = discretize_jumps(&uniform_law(), 256, JumpMode::Discretized, 50_000).unwrap();
        assert_eq!(a, b);
        let total: f64 = a.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let JumpOrigin::Discretized { tail, samples, .. } = a.origin() else { panic!() };
        assert_eq!(samples, Some(50_000));
        assert!(tail < 0.25);
    }

    #[test]
    fn heavy_tail_is_not_resolvable() {
        let law = JumpLaw::Sampler { sampler: JumpSampler::LogNormal { mean: vec![6.0], std: vec![2.0] }, seed: 1 };
        assert!(matches!(
            discretize_jumps(&law, 1, JumpMode::Discretized, 10_000),
            Err(LatticeError::TailNotResolvable { .. })
        ));
    }
}

use super::PricerError;
use crate::lattice::{build_lattice, DiscreteJumpLaw, LatticeSpec};
use crate::model::{MertonModel, Payoff};

pub const ORACLE_MAX_STEPS: usize = 3;
pub const ORACLE_MAX_BRANCHES: usize = 12;

/// Snell envelope on the full non-recombining tree of the `n`-step market,
/// by plain recursion over branch sequences. A reference for the
/// recombining sweep on small instances.
pub fn enumerate_stopping_oracle(
    model: &MertonModel,
    payoff: &Payoff,
    n: usize,
    jumps: &DiscreteJumpLaw,
) -> Result<f64, PricerError> {
    let spec = build_lattice(model, jumps, n)?;
    if n > ORACLE_MAX_STEPS || spec.branches().len() > ORACLE_MAX_BRANCHES {
        return Err(PricerError::TooLarge { n, branches: spec.branches().len() });
    }
    payoff.check_dimension(model.dim())?;
    Ok(snell_on_tree(&spec, model.spot(), payoff))
}

/// Unbounded variant of the oracle recursion; cost is `branches^n`.
pub fn snell_on_tree(spec: &LatticeSpec, spot: &[f64], payoff: &Payoff) -> f64 {
    snell(spec, payoff, spot, 0)
}

fn snell(spec: &LatticeSpec, payoff: &Payoff, s: &[f64], k: usize) -> f64 {
    let immediate = spec.discount(k) * payoff.eval(s, spec.dt() * k as f64);
    if k == spec.steps() {
        return immediate;
    }
    let mut continuation = 0.0;
    let mut moved = vec![0.0; s.len()];
    for b in spec.branches() {
        for ((m, x), f) in moved.iter_mut().zip(s).zip(&b.factor) {
            *m = x * f;
        }
        continuation += b.prob * snell(spec, payoff, &moved, k + 1);
    }
    immediate.max(continuation)
}

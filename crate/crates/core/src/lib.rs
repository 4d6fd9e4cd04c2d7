//! American option prices in the multidimensional Merton jump-diffusion
//! model by multinomial lattice approximation, with Monte Carlo and
//! closed-form references and an empirical convergence harness.
//!
//! The usual flow is [`model::validate_model`] →
//! [`lattice::discretize_jumps`] → [`pricer::price_american`].

pub mod config;
pub mod convergence;
pub mod lattice;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod pricer;
pub mod report;
pub mod rng;
pub mod selftest;

pub use lattice::{build_lattice, build_xi, discretize_jumps, state_price, DiscreteJumpLaw, JumpMode, LatticeSpec, StateKey, XiTable};
pub use model::{validate_model, JumpLaw, MertonModel, Payoff, PayoffFamily, RawModel};
pub use pricer::{enumerate_stopping_oracle, price_american, price_european, ExerciseStyle, PricerConfig, PricingResult};

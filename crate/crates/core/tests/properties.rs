use proptest::prelude::*;

use merton_lattice::config::RunConfig;
use merton_lattice::convergence::{fit_rate, richardson};
use merton_lattice::lattice::{build_lattice, build_xi, discretize_jumps, JumpGrid, JumpMode};
use merton_lattice::model::{validate_model, JumpLaw, MertonModel, Payoff, RawModel};
use merton_lattice::pricer::{price_american, price_european, PricerConfig};

fn lower_triangular(d: usize, entries: &[f64]) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if j < i { 0.3 * entries[i * d + j] } else if j == i { 0.05 + entries[i * d + j] } else { 0.0 }).collect())
        .collect()
}

prop_compose! {
    fn any_model()(d in 1usize..=3)
        (d in Just(d),
         spot in prop::collection::vec(0.5f64..1.5, d),
         rate in 0.0f64..0.1,
         horizon in 0.25f64..2.0,
         vol in prop::collection::vec(0.0f64..0.35, d * d),
         intensity in 0.0f64..1.5,
         atoms in prop::collection::vec(prop::collection::vec(-0.6f64..0.8, d), 1..=3),
         weights in prop::collection::vec(0.1f64..1.0, 3))
        -> MertonModel
    {
        let total: f64 = weights[..atoms.len()].iter().sum();
        let probs = weights[..atoms.len()].iter().map(|w| w / total).collect();
        validate_model(RawModel {
            spot,
            rate,
            horizon,
            vol: lower_triangular(d, &vol),
            intensity,
            jumps: JumpLaw::Discrete { values: atoms, probs },
        })
        .expect("generated model is valid")
    }
}

fn one_asset(sigma: f64, intensity: f64, jump: f64) -> MertonModel {
    validate_model(RawModel {
        spot: vec![1.0],
        rate: 0.05,
        horizon: 1.0,
        vol: vec![vec![sigma]],
        intensity,
        jumps: JumpLaw::deterministic(vec![jump]),
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_step_martingale_identity(model in any_model(), n in 8usize..200) {
        let jumps = discretize_jumps(model.jumps(), n, JumpMode::Native, 0).unwrap();
        let spec = build_lattice(&model, &jumps, n).unwrap();
        prop_assert!(spec.martingale_defect() <= 1e-12, "defect {}", spec.martingale_defect());
        prop_assert!(spec.probability_defect() <= 1e-12);
    }

    #[test]
    fn discretized_laws_keep_the_martingale(model in any_model(), n in 8usize..5000) {
        let jumps = discretize_jumps(model.jumps(), n, JumpMode::Discretized, 0).unwrap();
        let spec = build_lattice(&model, &jumps, n).unwrap();
        prop_assert!(spec.martingale_defect() <= 1e-12);
    }

    #[test]
    fn xi_moments(d in 1usize..=8) {
        prop_assert!(build_xi(d).defects().max() <= 1e-12);
    }

    #[test]
    fn snapping_is_monotone_and_rounds_up(n in 1usize..100_000, levels in 1usize..40, x in -0.999f64..3.0, y in -0.999f64..3.0) {
        let grid = JumpGrid::new(n, levels);
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        if hi <= grid.top() {
            prop_assert!(grid.snap(lo) <= grid.snap(hi));
            let gap = grid.snap(hi) - hi;
            prop_assert!(gap >= 0.0 && gap < grid.spacing() + 1e-12, "gap {gap}");
        } else {
            prop_assert_eq!(grid.snap(hi), 0.0);
        }
    }

    #[test]
    fn put_price_is_monotone_in_strike(sigma in 0.05f64..0.5, intensity in 0.0f64..1.0, jump in -0.5f64..0.5,
                                       k1 in 0.5f64..1.5, k2 in 0.5f64..1.5, n in 1usize..60) {
        let model = one_asset(sigma, intensity, jump);
        let jumps = discretize_jumps(model.jumps(), n, JumpMode::Native, 0).unwrap();
        let cfg = PricerConfig::default();
        let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        let p_lo = price_american(&model, &Payoff::basket_put(lo, vec![1.0]), n, &jumps, &cfg).unwrap().value;
        let p_hi = price_american(&model, &Payoff::basket_put(hi, vec![1.0]), n, &jumps, &cfg).unwrap().value;
        prop_assert!(p_lo <= p_hi + 1e-14);
        let c_lo = price_american(&model, &Payoff::basket_call(lo, vec![1.0]), n, &jumps, &cfg).unwrap().value;
        let c_hi = price_american(&model, &Payoff::basket_call(hi, vec![1.0]), n, &jumps, &cfg).unwrap().value;
        prop_assert!(c_hi <= c_lo + 1e-14);
    }

    #[test]
    fn american_dominates_european_and_intrinsic(model in any_model(), n in 1usize..12, strike in 0.5f64..1.5) {
        let d = model.dim();
        let payoff = Payoff::basket_put(strike, vec![1.0 / d as f64; d]);
        let jumps = discretize_jumps(model.jumps(), n, JumpMode::Native, 0).unwrap();
        let cfg = PricerConfig::default();
        let am = price_american(&model, &payoff, n, &jumps, &cfg).unwrap();
        let eu = price_european(&model, &payoff, n, &jumps, &cfg).unwrap();
        prop_assert!(am.value >= eu.value - 1e-14, "american {} european {}", am.value, eu.value);
        prop_assert!(am.value >= payoff.eval(model.spot(), 0.0));
    }

    #[test]
    fn power_laws_are_recovered(c in 0.01f64..10.0, beta in 0.05f64..2.0) {
        let pairs: Vec<(usize, f64)> = [8usize, 16, 32, 64, 128].iter().map(|&n| (n, c * (n as f64).powf(-beta))).collect();
        let fit = fit_rate(&pairs).unwrap();
        prop_assert!((fit.beta - beta).abs() < 1e-10);
        prop_assert!((fit.c - c).abs() / c < 1e-10);
    }

    #[test]
    fn richardson_removes_first_order_error(v in -1.0f64..1.0, c in -1.0f64..1.0, n in 4usize..1000) {
        let extrapolated = richardson(v + c / n as f64, v + c / (2 * n) as f64, 1.0);
        prop_assert!((extrapolated - v).abs() < 1e-12);
    }

    #[test]
    fn config_round_trip(rate in 0.0f64..0.2, strike in 0.1f64..3.0, n in 1usize..500, seed in any::<u64>()) {
        let text = format!(r#"{{
            "model": {{"spot": [1.0], "rate": {rate}, "horizon": 1.0, "vol": [[0.2]], "intensity": 0.0,
                      "jumps": {{"type": "discrete", "values": [[0.0]], "probs": [1.0]}}}},
            "payoff": {{"family": "basket_put", "strike": {strike}, "weights": [1.0]}},
            "engine": {{"n": {n}}},
            "mc": {{"paths": 1000, "steps": 10, "seed": {seed}}}
        }}"#);
        let cfg = RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}

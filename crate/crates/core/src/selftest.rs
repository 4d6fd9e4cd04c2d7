//! Embedded invariant suite run by the `selftest` command.

use crate::lattice::{build_lattice_with_xi, build_xi, discretize_jumps, JumpGrid, JumpMode, XiTable};
use crate::model::{validate_model, JumpLaw, MertonModel, Payoff, PayoffFamily, RawModel};
use crate::montecarlo::{black_scholes, mc_european, poisson_mixture_european, MCConfig, OptionKind};
use crate::pricer::{price_on_lattice, snell_on_tree, ExerciseStyle, PricerConfig};

pub const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Default)]
pub struct SelftestOptions {
    /// Perturb one ξ entry, so the table checks must fail.
    pub corrupt_xi: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!("{status} {}: {}", self.name, self.detail)
    }
}

fn xi_for(d: usize, opts: &SelftestOptions) -> XiTable {
    let xi = build_xi(d);
    if !opts.corrupt_xi {
        return xi;
    }
    let mut rows = xi.rows().to_vec();
    rows[0][0] += 1e-3;
    XiTable::from_rows(rows)
}

fn model(spot: Vec<f64>, rate: f64, vol: Vec<Vec<f64>>, intensity: f64, jumps: JumpLaw) -> MertonModel {
    validate_model(RawModel { spot, rate, horizon: 1.0, vol, intensity, jumps }).expect("built-in model is valid")
}

fn one_asset(intensity: f64, jump: f64) -> MertonModel {
    model(vec![1.0], 0.05, vec![vec![0.2]], intensity, JumpLaw::deterministic(vec![jump]))
}

fn two_assets(jumps: JumpLaw) -> MertonModel {
    model(vec![1.0, 0.9], 0.03, vec![vec![0.25, 0.0], vec![0.1, 0.2]], 0.4, jumps)
}

fn two_point_2d() -> JumpLaw {
    JumpLaw::Discrete { values: vec![vec![-0.2, -0.1], vec![0.15, 0.05]], probs: vec![0.6, 0.4] }
}

pub fn run(opts: &SelftestOptions) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    for d in 1..=6 {
        let defects = xi_for(d, opts).defects();
        out.push(CheckOutcome::new(
            format!("xi_identities_d{d}"),
            defects.max() <= TOLERANCE,
            format!("mean {:.1e}, covariance {:.1e}, norm {:.1e}", defects.mean, defects.covariance, defects.norm),
        ));
    }
    out.push(martingale_identity(opts));
    out.push(brute_force_equality(opts));
    out.push(oracle_coherence());
    out.push(put_call_parity());
    out.push(hand_example());
    out.push(constant_payoff());
    out.push(jump_grid_cells());
    out.push(american_call_is_european());
    out.push(mc_determinism());
    out
}

fn martingale_identity(opts: &SelftestOptions) -> CheckOutcome {
    let cases = [
        (one_asset(0.5, -0.25), JumpMode::Native, 64),
        (one_asset(0.0, 0.0), JumpMode::Native, 256),
        (two_assets(two_point_2d()), JumpMode::Native, 16),
        (two_assets(two_point_2d()), JumpMode::Discretized, 256),
    ];
    let mut worst = 0.0f64;
    for (m, mode, n) in &cases {
        let jumps = match discretize_jumps(m.jumps(), *n, *mode, 0) {
            Ok(j) => j,
            Err(e) => return CheckOutcome::new("martingale_identity", false, e.to_string()),
        };
        match build_lattice_with_xi(m, &jumps, *n, xi_for(m.dim(), opts)) {
            Ok(spec) => worst = worst.max(spec.martingale_defect()).max(spec.probability_defect()),
            Err(e) => return CheckOutcome::new("martingale_identity", false, e.to_string()),
        }
    }
    CheckOutcome::new("martingale_identity", worst <= TOLERANCE, format!("max defect {worst:.1e} over {} lattices", cases.len()))
}

fn brute_force_equality(opts: &SelftestOptions) -> CheckOutcome {
    let put1 = Payoff::basket_put(1.0, vec![1.0]);
    let put2 = Payoff::basket_put(1.9, vec![1.0, 1.0]);
    let cases = [
        (one_asset(0.0, 0.0), put1.clone()),
        (one_asset(0.5, -0.25), put1.clone()),
        (two_assets(two_point_2d()), put2.clone()),
        (two_assets(JumpLaw::deterministic(vec![-0.3, 0.1])), Payoff::new(PayoffFamily::MinPut, 1.0, vec![]).unwrap()),
    ];
    let mut worst = 0.0f64;
    let mut count = 0;
    for (m, payoff) in &cases {
        let jumps = discretize_jumps(m.jumps(), 1, JumpMode::Native, 0).expect("discrete law");
        for n in 1..=3 {
            let spec = match build_lattice_with_xi(m, &jumps, n, xi_for(m.dim(), opts)) {
                Ok(s) => s,
                Err(e) => return CheckOutcome::new("brute_force_equality", false, e.to_string()),
            };
            let lattice = price_on_lattice(&spec, m.spot(), payoff, ExerciseStyle::American, &PricerConfig::default());
            let lattice = match lattice {
                Ok(r) => r.value,
                Err(e) => return CheckOutcome::new("brute_force_equality", false, e.to_string()),
            };
            worst = worst.max((lattice - snell_on_tree(&spec, m.spot(), payoff)).abs());
            count += 1;
        }
    }
    CheckOutcome::new("brute_force_equality", worst <= TOLERANCE, format!("max gap {worst:.1e} over {count} trees"))
}

fn oracle_coherence() -> CheckOutcome {
    let mut worst = 0.0f64;
    for kind in [OptionKind::Call, OptionKind::Put] {
        for k in [0.8, 1.0, 1.25] {
            let bs = black_scholes(kind, 1.0, k, 0.2, 0.05, 1.0);
            let mix = poisson_mixture_european(kind, 1.0, k, 0.2, 0.05, 1.0, 0.0, -0.25);
            worst = worst.max((bs - mix).abs());
        }
    }
    CheckOutcome::new("oracle_coherence", worst <= TOLERANCE, format!("mixture at zero intensity vs Black-Scholes {worst:.1e}"))
}

fn put_call_parity() -> CheckOutcome {
    let (s, k, sig, r, t, lam, u) = (1.0, 1.1, 0.2, 0.05, 1.0, 0.5, -0.25);
    let c = poisson_mixture_european(OptionKind::Call, s, k, sig, r, t, lam, u);
    let p = poisson_mixture_european(OptionKind::Put, s, k, sig, r, t, lam, u);
    let gap = (c - p - (s - k * (-r * t).exp())).abs();
    CheckOutcome::new("put_call_parity", gap <= 1e-10, format!("gap {gap:.1e}"))
}

fn hand_example() -> CheckOutcome {
    let m = model(vec![1.0], 0.0, vec![vec![1.0]], 0.0, JumpLaw::deterministic(vec![0.0]));
    let jumps = discretize_jumps(m.jumps(), 1, JumpMode::Native, 0).expect("discrete law");
    let v = crate::pricer::price_american(&m, &Payoff::basket_put(1.0, vec![1.0]), 1, &jumps, &PricerConfig::default());
    match v {
        Ok(r) => CheckOutcome::new("hand_example", (r.value - 0.5).abs() <= TOLERANCE, format!("V_1 = {}", r.value)),
        Err(e) => CheckOutcome::new("hand_example", false, e.to_string()),
    }
}

fn constant_payoff() -> CheckOutcome {
    let m = two_assets(two_point_2d());
    let jumps = discretize_jumps(m.jumps(), 8, JumpMode::Native, 0).expect("discrete law");
    match crate::pricer::price_american(&m, &Payoff::constant(1.7), 8, &jumps, &PricerConfig::default()) {
        Ok(r) => CheckOutcome::new("constant_payoff", r.value == 1.7, format!("V_8 = {}", r.value)),
        Err(e) => CheckOutcome::new("constant_payoff", false, e.to_string()),
    }
}

fn jump_grid_cells() -> CheckOutcome {
    let grid = JumpGrid::new(256, 6);
    let (a, b) = (grid.snap(-0.3), grid.snap(0.49));
    CheckOutcome::new("jump_grid_cells", a == -0.25 && b == 0.5, format!("n = 256: -0.3 -> {a}, 0.49 -> {b}"))
}

fn american_call_is_european() -> CheckOutcome {
    let m = one_asset(0.0, 0.0);
    let call = Payoff::basket_call(1.0, vec![1.0]);
    let jumps = discretize_jumps(m.jumps(), 64, JumpMode::Native, 0).expect("discrete law");
    let cfg = PricerConfig::default();
    let am = crate::pricer::price_american(&m, &call, 64, &jumps, &cfg);
    let eu = crate::pricer::price_european(&m, &call, 64, &jumps, &cfg);
    match (am, eu) {
        (Ok(a), Ok(e)) => {
            let gap = (a.value - e.value).abs();
            CheckOutcome::new("american_call_is_european", gap <= 1e-10, format!("n = 64 gap {gap:.1e}"))
        }
        (Err(e), _) | (_, Err(e)) => CheckOutcome::new("american_call_is_european", false, e.to_string()),
    }
}

fn mc_determinism() -> CheckOutcome {
    let m = one_asset(0.5, -0.25);
    let cfg = MCConfig { paths: 2000, steps: 1, seed: 11, basis_degree: 2 };
    let put = Payoff::basket_put(1.0, vec![1.0]);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())
            .and_then(|pool| pool.install(|| mc_european(&m, &put, &cfg)).map_err(|e| e.to_string()))
    };
    match (run(1), run(3)) {
        (Ok(a), Ok(b)) => {
            CheckOutcome::new("mc_determinism", a == b, format!("seed {} mean {} on 1 and 3 threads", cfg.seed, a.mean))
        }
        (Err(e), _) | (_, Err(e)) => CheckOutcome::new("mc_determinism", false, e),
    }
}

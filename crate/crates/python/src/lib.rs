//! Python bindings: a `Pricer` built from a JSON run config plus a few
//! stand-alone helpers.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::merton_lattice::config::RunConfig;
use ::merton_lattice::convergence::run_study;
use ::merton_lattice::lattice::{build_xi, discretize_jumps, JumpMode};
use ::merton_lattice::model::{validate_model, MertonModel};
use ::merton_lattice::montecarlo::{self, OptionKind};
use ::merton_lattice::pricer::{price_american, price_european, ExerciseStyle};
use ::merton_lattice::report::convergence_csv;
use ::merton_lattice::selftest::{run as run_checks, SelftestOptions};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn engine_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn option_kind(kind: &str) -> PyResult<OptionKind> {
    match kind {
        "call" => Ok(OptionKind::Call),
        "put" => Ok(OptionKind::Put),
        other => Err(PyValueError::new_err(format!("kind must be 'call' or 'put', got {other:?}"))),
    }
}

fn style(name: Option<&str>, default: ExerciseStyle) -> PyResult<ExerciseStyle> {
    match name {
        None => Ok(default),
        Some("american") => Ok(ExerciseStyle::American),
        Some("european") => Ok(ExerciseStyle::European),
        Some(other) => Err(PyValueError::new_err(format!("style must be 'american' or 'european', got {other:?}"))),
    }
}

fn jump_mode(name: Option<&str>, default: JumpMode) -> PyResult<JumpMode> {
    match name {
        None => Ok(default),
        Some("native") => Ok(JumpMode::Native),
        Some("discretized") => Ok(JumpMode::Discretized),
        Some(other) => Err(PyValueError::new_err(format!("jump_mode must be 'native' or 'discretized', got {other:?}"))),
    }
}

/// Model, payoff and engine settings read from a JSON config.
#[pyclass(module = "merton_lattice")]
struct Pricer {
    config: RunConfig,
    model: MertonModel,
}

#[pymethods]
impl Pricer {
    #[new]
    fn new(config_json: &str) -> PyResult<Self> {
        let config = RunConfig::from_json(config_json).map_err(value_err)?;
        let model = validate_model(config.model.clone()).map_err(value_err)?;
        config.payoff.check_dimension(model.dim()).map_err(value_err)?;
        Ok(Self { config, model })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(value_err)?;
        Self::new(&text)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Lattice price `V_n`; `n` defaults to the config value.
    #[pyo3(signature = (n=None, style=None, jump_mode=None))]
    fn price(&self, n: Option<usize>, style: Option<&str>, jump_mode: Option<&str>) -> PyResult<f64> {
        let n = match n {
            Some(n) => n,
            None => self.config.steps().map_err(value_err)?,
        };
        let style = self::style(style, self.config.engine.exercise)?;
        let mode = self::jump_mode(jump_mode, self.config.engine.jump_mode)?;
        let jumps = discretize_jumps(self.model.jumps(), n, mode, self.config.engine.tail_samples).map_err(engine_err)?;
        let cfg = self.config.pricer();
        let res = match style {
            ExerciseStyle::American => price_american(&self.model, &self.config.payoff, n, &jumps, &cfg),
            ExerciseStyle::European => price_european(&self.model, &self.config.payoff, n, &jumps, &cfg),
        }
        .map_err(engine_err)?;
        Ok(res.value)
    }

    /// Monte Carlo European price as `(mean, stderr)`.
    #[pyo3(signature = (paths=None, seed=None))]
    fn mc_european(&self, paths: Option<usize>, seed: Option<u64>) -> PyResult<(f64, f64)> {
        let mut mc = self.config.mc.clone();
        mc.paths = paths.unwrap_or(mc.paths);
        mc.seed = seed.unwrap_or(mc.seed);
        let est = montecarlo::mc_european(&self.model, &self.config.payoff, &mc).map_err(engine_err)?;
        Ok((est.mean, est.stderr))
    }

    /// Out-of-sample regression estimate of the American price as `(mean, stderr)`.
    #[pyo3(signature = (paths=None, steps=None, seed=None))]
    fn lsmc(&self, paths: Option<usize>, steps: Option<usize>, seed: Option<u64>) -> PyResult<(f64, f64)> {
        let mut mc = self.config.mc.clone();
        mc.paths = paths.unwrap_or(mc.paths);
        mc.steps = steps.unwrap_or(mc.steps);
        mc.seed = seed.unwrap_or(mc.seed);
        let res = montecarlo::lsmc_american(&self.model, &self.config.payoff, &mc).map_err(engine_err)?;
        Ok((res.estimate.mean, res.estimate.stderr))
    }

    /// Convergence study over `engine.n_list`, returned as CSV text.
    fn converge(&self) -> PyResult<String> {
        let study = self.config.study().map_err(value_err)?;
        let report = run_study(&self.model, &self.config.payoff, &study, &self.config.mc).map_err(engine_err)?;
        Ok(convergence_csv(&report, self.config.output.precision, self.config.output.timing))
    }

    fn config_json(&self) -> String {
        self.config.to_json()
    }
}

#[pyfunction]
fn black_scholes(kind: &str, spot: f64, strike: f64, sigma: f64, rate: f64, horizon: f64) -> PyResult<f64> {
    Ok(montecarlo::black_scholes(option_kind(kind)?, spot, strike, sigma, rate, horizon))
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn poisson_mixture_european(
    kind: &str,
    spot: f64,
    strike: f64,
    sigma: f64,
    rate: f64,
    horizon: f64,
    intensity: f64,
    jump: f64,
) -> PyResult<f64> {
    Ok(montecarlo::poisson_mixture_european(option_kind(kind)?, spot, strike, sigma, rate, horizon, intensity, jump))
}

/// The `(d + 1) x d` table of diffusion outcomes.
#[pyfunction]
fn xi_table(d: usize) -> PyResult<Vec<Vec<f64>>> {
    if d == 0 {
        return Err(PyValueError::new_err("d must be at least 1"));
    }
    Ok(build_xi(d).rows().to_vec())
}

/// Built-in checks as `(name, passed, detail)` tuples.
#[pyfunction]
fn selftest() -> Vec<(String, bool, String)> {
    run_checks(&SelftestOptions::default()).into_iter().map(|c| (c.name, c.passed, c.detail)).collect()
}

#[pymodule]
#[pyo3(name = "merton_lattice")]
fn py_module(module: &Bound<'_, PyModule>) -> PyResult<()> {
    module.add_class::<Pricer>()?;
    module.add_function(wrap_pyfunction!(black_scholes, module)?)?;
    module.add_function(wrap_pyfunction!(poisson_mixture_european, module)?)?;
    module.add_function(wrap_pyfunction!(xi_table, module)?)?;
    module.add_function(wrap_pyfunction!(selftest, module)?)?;
    Ok(())
}

use std::fmt::Debug;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use merton_lattice::config::{Overrides, RunConfig};
use merton_lattice::convergence::run_study;
use merton_lattice::lattice::{discretize_jumps, JumpMode};
use merton_lattice::model::{validate_model, JumpLaw, MertonModel};
use merton_lattice::pricer::{price_american, price_european, ExerciseStyle};
use merton_lattice::report::{convergence_csv, convergence_summary, format_sig, CSV_HEADER};
use merton_lattice::selftest::{self, SelftestOptions};

const EXIT_SELFTEST: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ENGINE: u8 = 3;

#[derive(Parser)]
#[command(name = "merton-lattice", version, about = "American option prices in the multidimensional Merton model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price one option on the n-step lattice.
    Price(RunArgs),
    /// Price a ladder of n and write the error table as CSV.
    Converge(RunArgs),
    /// Run the built-in invariant checks.
    Selftest {
        #[arg(long, hide = true)]
        corrupt_xi: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    jump_mode: Option<ModeArg>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Native,
    Discretized,
}

enum Failure {
    Config(String),
    Engine(String),
}

/// `Outer(Inner(Leaf { .. }))` becomes `Outer::Inner::Leaf`.
fn error_name(e: &impl Debug) -> String {
    let dbg = format!("{e:?}");
    let mut parts = Vec::new();
    for seg in dbg.split('(') {
        let ident: String = seg.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
        if ident.is_empty() {
            break;
        }
        let whole = ident.len() == seg.len();
        parts.push(ident);
        if !whole {
            break;
        }
    }
    parts.join("::")
}

fn engine(e: impl Debug + std::fmt::Display) -> Failure {
    Failure::Engine(format!("engine error [{}]: {e}", error_name(&e)))
}

fn load(args: &RunArgs) -> Result<(RunConfig, MertonModel), Failure> {
    let mut cfg = RunConfig::load(&args.config).map_err(|e| Failure::Config(e.to_string()))?;
    cfg.apply(&Overrides {
        n: args.n,
        seed: args.seed,
        out: args.out.clone(),
        jump_mode: args.jump_mode.map(|m| match m {
            ModeArg::Native => JumpMode::Native,
            ModeArg::Discretized => JumpMode::Discretized,
        }),
        threads: args.threads,
    });
    if let Some(t) = cfg.engine.threads {
        // Only the first call can install the global pool; later calls are harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let model =
        validate_model(cfg.model.clone()).map_err(|e| Failure::Config(format!("invalid model: {e}")))?;
    cfg.payoff.check_dimension(model.dim()).map_err(|e| Failure::Config(format!("invalid payoff: {e}")))?;
    Ok((cfg, model))
}

fn sampler_seed(model: &MertonModel) -> Option<u64> {
    match model.jumps() {
        JumpLaw::Sampler { seed, .. } => Some(*seed),
        JumpLaw::Discrete { .. } => None,
    }
}

fn cmd_price(args: &RunArgs) -> Result<(), Failure> {
    let (cfg, model) = load(args)?;
    let n = cfg.steps().map_err(|e| Failure::Config(e.to_string()))?;
    let jumps = discretize_jumps(model.jumps(), n, cfg.engine.jump_mode, cfg.engine.tail_samples).map_err(engine)?;
    let pricer = cfg.pricer();
    let res = match cfg.engine.exercise {
        ExerciseStyle::American => price_american(&model, &cfg.payoff, n, &jumps, &pricer),
        ExerciseStyle::European => price_european(&model, &cfg.payoff, n, &jumps, &pricer),
    }
    .map_err(engine)?;
    let p = cfg.output.precision;
    println!("value = {}", format_sig(res.value, p));
    println!("n = {n}");
    println!("style = {}", style_name(res.style));
    println!("final_states = {}", res.final_states());
    println!("total_states = {}", res.total_states());
    println!("root_exercise = {}", res.root_exercise);
    if let Some(seed) = sampler_seed(&model) {
        println!("seed = {seed}");
    }
    println!("seconds = {:.6}", res.elapsed.as_secs_f64());
    if let Some(path) = &cfg.output.csv {
        let seconds = if cfg.output.timing { format!("{:.6}", res.elapsed.as_secs_f64()) } else { String::new() };
        let text = format!("{CSV_HEADER}\n{n},{},,,,{seconds}\n", format_sig(res.value, p));
        std::fs::write(path, text).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn style_name(s: ExerciseStyle) -> &'static str {
    match s {
        ExerciseStyle::American => "american",
        ExerciseStyle::European => "european",
    }
}

fn cmd_converge(args: &RunArgs) -> Result<(), Failure> {
    let (cfg, model) = load(args)?;
    let study = cfg.study().map_err(|e| Failure::Config(e.to_string()))?;
    let report = run_study(&model, &cfg.payoff, &study, &cfg.mc).map_err(engine)?;
    let csv = convergence_csv(&report, cfg.output.precision, cfg.output.timing);
    match &cfg.output.csv {
        Some(path) => {
            std::fs::write(path, &csv).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?
        }
        None => print!("{csv}"),
    }
    eprintln!("seed = {}", cfg.mc.seed);
    if let Some(seed) = sampler_seed(&model) {
        eprintln!("jump sampler seed = {seed}");
    }
    eprint!("{}", convergence_summary(&report, cfg.output.precision));
    Ok(())
}

fn cmd_selftest(corrupt_xi: bool) -> ExitCode {
    let outcomes = selftest::run(&SelftestOptions { corrupt_xi });
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} checks, {} failed", outcomes.len(), failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SELFTEST)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Price(args) => cmd_price(args),
        Command::Converge(args) => cmd_converge(args),
        Command::Selftest { corrupt_xi } => return cmd_selftest(*corrupt_xi),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Engine(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ENGINE)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lionphi_core::oracle::GridSpec;
use lionphi_core::runner::{
    conj_check, distributed_to_csv, run_distributed_config, run_sweep, run_trace, sweep_to_csv, trace_to_csv,
    RunConfig,
};
use lionphi_core::verify::{run_suite, SignZeroUp, Standard, SubgradientMap, Suite};
use lionphi_core::{Error, Result};

const EXIT_VERIFY_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "lionphi", version, about = "Lion-phi optimizer experiments and invariant checks")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to the config's "output", else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Selection {
    Standard,
    /// sign(0) = +1 for L1.
    SignZeroUp,
}

#[derive(Subcommand)]
enum Command {
    /// One optimization run, one CSV row per iterate.
    Trace(RunArgs),
    /// Converged loss and feasibility over a list of decay values.
    SweepLambda {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated decay values; defaults to the config's "lambdas".
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Runs an invariant suite and prints a JSON report.
    Verify {
        /// convex, lyapunov, stochastic, distributed or all.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random evaluations per kind and Monte Carlo sample count.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Subgradient selection under test.
        #[arg(long, value_enum, default_value = "standard")]
        subgradient: Selection,
    },
    /// Simulated multi-worker run; needs a "distributed" config section.
    Distributed(RunArgs),
    /// Cross-checks closed-form conjugates and domain distances against lattice oracles.
    ConjCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = 5.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Domain-distance probes per kind.
        #[arg(long, default_value_t = 1)]
        projections: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::usage(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn out_path<'a>(args: &'a RunArgs, cfg: &'a RunConfig) -> Option<&'a Path> {
    args.out.as_deref().or(cfg.output.as_deref())
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::usage(e.to_string()))?;
    }
    match cli.command {
        Command::Trace(args) => {
            let cfg = load(&args)?;
            emit(&trace_to_csv(&run_trace(&cfg)?), out_path(&args, &cfg))?;
        }
        Command::SweepLambda { run, lambdas } => {
            let cfg = load(&run)?;
            let lambdas = lambdas
                .or_else(|| cfg.lambdas.clone())
                .ok_or_else(|| Error::usage("give --lambdas or \"lambdas\" in the config"))?;
            let sweep = run_sweep(&cfg, &lambdas)?;
            emit(&sweep_to_csv(&sweep), out_path(&run, &cfg))?;
        }
        Command::Distributed(args) => {
            let cfg = load(&args)?;
            emit(&distributed_to_csv(&run_distributed_config(&cfg)?), out_path(&args, &cfg))?;
        }
        Command::Verify { suite, seed, samples, out, subgradient } => {
            let suite: Suite = suite.parse()?;
            let map: &dyn SubgradientMap = match subgradient {
                Selection::Standard => &Standard,
                Selection::SignZeroUp => &SignZeroUp,
            };
            let report = run_suite(suite, seed, samples, map)?;
            emit(&report.to_json(), out.as_deref())?;
            for c in report.failures() {
                eprintln!("FAILED {}: worst {:e}, threshold {:e}", c.name, c.worst, c.threshold);
            }
            if !report.passed {
                return Ok(ExitCode::from(EXIT_VERIFY_FAILED));
            }
        }
        Command::ConjCheck { seed, points, radius, step, projections, out } => {
            let grid = GridSpec::new(radius, step, 2)?;
            let report = conj_check(seed, points, grid, projections)?;
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            emit(&text, out.as_deref())?;
            for k in report.kinds.iter().filter(|k| !k.passed) {
                eprintln!("FAILED {}: max error {:e}", k.kind, k.max_abs_err);
            }
            if !report.passed {
                return Ok(ExitCode::from(EXIT_VERIFY_FAILED));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

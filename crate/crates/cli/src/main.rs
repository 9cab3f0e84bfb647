use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gmcf_cli::config::Config;
use gmcf_cli::experiments::{self, PlotKind};

/// Graphical mean curvature flow experiments: mild-solution solver runs,
/// kernel and operator bound certification, and oracle cross-validation.
#[derive(Parser)]
#[command(name = "gmcf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Short-time existence pipeline: fit constants, run Picard, compare
    /// with the exact shrinking solution and the finite-difference oracle
    Existence(RunArgs),
    /// Perturbed shrinking-family pipeline with Lipschitz-in-data and
    /// weighted-derivative reports
    Perturbation(RunArgs),
    /// Gaussian bound certificates for all four kernels plus the
    /// sharp-constant control and mass identities
    KernelBounds(RunArgs),
    /// Contraction-ratio sweep at the recipe ball radius
    Contraction(RunArgs),
    /// Function-space norm self-tests
    Norms(RunArgs),
    /// Fixed-point solver versus the method-of-lines oracle, tabulated
    OracleCompare(RunArgs),
    /// Render an SVG from a produced CSV
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// output directory override
    #[arg(long)]
    out: Option<PathBuf>,
    /// seed override
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PlotArgs {
    /// snapshot CSV produced by one of the experiments
    #[arg(long)]
    input: PathBuf,
    /// line | heatmap
    #[arg(long, default_value = "heatmap")]
    kind: String,
    /// output SVG path (default: input with .svg extension)
    #[arg(long)]
    output: Option<PathBuf>,
}

fn load_config(args: &RunArgs) -> Result<Config, ExitCode> {
    let mut cfg = match Config::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return Err(ExitCode::from(2));
        }
    };
    if let Some(out) = &args.out {
        cfg.output.directory = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Err(e) = std::fs::create_dir_all(&cfg.output.directory) {
        eprintln!("output directory not writable: {e}");
        return Err(ExitCode::from(2));
    }
    Ok(cfg)
}

fn dispatch(
    cfg: &Config,
    run: impl FnOnce(&Config) -> experiments::ExpResult + Send,
) -> ExitCode {
    let execute = move || run(cfg);
    let outcome = if cfg.run.workers > 0 {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.workers)
            .build()
        {
            Ok(pool) => pool.install(execute),
            Err(e) => {
                eprintln!("worker pool: {e}");
                return ExitCode::from(2);
            }
        }
    } else {
        execute()
    };
    match outcome {
        Ok(out) => {
            for artifact in &out.artifacts {
                println!("wrote {}", artifact.display());
            }
            if out.pass {
                println!("{}: all asserted bounds hold", out.experiment);
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "{}: failing bound: {}",
                    out.experiment,
                    out.first_failure.as_deref().unwrap_or("unknown")
                );
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Existence(args) => match load_config(&args) {
            Ok(cfg) => dispatch(&cfg, |c| {
                experiments::run_existence(c, &c.output.directory.clone())
            }),
            Err(code) => code,
        },
        Command::Perturbation(args) => match load_config(&args) {
            Ok(cfg) => dispatch(&cfg, |c| {
                experiments::run_perturbation(c, &c.output.directory.clone())
            }),
            Err(code) => code,
        },
        Command::KernelBounds(args) => match load_config(&args) {
            Ok(cfg) => dispatch(&cfg, |c| {
                experiments::run_kernel_bounds(c, &c.output.directory.clone())
            }),
            Err(code) => code,
        },
        Command::Contraction(args) => match load_config(&args) {
            Ok(cfg) => dispatch(&cfg, |c| {
                experiments::run_contraction(c, &c.output.directory.clone())
            }),
            Err(code) => code,
        },
        Command::Norms(args) => match load_config(&args) {
            Ok(cfg) => dispatch(&cfg, |c| {
                experiments::run_norms(c, &c.output.directory.clone())
            }),
            Err(code) => code,
        },
        Command::OracleCompare(args) => match load_config(&args) {
            Ok(cfg) => dispatch(&cfg, |c| {
                experiments::run_oracle_compare(c, &c.output.directory.clone())
            }),
            Err(code) => code,
        },
        Command::Plot(args) => {
            let kind = match args.kind.as_str() {
                "line" => PlotKind::Line,
                "heatmap" => PlotKind::Heatmap,
                other => {
                    eprintln!("unknown plot kind {other:?}; use line or heatmap");
                    return ExitCode::from(2);
                }
            };
            let output = args
                .output
                .unwrap_or_else(|| args.input.with_extension("svg"));
            match experiments::run_plot(&args.input, kind, &output) {
                Ok(out) => {
                    for artifact in &out.artifacts {
                        println!("wrote {}", artifact.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("plot failed: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}

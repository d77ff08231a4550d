mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use commands::{Format, UsageError};
use config::*;
use report::{emit, Outcome, Report, Timing};

#[derive(Parser)]
#[command(name = "bosegas", version, about = "Numerical checks for Bose-Einstein condensation in the free Bose gas")]
struct Cli {
    /// JSON config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Report destination (stdout when omitted).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Worker threads.
    #[arg(long, global = true, env = "BOSEGAS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Fugacities per box, critical density and condensate density.
    Thermo(ThermoArgs),
    /// Order parameters along an L-chain and the BEC verdict.
    OrderParam(OrderParamArgs),
    /// χ-mixing identity on a grid of Gaussian test functions.
    Mixing(MixingArgs),
    /// Two-point decomposition of ψ_bec over the component states.
    Decompose(DecomposeArgs),
    /// Time-shift clustering scan for one state.
    Clustering(ClusteringArgs),
    /// Path-space checks and field sampling.
    Pathspace(PathspaceArgs),
    /// Projective-chain consistency and pushforward checks.
    Quasilocal(QuasilocalArgs),
    /// Full acceptance suite.
    All(AllArgs),
}

fn resolved<A: Serialize, R: Serialize + serde::de::DeserializeOwned + Default>(
    flags: &A,
    file: &Option<PathBuf>,
    name: &str,
) -> anyhow::Result<(R, serde_json::Value)> {
    let section = file.as_deref().map(|p| load_file(p, name)).transpose().map_err(|e| UsageError(format!("{e:#}")))?;
    let cfg: R = resolve(flags, section).map_err(|e| UsageError(format!("{e:#}")))?;
    let value = serde_json::to_value(&cfg)?;
    Ok((cfg, value))
}

fn dispatch(cli: &Cli, format: Format) -> anyhow::Result<(String, u64, serde_json::Value, Outcome)> {
    macro_rules! go {
        ($args:expr, $name:literal, $cfg:ty, $run:path) => {{
            let (cfg, value): ($cfg, _) = resolved($args, &cli.config, $name)?;
            let out = $run(&cfg, format)?;
            ($name.to_string(), cfg.seed, value, out)
        }};
    }
    Ok(match &cli.command {
        Command::Thermo(a) => go!(a, "thermo", ThermoConfig, commands::thermo),
        Command::OrderParam(a) => go!(a, "order-param", OrderParamConfig, commands::order_param),
        Command::Mixing(a) => go!(a, "mixing", MixingConfig, commands::mixing),
        Command::Decompose(a) => go!(a, "decompose", DecomposeConfig, commands::decompose),
        Command::Clustering(a) => go!(a, "clustering", ClusteringConfig, commands::clustering),
        Command::Pathspace(a) => go!(a, "pathspace", PathspaceConfig, commands::pathspace),
        Command::Quasilocal(a) => go!(a, "quasilocal", QuasilocalConfig, commands::quasilocal),
        Command::All(a) => go!(a, "all", AllConfig, commands::all),
    })
}

/// Library parameter errors count as configuration errors.
fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<UsageError>()
            || matches!(
                c.downcast_ref::<bosegas::Error>(),
                Some(bosegas::Error::InvalidParameter(_) | bosegas::Error::Domain(_) | bosegas::Error::ModeOutside(_))
            )
    })
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let format = match cli.format {
        OutputFormat::Json => Format::Json,
        OutputFormat::Csv => Format::Csv,
    };
    let start = Instant::now();
    let (command, seed, config, out) = dispatch(&cli, format)?;
    let passed = out.checks.all_passed();
    for (name, c) in &out.checks.0 {
        let status = if c.passed { "ok  " } else { "FAIL" };
        match (c.value, c.tolerance, c.relation) {
            (Some(v), Some(t), Some(r)) => eprintln!("{status} {name}: {v:.3e} {r} {t:.1e}"),
            _ => eprintln!("{status} {name}"),
        }
    }
    let body = match out.csv {
        Some(csv) => csv.trim_end().to_string(),
        None => {
            let report = Report {
                command,
                seed,
                config,
                results: out.results,
                checks: out.checks.0,
                passed,
                timing: Timing { elapsed_s: start.elapsed().as_secs_f64(), threads: rayon::current_num_threads(), parts: out.timing },
            };
            serde_json::to_string_pretty(&report)?
        }
    };
    emit(&body, cli.output.as_deref())?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 2 } else { 1 })
        }
    }
}

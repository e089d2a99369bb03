//! `gstr-sim`: run scenarios, density sweeps, case studies, and plots.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for runtime
//! failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gstr_cli::config::{parse_scenario_config, parse_sweep_spec, SweepSpec};
use gstr_cli::plot::Metric;
use gstr_cli::sweep::run_sweep;
use gstr_core::engine::{self, render_event_log, CaseKind, Protocol, ScenarioConfig};
use gstr_core::metrics::{self, RunRecord};

#[derive(Parser)]
#[command(
    name = "gstr-sim",
    about = "Social-trust VANET routing simulator with GPSR/T-GPSR/GTLR baselines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single scenario and print its record as CSV.
    Run(RunArgs),
    /// Run a density sweep and write every record to a CSV file.
    Sweep(SweepArgs),
    /// Chart one metric of a sweep CSV as a standalone SVG.
    Plot(PlotArgs),
    /// Reproduce the three case studies end to end and print a summary.
    Cases(CasesArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the record to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the run's event log to this file.
    #[arg(long)]
    event_log: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
    /// Worker threads (default: GSTR_SIM_THREADS or all cores).
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// Sweep CSV produced by `sweep` or `cases`.
    #[arg(long)]
    input: PathBuf,
    /// Metric to chart: delivery_ratio, avg_hops, or avg_e2e_delay.
    #[arg(long)]
    metric: String,
    /// Case to select from the CSV.
    #[arg(long, default_value = "free")]
    case: String,
    /// Output SVG path.
    #[arg(long, default_value = "plot.svg")]
    out: PathBuf,
}

#[derive(Args)]
struct CasesArgs {
    /// Node densities to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![40, 80, 120, 160, 200])]
    densities: Vec<u32>,
    /// Seeds per (case, density) point.
    #[arg(long, default_value_t = 10)]
    seeds: u32,
    /// Base seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write all records to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: GSTR_SIM_THREADS or all cores).
    #[arg(long)]
    parallel: Option<usize>,
}

/// Errors split by exit code.
enum CliFailure {
    Config(String),
    Runtime(String),
}

impl CliFailure {
    fn code(&self) -> ExitCode {
        match self {
            CliFailure::Config(_) => ExitCode::from(2),
            CliFailure::Runtime(_) => ExitCode::from(3),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliFailure::Config(m) | CliFailure::Runtime(m) => m,
        }
    }
}

fn parallelism(cli_value: Option<usize>) -> usize {
    cli_value
        .or_else(|| {
            std::env::var("GSTR_SIM_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .max(1)
}

fn load_scenario(path: &Option<PathBuf>, seed: Option<u64>) -> Result<ScenarioConfig, CliFailure> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliFailure::Config(format!("{}: {e}", p.display())))?;
            parse_scenario_config(&text)
                .map_err(|e| CliFailure::Config(format!("{}: {e}", p.display())))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> Result<(), CliFailure> {
    let cfg = load_scenario(&args.config, args.seed)?;
    let protocol = cfg.protocol.as_str();
    let num_nodes = cfg.num_nodes;
    let case = cfg.case.as_str();
    let seed = cfg.seed;
    let result = engine::run_scenario(cfg).map_err(|e| CliFailure::Runtime(e.to_string()))?;
    let record = RunRecord::from_accumulator(protocol, num_nodes, case, seed, &result.acc);
    print!("{}", metrics::records_to_csv(std::slice::from_ref(&record)));
    if result.audit_violations > 0 || result.case_violations > 0 {
        return Err(CliFailure::Runtime(format!(
            "audit failed: {} custody violations, {} case violations",
            result.audit_violations, result.case_violations
        )));
    }
    if let Some(path) = &args.out {
        metrics::write_records(std::slice::from_ref(&record), path)
            .map_err(|e| CliFailure::Runtime(e.to_string()))?;
    }
    if let Some(path) = &args.event_log {
        std::fs::write(path, render_event_log(&result.events))
            .map_err(|e| CliFailure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliFailure> {
    let mut spec = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliFailure::Config(format!("{}: {e}", p.display())))?;
            parse_sweep_spec(&text)
                .map_err(|e| CliFailure::Config(format!("{}: {e}", p.display())))?
        }
        None => SweepSpec::default(),
    };
    if let Some(s) = args.seed {
        spec.base.seed = s;
    }
    let records =
        run_sweep(&spec, parallelism(args.parallel)).map_err(CliFailure::Runtime)?;
    metrics::write_records(&records, &args.out)
        .map_err(|e| CliFailure::Runtime(e.to_string()))?;
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> Result<(), CliFailure> {
    let metric: Metric = args.metric.parse().map_err(CliFailure::Config)?;
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliFailure::Config(format!("{}: {e}", args.input.display())))?;
    let records =
        metrics::read_records(&text).map_err(|e| CliFailure::Config(e.to_string()))?;
    let svg = gstr_cli::render_plot(&records, metric, &args.case).map_err(CliFailure::Config)?;
    std::fs::write(&args.out, svg).map_err(|e| CliFailure::Runtime(e.to_string()))?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_cases(args: &CasesArgs) -> Result<(), CliFailure> {
    let spec = SweepSpec {
        densities: args.densities.clone(),
        protocols: vec![Protocol::Gstr],
        cases: CaseKind::CASES.to_vec(),
        seeds_per_point: args.seeds,
        base: ScenarioConfig {
            seed: args.seed,
            ..ScenarioConfig::default()
        },
    };
    spec.validate()
        .map_err(|e| CliFailure::Config(e.to_string()))?;
    let records =
        run_sweep(&spec, parallelism(args.parallel)).map_err(CliFailure::Runtime)?;

    for case in CaseKind::CASES {
        println!("case {}:", case.as_str());
        println!("  nodes  delivery_ratio  avg_hops  avg_e2e_delay_s");
        for &n in &args.densities {
            let rows: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.case == case.as_str() && r.num_nodes == n)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let mean = |f: fn(&RunRecord) -> f64| {
                rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64
            };
            println!(
                "  {:>5}  {:>14.6}  {:>8.6}  {:>15.6}",
                n,
                mean(|r| r.delivery_ratio),
                mean(|r| r.avg_hops),
                mean(|r| r.avg_e2e_delay_s),
            );
        }
    }
    if let Some(path) = &args.out {
        metrics::write_records(&records, path)
            .map_err(|e| CliFailure::Runtime(e.to_string()))?;
        eprintln!("wrote {} records to {}", records.len(), path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Plot(args) => cmd_plot(args),
        Command::Cases(args) => cmd_cases(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.code()
        }
    }
}

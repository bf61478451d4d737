use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fedair_cli::plot::Metric;
use fedair_cli::{parse_config, plot, run_sweep, HarnessError, PlotKind, PlotOptions};

#[derive(Parser)]
#[command(name = "fedair", version, about = "Hybrid digital-analog federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Kind {
    SnrCurve,
    RoundsCurve,
    BudgetCurve,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Global,
    Local,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep point of a config and write CSVs.
    Run { config: PathBuf },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// Plot aggregate CSVs to an SVG file.
    Plot {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Output file; defaults to <kind>.svg next to the first CSV.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Only rows at this SNR.
        #[arg(long, allow_negative_numbers = true)]
        snr: Option<f64>,
        #[arg(long, value_enum, default_value = "global")]
        model: Model,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = parse_config(&config)?;
            let out = run_sweep(&cfg)?;
            println!(
                "{} runs, aggregate written to {}",
                out.run_dirs.len(),
                out.aggregate_path.display()
            );
        }
        Command::Validate { config } => {
            let cfg = parse_config(&config)?;
            let budgets = cfg.resolved_budgets()?;
            println!(
                "ok: {} schemes x {} SNRs x {} budgets x {} seeds, {} parameters",
                cfg.schemes.len(),
                cfg.snr_db.len(),
                budgets.len(),
                cfg.seeds.len(),
                cfg.arch()?.param_count()
            );
        }
        Command::Plot {
            kind,
            csv,
            out,
            snr,
            model,
        } => {
            let kind = match kind {
                Kind::SnrCurve => PlotKind::SnrCurve,
                Kind::RoundsCurve => PlotKind::RoundsCurve,
                Kind::BudgetCurve => PlotKind::BudgetCurve,
            };
            let out = out.unwrap_or_else(|| {
                csv[0]
                    .parent()
                    .unwrap_or_else(|| ".".as_ref())
                    .join(format!("{kind}.svg"))
            });
            let opts = PlotOptions {
                metric: match model {
                    Model::Global => Metric::Global,
                    Model::Local => Metric::Local,
                },
                snr_db: snr,
                ..PlotOptions::default()
            };
            let paths: Vec<&std::path::Path> = csv.iter().map(|p| p.as_path()).collect();
            plot(&paths, kind, &out, &opts)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

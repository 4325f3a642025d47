use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cran_core::harness::{
    aggregate, demo_fig1, emit, read_records, run_experiment_with_workers, ExperimentConfig, Format, Mode,
    SummaryRow,
};

#[derive(Parser)]
#[command(name = "cran", version, about = "AP selection experiments for cloud radio access networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
    Plotdata,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
            OutFormat::Plotdata => Format::Plotdata,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Feasibility,
    SumPower,
    Tradeoff,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Feasibility => Mode::Feasibility,
            ModeArg::SumPower => Mode::SumPower,
            ModeArg::Tradeoff => Mode::Tradeoff,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (defaults to the number of CPUs)
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the config's master seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["csv", "json", "plotdata"])]
        format: Vec<OutFormat>,
    },
    /// Summarize the records of a previous run
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
    },
    /// Active AP sets of each scheme on one heterogeneous network, as JSON
    DemoFig1 {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave out the exhaustive search (the slowest panel)
        #[arg(long)]
        no_es: bool,
    },
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:<14} {:<12} {:>6} {:>10} {:>12} {:>10} {:>12} {:>12}",
        "point", "scheme", "trials", "infeasible", "mean_total", "se_total", "mean_ap", "mean_mu"
    );
    for r in rows {
        println!(
            "{:<14} {:<12} {:>6} {:>10} {:>12.5} {:>10.5} {:>12.5} {:>12.5}",
            r.sweep_label,
            r.scheme.name(),
            r.trials,
            r.infeasible,
            r.mean_total,
            r.se_total,
            r.mean_ap_side,
            r.mean_mu_side
        );
    }
}

fn run(cli: Cli) -> cran_core::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            seed,
            format,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let output = run_experiment_with_workers(&cfg, workers)?;
            for s in &output.skipped {
                eprintln!("skipped {} at sweep point {}: {}", s.scheme, s.sweep_index, s.reason);
            }
            let rows = if output.records.is_empty() {
                Vec::new()
            } else {
                aggregate(&output.records)?
            };
            let formats: Vec<Format> = format.into_iter().map(Format::from).collect();
            for f in emit(&out, &output, &rows, &formats)? {
                eprintln!("wrote {}", f.display());
            }
            print_summary(&rows);
        }
        Command::Aggregate { input, mode } => {
            let output = read_records(&input)?;
            let mode = Mode::from(mode);
            if let Some(r) = output.records.iter().find(|r| r.mode != mode) {
                return Err(cran_core::Error::MixedModes(mode.name().into(), r.mode.name().into()));
            }
            let rows = aggregate(&output.records)?;
            emit(&input, &output, &rows, &[Format::Plotdata])?;
            let summary = input.join("summary.json");
            std::fs::write(&summary, serde_json::to_string_pretty(&rows)?).map_err(|source| {
                cran_core::Error::Write {
                    path: summary.clone(),
                    source,
                }
            })?;
            print_summary(&rows);
        }
        Command::DemoFig1 { seed, out, no_es } => {
            let demo = demo_fig1(seed, !no_es)?;
            let text = serde_json::to_string_pretty(&demo)?;
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|source| cran_core::Error::Write { path, source })?,
                None => println!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

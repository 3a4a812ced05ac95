use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mimo_partition::config::Grid;
use mimo_partition::experiment::{self, ExperimentKind, ExperimentSpec};

/// Overhead-aware user partitioning experiments for MIMO interference channels.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// IA, TDMA, greedy and exhaustive partitions over the data fraction.
    SweepAlpha(Common),
    /// Greedy partitions at every forced number of groups.
    SweepGroups(Common),
    /// Balanced and rate-fair greedy partitions against IA and TDMA.
    GreedyCompare(Common),
    /// Geographic grouping on a cellular layout.
    Geo(Common),
    /// Training-length sweep of the imperfect-CSI bound.
    TrainOpt(Common),
    /// Greedy against the exhaustive search, with per-trial rate ratios.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file with [scenario] and [experiment] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "MIMO_PARTITION_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "MIMO_PARTITION_TRIALS")]
    trials: Option<usize>,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep grid as start:stop:step (data fraction, or τ for train-opt).
    #[arg(long)]
    grid: Option<Grid>,
}

fn spec_for(kind: ExperimentKind, args: &Common) -> mimo_partition::Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => ExperimentSpec::load(kind, path)?,
        None => ExperimentSpec::default_for(kind),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }
    if let Some(grid) = args.grid {
        spec.grid = grid;
    }
    spec.validate()?;
    Ok(spec)
}

fn execute(kind: ExperimentKind, args: &Common) -> mimo_partition::Result<()> {
    let spec = spec_for(kind, args)?;
    let rows = experiment::run(&spec)?;
    match &args.out {
        Some(path) => experiment::write_csv(&rows, BufWriter::new(File::create(path)?))?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            experiment::write_csv(&rows, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::SweepAlpha(a) => (ExperimentKind::SweepAlpha, a),
        Command::SweepGroups(a) => (ExperimentKind::SweepGroups, a),
        Command::GreedyCompare(a) => (ExperimentKind::GreedyCompare, a),
        Command::Geo(a) => (ExperimentKind::Geo, a),
        Command::TrainOpt(a) => (ExperimentKind::TrainOpt, a),
        Command::Oracle(a) => (ExperimentKind::Oracle, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mimo-partition {kind}: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tandem::config::ExperimentConfig;
use tandem::experiment::{self, CommandOutput, EXIT_USAGE};

#[derive(Parser)]
#[command(
    name = "tandem",
    version,
    about = "Safe neuroevolution experiments for an inverted pendulum"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides ga.seed and sim.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// No progress on stderr.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Design the SAFE gain and check recovery from every hypercube vertex.
    DesignSafe(Common),
    /// Run the genetic algorithm under SAFE supervision.
    Optimize(Common),
    /// Compare a genome against SAFE over the RMS window.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Genome file (binary or hex); defaults to evaluate.genome.
        #[arg(long)]
        genome: Option<PathBuf>,
    },
    /// One optimization per (Pw, Aw) pair of sweep.pairs.
    SweepWeights(Common),
}

fn load(common: &Common) -> tandem::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(command: &Command) -> tandem::Result<CommandOutput> {
    let common = match command {
        Command::DesignSafe(c) | Command::Optimize(c) | Command::SweepWeights(c) => c,
        Command::Evaluate { common, .. } => common,
    };
    let cfg = load(common)?;
    let quiet = common.quiet;
    let mut log = |line: &str| {
        if !quiet {
            eprintln!("{line}");
        }
    };
    match command {
        Command::DesignSafe(_) => experiment::cmd_design_safe(&cfg),
        Command::Optimize(_) => experiment::cmd_optimize(&cfg, &mut log),
        Command::Evaluate { genome, .. } => experiment::cmd_evaluate(&cfg, genome.as_deref()),
        Command::SweepWeights(_) => experiment::cmd_sweep_weights(&cfg, &mut log),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(&cli.command) {
        Ok(out) => {
            println!("{}", out.summary);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiment::exit_code(&e) as u8)
        }
    }
}

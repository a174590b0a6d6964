use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deem::config::Config;
use deem::harness::{self, RunReport};
use deem::Result;

#[derive(Parser, Debug)]
#[command(name = "deem", version, about = "Date-partitioned ensemble pseudo-labeling")]
struct Cli {
    /// Worker threads (0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment config (defaults apply when omitted)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the config's top-level seed
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut config = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset (manifest, class table, sidecar truth)
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pseudo-label every date group, build the branched model, report
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Whole-dataset model versus per-date models
    AblateSplit {
        #[command(flatten)]
        common: Common,
        /// Data directory; synthetic data is generated per seed when omitted
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Direct voting versus progressive learning
    AblateProgressive {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Progressive learning with 1..N experts
    AblateExperts {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict the test samples of a manifest with a saved model bundle
    Infer {
        /// Model bundle directory
        #[arg(long)]
        model: PathBuf,
        /// Manifest file or data directory
        #[arg(long)]
        data: PathBuf,
        /// Predictions file to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the human-readable form of a saved report
    Report {
        /// Report file or output directory containing report.json
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_report(report: &RunReport) {
    print!("{}", report.render());
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenData { common, out } => {
            let summary = harness::gen_data(&common.load()?, &out)?;
            print!("{}", summary.render());
        }
        Command::Run { common, data, out } => {
            print_report(&harness::run(&common.load()?, &data, &out)?);
        }
        Command::AblateSplit { common, data, out } => {
            let report = harness::ablate(harness::ablate_split, &common.load()?, data.as_deref(), &out)?;
            print_report(&report);
        }
        Command::AblateProgressive { common, data, out } => {
            let report = harness::ablate(harness::ablate_progressive, &common.load()?, data.as_deref(), &out)?;
            print_report(&report);
        }
        Command::AblateExperts { common, data, out } => {
            let report = harness::ablate(harness::ablate_experts, &common.load()?, data.as_deref(), &out)?;
            print_report(&report);
        }
        Command::Infer { model, data, out } => {
            let predictions = harness::infer(&model, &data, &out)?;
            println!("wrote {} predictions to {}", predictions.len(), out.display());
        }
        Command::Report { out } => print_report(&harness::read_report(Path::new(&out))?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: could not size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}

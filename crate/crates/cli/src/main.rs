use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linbayes_cli::{init_threads, load_config, CliResult, Overrides, Pipeline, Stage};

#[derive(Parser)]
#[command(name = "linbayes", version, about = "Linearized Bayesian inversion pipeline")]
struct Cli {
    /// Log solver iterations and stage progress.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed_data: Option<u64>,
    #[arg(long)]
    seed_sample: Option<u64>,
    #[arg(long)]
    seed_lanczos: Option<u64>,
}

#[derive(Args)]
struct Sampling {
    /// Number of samples, overriding `sample_count`.
    #[arg(long)]
    count: Option<usize>,
    /// Sampling seed, same as `--seed-sample`.
    #[arg(long, conflicts_with = "seed_sample")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage, or a single one with `--stage`.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        stage: Option<Stage>,
    },
    /// Draw prior samples.
    SamplePrior {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Synthesize data and compute the MAP point.
    Map {
        #[command(flatten)]
        common: Common,
    },
    /// Dominant eigenpairs of the prior-preconditioned Hessian at the MAP
    /// point.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Prior and posterior pointwise variance.
    Variance {
        #[command(flatten)]
        common: Common,
    },
    /// Draw samples from the low-rank posterior.
    SamplePosterior {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sampling: Sampling,
    },
}

impl Common {
    fn overrides(&self, sampling: Option<&Sampling>) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed_data: self.seed_data,
            seed_sample: sampling.and_then(|s| s.seed).or(self.seed_sample),
            seed_lanczos: self.seed_lanczos,
            count: sampling.and_then(|s| s.count),
        }
    }
}

fn execute(command: Command) -> CliResult<()> {
    let (common, sampling, stages): (Common, Option<Sampling>, Vec<Stage>) = match command {
        Command::Run { common, stage } => (common, None, stage.map_or(Stage::ALL.to_vec(), |s| vec![s])),
        Command::SamplePrior { common, sampling } => (common, Some(sampling), vec![Stage::SamplePrior]),
        Command::Map { common } => (common, None, vec![Stage::Map]),
        Command::Spectrum { common } => (common, None, vec![Stage::Spectrum]),
        Command::Variance { common } => (common, None, vec![Stage::Variance]),
        Command::SamplePosterior { common, sampling } => (common, Some(sampling), vec![Stage::SamplePosterior]),
    };
    let config = load_config(&common.config, &common.overrides(sampling.as_ref()))?;
    init_threads()?;
    let mut pipeline = Pipeline::open(config)?;
    for stage in stages {
        println!("{}", pipeline.run_stage(stage)?);
    }
    println!("manifest: {}", pipeline.output_dir().join("manifest.json").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

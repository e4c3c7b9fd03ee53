use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use noma_aoi::config::load_config;
use noma_aoi::experiments::{self, Baseline, Context, Sweep};
use noma_aoi::output::RunManifest;

/// Default output root when `--out` is absent.
const OUT_ENV: &str = "NOMA_AOI_OUT";

#[derive(Parser)]
#[command(name = "noma-aoi", version, about = "AoI-aware NOMA scheduling experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file, or `default`.
    #[arg(long, global = true, default_value = "default")]
    config: PathBuf,
    /// Master seed (defaults to `run.seed` of the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory (defaults to `$NOMA_AOI_OUT/<command>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a hybrid DQN/DDPG policy at one preference weight.
    Train {
        #[arg(long)]
        zeta: Option<f64>,
    },
    /// Meta-train an initialization over sampled preference weights.
    MetaTrain,
    /// Fine-tune a meta snapshot at one preference weight.
    FineTune {
        /// Directory of a meta snapshot.
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Evaluate a policy snapshot and trace one episode.
    Eval {
        /// Directory of a policy snapshot.
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        zeta: Option<f64>,
    },
    /// Fronts and hypervolumes of the hybrid, meta, fine-tuned and random policies.
    Pareto,
    /// Hypervolumes of saved front CSVs.
    Hypervolume {
        #[arg(long = "front", required = true)]
        fronts: Vec<PathBuf>,
    },
    /// Fronts of a baseline policy.
    Baseline {
        #[arg(value_enum)]
        kind: BaselineArg,
    },
    /// Objective against one experiment parameter.
    Sweep {
        #[arg(value_enum)]
        kind: SweepArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Random,
    Exhaustive,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Zeta,
    Vehicles,
    Processes,
    Demand,
    Speed,
    Environment,
    FinetuneSteps,
}

impl From<SweepArg> for Sweep {
    fn from(s: SweepArg) -> Self {
        match s {
            SweepArg::Zeta => Sweep::Zeta,
            SweepArg::Vehicles => Sweep::Vehicles,
            SweepArg::Processes => Sweep::Processes,
            SweepArg::Demand => Sweep::Demand,
            SweepArg::Speed => Sweep::Speed,
            SweepArg::Environment => Sweep::Environment,
            SweepArg::FinetuneSteps => Sweep::FinetuneSteps,
        }
    }
}

impl Command {
    fn slug(&self) -> String {
        match self {
            Command::Train { .. } => "train".into(),
            Command::MetaTrain => "meta-train".into(),
            Command::FineTune { .. } => "fine-tune".into(),
            Command::Eval { .. } => "eval".into(),
            Command::Pareto => "pareto".into(),
            Command::Hypervolume { .. } => "hypervolume".into(),
            Command::Baseline { kind: BaselineArg::Random } => "baseline-random".into(),
            Command::Baseline { kind: BaselineArg::Exhaustive } => "baseline-exhaustive".into(),
            Command::Sweep { kind } => format!("sweep-{}", Sweep::from(*kind).name()),
        }
    }
}

fn out_dir(explicit: Option<PathBuf>, configured: Option<&str>, slug: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p;
    }
    let root = std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .or_else(|| configured.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(slug)
}

fn run(cli: Cli) -> noma_aoi::Result<(PathBuf, RunManifest)> {
    let config = load_config(&cli.common.config)?;
    let seed = cli.common.seed.unwrap_or(config.run.seed);
    let out = out_dir(cli.common.out, config.run.out_dir.as_deref(), &cli.command.slug());
    let ctx = Context::new(config, seed, &out)?;
    let manifest = match cli.command {
        Command::Train { zeta } => experiments::train(&ctx, zeta)?,
        Command::MetaTrain => experiments::meta_train(&ctx)?,
        Command::FineTune { meta, zeta, steps } => experiments::fine_tune(&ctx, &meta, zeta, steps)?,
        Command::Eval { policy, zeta } => experiments::eval(&ctx, &policy, zeta)?,
        Command::Pareto => {
            let (manifest, fronts) = experiments::pareto(&ctx)?;
            for f in &fronts {
                println!("{}", noma_aoi::core::pareto::describe_front(f));
            }
            manifest
        }
        Command::Hypervolume { fronts } => experiments::hypervolume(&ctx, &fronts)?,
        Command::Baseline { kind } => experiments::baseline(
            &ctx,
            match kind {
                BaselineArg::Random => Baseline::Random,
                BaselineArg::Exhaustive => Baseline::Exhaustive,
            },
        )?,
        Command::Sweep { kind } => experiments::sweep(&ctx, kind.into())?,
    };
    Ok((out, manifest))
}

fn report(out: &Path, manifest: &RunManifest) {
    println!("{} finished in {}", manifest.command, out.display());
    for a in &manifest.artifacts {
        println!("  {a}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((out, manifest)) => {
            report(&out, &manifest);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use bellcert::campaign::{self, Campaign, CampaignConfig, EXIT_SCHEMA};
use bellcert::error::Error;
use bellcert::report::Status;
use clap::{Args, Parser, Subcommand};

/// Runs certification campaigns and writes report.csv, report.json and plotdata/.
#[derive(Parser)]
#[command(name = "bellcert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Args)]
struct Options {
    /// JSON campaign configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `outputs` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed, overriding `seed` from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Treat refinement-order shortfalls as failures.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Size, convexity and derivative bounds of the Bellman function.
    CertifyBellman,
    /// Properties of the mollified Bellman function and the Holder step.
    MollifyCheck,
    /// Discrete structure, subordination, semigroup lemmas and the Bochner identity.
    SemigroupProps,
    /// Bilinear embedding, duality identity and the pointwise spot check.
    Embedding,
    /// Lower bounds for the Riesz transform norm against the ceiling.
    RieszNorm,
    /// Audit of the final constant.
    ConstantAudit,
    /// Every campaign in turn.
    All,
}

impl From<Command> for Campaign {
    fn from(c: Command) -> Self {
        match c {
            Command::CertifyBellman => Campaign::CertifyBellman,
            Command::MollifyCheck => Campaign::MollifyCheck,
            Command::SemigroupProps => Campaign::SemigroupProps,
            Command::Embedding => Campaign::Embedding,
            Command::RieszNorm => Campaign::RieszNorm,
            Command::ConstantAudit => Campaign::ConstantAudit,
            Command::All => Campaign::All,
        }
    }
}

fn load(opts: &Options) -> Result<CampaignConfig, Error> {
    let mut cfg = match &opts.config {
        Some(path) => CampaignConfig::from_path(path)?,
        None => CampaignConfig::default(),
    };
    if let Some(out) = &opts.out {
        cfg.outputs = out.clone();
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    cfg.strict |= opts.strict;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let campaign = Campaign::from(cli.command);
    let cfg = match load(&cli.opts) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("bellcert: {e}");
            return ExitCode::from(EXIT_SCHEMA as u8);
        }
    };
    let outcome = match campaign::run(campaign, &cfg) {
        Ok(o) => o,
        Err(e @ Error::Config(_)) => {
            eprintln!("bellcert: {e}");
            return ExitCode::from(EXIT_SCHEMA as u8);
        }
        Err(e) => {
            eprintln!("bellcert: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Err(e) = outcome.write(&cfg.outputs) {
        eprintln!("bellcert: cannot write {}: {e}", cfg.outputs.display());
        return ExitCode::FAILURE;
    }
    let count = |s: Status| {
        outcome
            .report
            .checks
            .iter()
            .filter(|r| r.status == s)
            .count()
    };
    for r in outcome
        .report
        .checks
        .iter()
        .filter(|r| r.status != Status::Pass)
    {
        let status = format!("{:?}", r.status).to_lowercase();
        let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!(
            "{status:<12} {} [{}] margin={:e}",
            r.id,
            params.join(", "),
            r.margin
        );
    }
    println!(
        "{campaign}: {} checks, {} pass, {} fail, {} inconclusive; reports in {}",
        outcome.report.checks.len(),
        count(Status::Pass),
        count(Status::Fail),
        count(Status::Inconclusive),
        cfg.outputs.display()
    );
    ExitCode::from(outcome.exit_code() as u8)
}

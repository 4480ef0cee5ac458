use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use meanfield_lab::{parse_config, run, CliError, Command, ExperimentConfig, Format, Overrides, Summary};

#[derive(Debug, Parser)]
#[command(name = "meanfield-lab", version, about = "Mean field game vs McKean-Vlasov control experiments")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Artifact path; overrides `output.path` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MEANFIELD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("MEANFIELD_THREADS must be a positive integer, got `{raw}`")))?;
    if n == 0 {
        return Err(CliError::Validation("MEANFIELD_THREADS must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Other(e.to_string()))
}

fn execute(args: Args) -> Result<Summary, CliError> {
    let cfg = match &args.config {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&bytes)?
        }
        None => ExperimentConfig::default(),
    };
    configure_threads()?;
    let overrides = Overrides {
        out: args.out,
        format: args.format,
        seed: args.seed,
        lambda: args.lambda,
        cap: args.cap,
        sigma: args.sigma,
        horizon: args.horizon,
        x0: args.x0,
        paths: args.paths,
    };
    run(args.command, &cfg, &overrides)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args) {
        Ok(summary) => {
            // A closed pipe (e.g. `| head`) is not an error for a batch tool.
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", summary.line())
                .and_then(|()| out.write_all(summary.table.as_deref().unwrap_or_default().as_bytes()))
                .and_then(|()| out.flush());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("meanfield-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

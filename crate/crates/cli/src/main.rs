//! `flownoise` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 when a solver flagged
//! non-convergence in the written outputs, 1 for anything else.

mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{CommandFactory, Parser, Subcommand};
use flownoise::ensemble::DataCase;
use flownoise::masks::Pattern;
use flownoise::solvers::Method;
use flownoise::transforms::Family;

/// Parser accepting exactly the names of `values`, listed in errors and help.
fn choices<T>(values: impl IntoIterator<Item = T>, name: fn(T) -> &'static str) -> impl TypedValueParser<Value = T>
where
    T: std::str::FromStr + Clone + Send + Sync + 'static,
    T::Err: std::error::Error + Send + Sync + 'static,
{
    let names: Vec<&'static str> = values.into_iter().map(name).collect();
    PossibleValuesParser::new(names).try_map(|s| s.parse::<T>())
}

#[derive(Debug, Parser)]
#[command(name = "flownoise", version, about = "Undersampled 4D-flow reconstruction and noise-correlation analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic flow field (density, phase, velocities, fluid mask).
    MakeData {
        #[arg(long, value_parser = choices(DataCase::ALL.into_iter().filter(|c| *c != DataCase::File), DataCase::name))]
        case: DataCase,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 1.0)]
        venc: f64,
        #[arg(long, default_value_t = 0.8)]
        vmax: f64,
        /// Lumen radius in pixels; size/4 by default.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a sampling mask; random-density patterns also get a density grid.
    MakeMask {
        #[arg(long, value_parser = choices(Pattern::ALL, Pattern::name))]
        pattern: Pattern,
        /// Fraction of frequencies removed; 0 keeps everything.
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct the four images of a field from one noisy acquisition.
    Reconstruct {
        /// Field directory written by make-data.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value = "cs", value_parser = choices(Method::ALL, Method::name))]
        method: Method,
        #[arg(long, default_value = "haar", value_parser = choices(Family::ALL, Family::name))]
        wavelet: Family,
        #[arg(long, default_value_t = flownoise::transforms::DEFAULT_LEVELS)]
        levels: usize,
        /// Noise as a percentage of the mean k-space amplitude.
        #[arg(long, default_value_t = 0.0)]
        noise_pct: f64,
        /// Residual bound for cs/csdeb; the 95% noise radius by default.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; overrides the config, 0 uses all cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Recompute tables of a stored run, optionally with correlation
    /// summaries and covariance kernels.
    Analyze {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        correlations: bool,
        #[arg(long)]
        kernels: bool,
    },
    /// Render a PNG panel and write the underlying CSV next to it.
    Plot {
        /// Run directories; recon and error plots put one column per run.
        #[arg(long, required = true)]
        run: Vec<PathBuf>,
        #[arg(long)]
        what: plot::What,
        /// Velocity component for correlation plots.
        #[arg(long, default_value_t = 3)]
        component: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Successful outcome of a command.
pub enum Status {
    Done,
    Flagged,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use flownoise::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidInput(_) | E::DimensionMismatch { .. } | E::Format(_) | E::Json(_) | E::Io(_) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<commands::UsageError>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            if e.kind() == clap::error::ErrorKind::InvalidValue {
                let mut cmd = Cli::command();
                cmd.build();
                let sub = std::env::args().nth(1).unwrap_or_default();
                let usage = match cmd.find_subcommand_mut(&sub) {
                    Some(sc) => sc.render_usage(),
                    None => cmd.render_usage(),
                };
                eprintln!("\n{usage}");
            }
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::MakeData { case, size, venc, vmax, radius, out } => commands::make_data(case, size, venc, vmax, radius, &out),
        Command::MakeMask { pattern, ratio, size, seed, out } => commands::make_mask(pattern, ratio, size, seed, &out),
        Command::Reconstruct { data, mask, method, wavelet, levels, noise_pct, eta, seed, out } => {
            let opts = commands::ReconOptions { method, wavelet, levels, noise_pct, eta, seed };
            commands::reconstruct(&data, &mask, &opts, &out)
        }
        Command::Ensemble { config, out, workers } => commands::ensemble(&config, &out, workers),
        Command::Analyze { run, correlations, kernels } => commands::analyze(&run, correlations, kernels),
        Command::Plot { run, what, component, out } => plot::plot(&run, what, component, &out),
    };
    match result {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Flagged) => {
            eprintln!("warning: some reconstructions did not converge");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

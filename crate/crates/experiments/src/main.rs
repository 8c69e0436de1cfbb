use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isogeo_core::{registry, PullbackManifold};
use isogeo_experiments::runner::{geodesic_samples, write_geodesic_csv};
use isogeo_experiments::{run, ExperimentConfig};
use nalgebra::DVector;

const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "isogeo", version, about = "Experiments on pullback geometries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Parse and check a config file without running it.
    Validate { config: PathBuf },
    /// Print a sampled geodesic between two points as CSV.
    Geodesic {
        #[arg(long)]
        geometry: String,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        z: Option<f64>,
        #[arg(long)]
        dim: Option<usize>,
        /// Comma-separated start point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        from: Vec<f64>,
        /// Comma-separated end point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        to: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Sample at constant ℓ²-speed instead of along the Levi-Civita parameterisation.
        #[arg(long)]
        iso: bool,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_USAGE)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load(&config) {
            Ok(_) => {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run { config } => {
            let cfg = match load(&config) {
                Ok(cfg) => cfg,
                Err(code) => return code,
            };
            match run(&cfg) {
                Ok(report) => {
                    if let Some(e) = &report.error {
                        eprintln!("error: {e}");
                    }
                    eprintln!(
                        "{:?}: wrote {} files to {}",
                        report.status,
                        report.files.len() + 1,
                        report.output_dir.display()
                    );
                    ExitCode::from(report.status.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Geodesic {
            geometry,
            beta,
            eta,
            a,
            z,
            dim,
            from,
            to,
            samples,
            iso,
        } => {
            let mut params = BTreeMap::new();
            for (k, v) in [("beta", beta), ("eta", eta), ("a", a), ("z", z), ("dim", dim.map(|d| d as f64))] {
                if let Some(v) = v {
                    params.insert(k.to_string(), v);
                }
            }
            let diffeo = match registry::build(&geometry, &params) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_USAGE);
                }
            };
            let d = diffeo.dim();
            if from.len() != d || to.len() != d || samples < 2 {
                eprintln!("error: --from/--to need {d} coordinates and --samples at least 2");
                return ExitCode::from(EXIT_USAGE);
            }
            let m = PullbackManifold::new(diffeo);
            let (x, y) = (DVector::from_vec(from), DVector::from_vec(to));
            let result = geodesic_samples(&m, &x, &y, samples, iso && x != y)
                .and_then(|s| Ok(write_geodesic_csv(io::stdout().lock(), &s)?));
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}

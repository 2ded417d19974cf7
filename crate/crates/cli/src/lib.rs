//! Command-line front end for the `gbbm` experiments.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use gbbm::config::{parse_number, DataKind, DataSpec, RunConfig};
use gbbm::tracker::{self, TRAJECTORY_FILE};
use gbbm::{snapshot, Error, Grid};

/// Config used by `verify` for the continuation scan unless overridden.
const DEFAULT_CONTINUATION_CONFIG: &str = include_str!("../../../configs/continuation_small.json");

/// Lower limit on the fitted decay exponent accepted by `decay-law`.
pub const MIN_DECAY_EXPONENT: f64 = -1.15;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "gbbm",
    version,
    about = "Radius-of-analyticity experiments for the fifth-order KdV-BBM equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve the configured data and write the trajectory CSV.
    Simulate { config: PathBuf },
    /// Run the σ-continuation loop up to T*.
    Continuation {
        config: PathBuf,
        #[arg(long = "t-star")]
        t_star: f64,
        /// Override `continuation_c` from the config.
        #[arg(long)]
        c: Option<f64>,
    },
    /// Fit σ̂(t) ≈ c·t^p on the tail of a tracked run.
    DecayLaw { config: PathBuf },
    /// Run the property suite and print the table of empirical constants.
    Verify {
        /// Config for the continuation constant scan.
        #[arg(long)]
        continuation_config: Option<PathBuf>,
        /// Write multiplier-bound counterexamples (JSON lines) here.
        #[arg(long)]
        counterexamples: Option<PathBuf>,
    },
    /// Write an initial-data snapshot.
    GenData {
        kind: KindArg,
        #[arg(long, default_value_t = 256)]
        n_modes: usize,
        /// Period, e.g. 50.3 or 16pi.
        #[arg(long, default_value = "16pi")]
        length: String,
        #[arg(long, default_value_t = 0.1)]
        amplitude: f64,
        #[arg(long, default_value_t = 0.5)]
        sigma0: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        width: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    PoissonKernel,
    GaussianBump,
    ModeSum,
}

impl From<KindArg> for DataKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::PoissonKernel => DataKind::PoissonKernel,
            KindArg::GaussianBump => DataKind::GaussianBump,
            KindArg::ModeSum => DataKind::ModeSum,
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => EXIT_CONFIG,
                _ => EXIT_FAILED,
            }
        }
    }
}

fn load(path: &Path) -> gbbm::Result<RunConfig> {
    RunConfig::load(path)
}

fn dispatch(command: Command) -> gbbm::Result<i32> {
    match command {
        Command::Simulate { config } => {
            let cfg = load(&config)?;
            let (traj, path) = tracker::simulate_to_dir(&cfg)?;
            let last = traj.rows.last().expect("at least the initial row");
            println!("wrote {} ({} rows)", path.display(), traj.rows.len());
            println!(
                "t = {}  sigma_hat = {:.6}  energy = {:.12e}",
                last.t, last.sigma_hat, last.energy
            );
            Ok(EXIT_OK)
        }
        Command::Continuation { config, t_star, c } => {
            let cfg = load(&config)?;
            let c = c.unwrap_or(cfg.continuation_c);
            if !(c > 0.0) {
                return Err(Error::Config(format!("--c must be > 0, got {c}")));
            }
            let out = tracker::continuation_run_with(&cfg, t_star, c)?;
            println!("sigma            {}", out.sigma);
            println!("keybound_ok      {}", out.keybound_ok);
            println!("local_steps      {}", out.local_steps);
            println!("max E_sigma/E_0  {:.12}", out.max_energy_ratio);
            if let Some(t) = out.failure_time {
                println!("failure_time     {t}");
            }
            Ok(if out.keybound_ok {
                EXIT_OK
            } else {
                EXIT_FAILED
            })
        }
        Command::DecayLaw { config } => {
            let cfg = load(&config)?;
            let law = tracker::decay_law_experiment(&cfg)?;
            let path = cfg.output_dir.join(TRAJECTORY_FILE);
            law.trajectory.write_csv(&path)?;
            println!("wrote {}", path.display());
            println!("exponent_hat     {:.6}", law.exponent_hat);
            println!("c_hat            {:.6}", law.c_hat);
            println!("inf t*sigma_hat  {:.6}", law.inf_t_sigma);
            println!(
                "sigma_hat range  [{:.6}, {:.6}] over {} tail samples",
                law.min_sigma_hat, law.max_sigma_hat, law.tail_samples
            );
            let ok = law.exponent_hat >= MIN_DECAY_EXPONENT && law.inf_t_sigma > 0.0;
            Ok(if ok { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Verify {
            continuation_config,
            counterexamples,
        } => {
            let cc = match continuation_config {
                Some(p) => load(&p)?,
                None => RunConfig::from_json(DEFAULT_CONTINUATION_CONFIG)?,
            };
            let report = gbbm::verify::run_suite(Some(&cc))?;
            print!("{}", report.summary());
            if let Some(path) = counterexamples {
                gbbm::verify::multiplier_sweep(2024).write_violations(&path)?;
            }
            Ok(if report.passed() {
                EXIT_OK
            } else {
                EXIT_FAILED
            })
        }
        Command::GenData {
            kind,
            n_modes,
            length,
            amplitude,
            sigma0,
            seed,
            width,
            out,
        } => {
            let l = parse_number(&length)?;
            let grid = Grid::new(n_modes, l).map_err(|e| Error::Config(e.to_string()))?;
            let spec = DataSpec {
                kind: kind.into(),
                amplitude,
                sigma0,
                seed,
                width,
            };
            let field = spec
                .generate(&grid)
                .map_err(|e| Error::Config(e.to_string()))?;
            snapshot::write(&out, &field.inverse())?;
            snapshot::write_metadata(
                &out,
                &[
                    ("t", "0".into()),
                    ("kind", format!("{:?}", spec.kind)),
                    ("n_modes", n_modes.to_string()),
                    ("length", format!("{l:e}")),
                    ("amplitude", format!("{amplitude:e}")),
                    ("sigma0", format!("{sigma0:e}")),
                    ("seed", seed.to_string()),
                    ("width", format!("{width:e}")),
                ],
            )?;
            println!("wrote {}", out.display());
            Ok(EXIT_OK)
        }
    }
}

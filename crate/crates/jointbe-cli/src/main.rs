use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jointbe::config::RunConfig;
use jointbe::driver::{run_case, set_threads, CaseOptions};
use jointbe::io::{load_fe_matrices, write_reduced, write_surface_csv};
use jointbe::rom::{craig_bampton, relative_transform};
use jointbe::verify::criteria::run_suite;
use jointbe::{Error, Result};

/// Frictional contact of jointed structures with boundary elements.
#[derive(Parser)]
#[command(name = "jointbe", version)]
struct Cli {
    /// Worker threads for dense linear algebra; 1 gives bit-reproducible runs.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs a configuration and writes its artifact bundle.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the configured one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a verification suite and prints a JSON report.
    Verify {
        /// analytic, oracle or fixture.
        suite: String,
    },
    /// Writes the composite surface of a configuration as CSV.
    SynthSurface {
        config: PathBuf,
        #[arg(long, default_value = "surface.csv")]
        out: PathBuf,
    },
    /// Craig-Bampton reduction of an external model onto its interface DOFs.
    Reduce {
        #[arg(long)]
        mass: PathBuf,
        #[arg(long)]
        stiffness: PathBuf,
        #[arg(long)]
        dofs: PathBuf,
        #[arg(long)]
        modes: usize,
        #[arg(long, default_value = "reduced")]
        out: PathBuf,
        /// In-plane tolerance for matching interface nodes [m].
        #[arg(long, default_value_t = 1e-9)]
        match_tolerance: f64,
    },
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out } => {
            let opts = CaseOptions {
                seed: cli.seed,
                out_dir: out,
                threads: cli.threads,
            };
            let (_, manifest, dir) = run_case(&config, &opts)?;
            println!("wrote {} files to {}", manifest.files.len(), dir.display());
            Ok(true)
        }
        Command::Verify { suite } => {
            let report = run_suite(&suite)?;
            for c in &report.checks {
                log::info!("{}", c.line());
            }
            println!("{}", report.to_json());
            Ok(report.passed)
        }
        Command::SynthSurface { config, out } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let base = config.parent().map(PathBuf::from).unwrap_or_default();
            let profile = cfg.surface(&base)?;
            write_surface_csv(&out, &profile)?;
            println!(
                "wrote {} points to {}",
                profile.included().count(),
                out.display()
            );
            Ok(true)
        }
        Command::Reduce {
            mass,
            stiffness,
            dofs,
            modes,
            out,
            match_tolerance,
        } => {
            let bundle = load_fe_matrices(&mass, &stiffness, &dofs)?;
            let setup = bundle.interface_setup(match_tolerance)?;
            let rel = relative_transform(&bundle.model, &setup.pairs)?;
            let red = craig_bampton(&rel, modes)?;
            let files = write_reduced(&out, &red)?;
            println!(
                "reduced {} DOFs to {} boundary DOFs and {} modes; wrote {} files to {}",
                rel.n_dofs(),
                red.n_boundary(),
                red.n_modes(),
                files.len(),
                out.display()
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp_millis()
        .init();
    set_threads(cli.threads);
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(Error::Verification(String::new()).exit_code() as u8),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

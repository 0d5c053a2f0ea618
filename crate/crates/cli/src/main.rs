use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use driftfv_cli::{
    equilibrium_only, reproduce, run_scenario, threads_from_env, CliError, OutputOverrides, ReproduceOptions,
};

#[derive(Parser)]
#[command(name = "driftfv", version, about = "Finite-volume drift-diffusion solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium and transient run of one scenario.
    Run {
        config: PathBuf,
        /// Diagnostics CSV path (default `<config stem>.csv`).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write a VTK snapshot every K steps (0 disables).
        #[arg(long, value_name = "K")]
        vtk_every: Option<usize>,
    },
    /// Thermal equilibrium only.
    Equilibrium {
        config: PathBuf,
        /// Cell CSV path (default `<config stem>_equilibrium.csv`).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Runs the ten diode scenarios and writes a summary.
    Reproduce {
        #[arg(long, default_value = "reproduce")]
        outdir: PathBuf,
        /// External triangulation replacing the Cartesian grid.
        #[arg(long, conflicts_with_all = ["nx", "ny"])]
        mesh: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        nx: usize,
        #[arg(long, default_value_t = 32)]
        ny: usize,
        /// End time of every case (default 10).
        #[arg(long)]
        t_end: Option<f64>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let threads = threads_from_env()?;
    match cli.command {
        Command::Run { config, csv, vtk_every } => {
            run_scenario(&config, &OutputOverrides { csv, vtk_every }, threads).map(drop)
        }
        Command::Equilibrium { config, csv } => {
            equilibrium_only(&config, &OutputOverrides { csv, vtk_every: None }, threads).map(drop)
        }
        Command::Reproduce { outdir, mesh, nx, ny, t_end } => {
            if let Some(mesh) = &mesh {
                if !mesh.is_file() {
                    return Err(CliError::Config(format!("mesh file {} does not exist", mesh.display())));
                }
            }
            reproduce(&ReproduceOptions { outdir, mesh, nx, ny, t_end }, threads).map(drop)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("driftfv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

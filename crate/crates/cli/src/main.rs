use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maggeo_cli::commands;
use maggeo_cli::{CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "maggeo", about = "Closed magnetic geodesics on the unit sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    config: PathBuf,
    /// One value or a comma-separated list; overrides the config.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long)]
    loop_points: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Melnikov grid, its critical points and the distinctness diagnostic.
    MelnikovScan(Common),
    /// Critical search of the reduced energy for every epsilon.
    Solve(Common),
    /// Shooting cross-check of a loop file.
    Shoot {
        #[command(flatten)]
        common: Common,
        #[arg(long = "loop")]
        loop_file: PathBuf,
    },
    /// Residual and diagnostics of a loop file.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long = "loop")]
        loop_file: PathBuf,
    },
    /// Reduced energy and its leading term over a Fibonacci grid.
    Landscape(Common),
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    let overrides = Overrides { epsilon: c.epsilon.clone(), loop_points: c.loop_points, output_dir: c.out.clone() };
    RunConfig::load(&c.config, &overrides)
}

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    match cli.command {
        Command::MelnikovScan(c) => commands::cmd_melnikov_scan(&load(&c)?),
        Command::Solve(c) => commands::cmd_solve(&load(&c)?),
        Command::Shoot { common, loop_file } => commands::cmd_shoot(&load(&common)?, &loop_file),
        Command::Verify { common, loop_file } => commands::cmd_verify(&load(&common)?, &loop_file),
        Command::Landscape(c) => commands::cmd_landscape(&load(&c)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

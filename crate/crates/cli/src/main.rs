use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use recmarl::{plot, runner, verify, CliError};

#[derive(Parser)]
#[command(name = "recmarl", version, about = "Networked-MDP experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a TOML experiment config and write metric files
    Run {
        /// Experiment config (TOML)
        config: PathBuf,
        /// Run exactly this one seed instead of the config's list
        #[arg(long)]
        seed_override: Option<u64>,
        /// Worker threads (default: available cores, capped at the seed count)
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (overrides the config and RECMARL_OUT)
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Re-check the analytic guarantees, one PASS/FAIL line per check
    Verify {
        /// decomposition, gradient, monotone, td_accuracy, or all
        suite: String,
        /// Where to write the JSON report (default: RECMARL_OUT, then `.`)
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Draw metric CSVs as a standalone SVG
    Plot {
        /// File path or pattern; `*` in the file name matches within a run set
        glob: String,
        /// Output SVG path
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, seed_override, threads, out_dir } => {
            let summary =
                runner::run_config_file(&config, seed_override, threads, out_dir.as_deref())?;
            for (path, converged) in summary.curve_files.iter().zip(&summary.converged) {
                match converged {
                    Some(c) => println!("wrote {} (converged avg reward {c})", path.display()),
                    None => println!("wrote {}", path.display()),
                }
            }
            println!("wrote {}", summary.aggregate_file.display());
            Ok(())
        }
        Command::Verify { suite, out_dir } => {
            let path = verify::verify_command(&suite, out_dir.as_deref())?;
            println!("report written to {}", path.display());
            Ok(())
        }
        Command::Plot { glob, out } => {
            let path = plot::plot_command(&glob, &out)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

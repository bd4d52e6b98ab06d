use std::path::PathBuf;

use clap::{Parser, Subcommand};
use vortex_cli::commands::{cmd_plotdata, cmd_solve, cmd_sweep};

#[derive(Parser)]
#[command(
    name = "vortexlab",
    version,
    about = "BPS vortex solvers on a flat torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check admissibility, solve, write report and field dump.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Rerun a configuration over a list of side lengths.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated values of L1; L2 keeps its ratio to L1.
        #[arg(long)]
        lengths: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a field dump to gnuplot grid text.
    Plotdata {
        #[arg(long)]
        fields: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve { config, out } => cmd_solve(&config, &out),
        Command::Sweep {
            config,
            lengths,
            out,
        } => cmd_sweep(&config, &lengths, &out),
        Command::Plotdata { fields, out } => cmd_plotdata(&fields, &out),
    };
    std::process::exit(code);
}

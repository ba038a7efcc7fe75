//! `esefn` command-line harness.
//!
//! Exit codes: 0 success, 1 data or runtime error, 2 usage error.

use clap::{Parser, Subcommand};
use esefn_cli::commands::{
    cmd_ablate, cmd_gradcheck, cmd_sweep, cmd_train, AblateCmd, GradcheckCmd, SweepCmd, TrainCmd,
};

#[derive(Parser)]
#[command(
    name = "esefn",
    version,
    about = "Two-modality feature fusion with expansion-squeeze-excitation attention"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the fusion network; writes a per-epoch report and a checkpoint
    Train(TrainCmd),
    /// Train ablation variants and emit an accuracy table
    Ablate(AblateCmd),
    /// Train one model per loss-weight grid cell
    Sweep(SweepCmd),
    /// Compare analytic gradients against finite differences
    Gradcheck(GradcheckCmd),
}

fn main() {
    let cli = Cli::parse(); // usage errors exit with code 2
    let outcome = match &cli.command {
        Command::Train(cmd) => cmd_train(cmd),
        Command::Ablate(cmd) => cmd_ablate(cmd),
        Command::Sweep(cmd) => cmd_sweep(cmd),
        Command::Gradcheck(cmd) => match cmd_gradcheck(cmd) {
            Ok(true) => Ok(()),
            Ok(false) => {
                std::process::exit(1);
            }
            Err(e) => Err(e),
        },
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

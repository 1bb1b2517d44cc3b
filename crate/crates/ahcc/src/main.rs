use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use ahcc::{run, CliError, Command, RunConfig};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

/// Solver and checks for the extended constant scalar curvature system on
/// the Poincare ball.
#[derive(Parser)]
#[command(name = "ahcc", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the background metric and check its curvature.
    Background(Common),
    /// Solve for (h, xi) and run the verification battery.
    Solve(Common),
    /// Re-run the verification battery on a saved state.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Directory with hbar.ahcf and xibar.ahcf; overrides verify.state.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Compare the numeric Jacobian with the linearization and check the
    /// linear solver on a manufactured solution.
    Lincheck(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Parent directory for run directories.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let (cmd, common, state) = match cli.command {
        Cmd::Background(c) => (Command::Background, c, None),
        Cmd::Solve(c) => (Command::Solve, c, None),
        Cmd::Verify { common, state } => (Command::Verify, common, state),
        Cmd::Lincheck(c) => (Command::Lincheck, c, None),
    };
    let cfg = match RunConfig::load(&common.config) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    match run(cmd, cfg, &common.out, state.as_deref()) {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            if let Some(v) = &outcome.report.verification {
                for c in &v.checks {
                    let verdict = if c.pass { "pass" } else { "FAIL" };
                    let _ = writeln!(
                        out,
                        "{verdict:>4}  {:<24} {:>12.4e}  (tolerance {:.1e}, {})",
                        c.name, c.value, c.tolerance, c.region
                    );
                }
            }
            let _ = writeln!(out, "report: {}", outcome.dir.join(ahcc::commands::REPORT_FILE).display());
            if outcome.report.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(failure) => {
            if let Some(dir) = &failure.dir {
                eprintln!("partial report in {}", dir.display());
            }
            fail(&failure.error)
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}

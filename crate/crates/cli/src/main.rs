use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use penopt_cli::commands::{
    cmd_check, cmd_rate, cmd_solve, parse_point, CheckArgs, CheckMode, PenaltyFlag, RateArgs,
    RhoFlag, SolveArgs, EXIT_USAGE,
};

/// Constrained optimization by exact distance penalties: solve problems,
/// certify ε-approximate stationarity, and sweep convergence rates.
#[derive(Parser)]
#[command(name = "penopt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the subderivative method on a problem file.
    Solve {
        /// Problem document path.
        #[arg(long)]
        problem: PathBuf,
        /// Target stationarity tolerance ε.
        #[arg(long)]
        eps: f64,
        /// Penalty power α ≥ 1 (default 2; `--penalty` may pin it).
        #[arg(long)]
        alpha: Option<f64>,
        /// Penalty family: exact (α=1), square (α=2), power (α from
        /// --alpha), or lp (separable ℓ_α power).
        #[arg(long, default_value = "power")]
        penalty: String,
        /// Penalty parameter: a number, or `auto` for the selection rule.
        #[arg(long, default_value = "auto")]
        rho: String,
        /// Backtracking reduction multiple μ ∈ (0, 1).
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iters: usize,
        /// Write the iteration trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the certificate report here (also printed to stdout).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check stationarity residuals at a given point.
    Check {
        #[arg(long)]
        problem: PathBuf,
        /// Comma-separated point coordinates.
        #[arg(long)]
        point: String,
        #[arg(long)]
        eps: f64,
        /// Penalty parameter for the def41 mode; selected automatically
        /// when omitted.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        /// Residual flavor: def41, conic, or kkt.
        #[arg(long, default_value = "def41")]
        mode: String,
    },
    /// Solve across a list of tolerances and fit the iteration growth.
    Rate {
        #[arg(long)]
        problem: PathBuf,
        /// Comma-separated ε values.
        #[arg(long)]
        eps_list: String,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        /// Write the sweep CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve {
            problem,
            eps,
            alpha,
            penalty,
            rho,
            mu,
            max_iters,
            trace,
            report,
        } => {
            let rho = match rho.parse::<RhoFlag>() {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: --rho: {e}");
                    return ExitCode::from(EXIT_USAGE as u8);
                }
            };
            let penalty = match penalty.parse::<PenaltyFlag>() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: --penalty: {e}");
                    return ExitCode::from(EXIT_USAGE as u8);
                }
            };
            cmd_solve(&SolveArgs {
                problem,
                eps,
                alpha,
                penalty,
                rho,
                mu,
                max_iters,
                trace,
                report,
            })
        }
        Command::Check {
            problem,
            point,
            eps,
            rho,
            alpha,
            mode,
        } => {
            let point = match parse_point(&point) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: --point: {e}");
                    return ExitCode::from(EXIT_USAGE as u8);
                }
            };
            let mode = match mode.parse::<CheckMode>() {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: --mode: {e}");
                    return ExitCode::from(EXIT_USAGE as u8);
                }
            };
            cmd_check(&CheckArgs {
                problem,
                point,
                eps,
                rho,
                alpha,
                mode,
            })
        }
        Command::Rate {
            problem,
            eps_list,
            alpha,
            out,
        } => {
            let eps_list = match parse_point(&eps_list) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: --eps-list: {e}");
                    return ExitCode::from(EXIT_USAGE as u8);
                }
            };
            cmd_rate(&RateArgs {
                problem,
                eps_list,
                alpha,
                out,
            })
        }
    };
    ExitCode::from(code as u8)
}

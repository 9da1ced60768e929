//! The `solve`, `check`, and `rate` commands.
//!
//! Exit codes are total: `0` success, `2` parse/validation failure,
//! `3` solver/runtime failure, `4` certificate failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use penopt::model::{PenaltyMetric, Problem};
use penopt::solver::{
    self, estimate_lower_bound, format_float, solve, SolverConfig, SolverError,
};
use penopt::stationarity::{
    check_approx_stationary, conic_residuals, nlp_kkt_residuals, StationarityError,
};

use crate::expr::ParseError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CERT: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Solver(SolverError),
    #[error("{0}")]
    Stationarity(#[from] StationarityError),
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            // Missing problem data is a validation problem, not a solver
            // breakdown.
            SolverError::MissingFeasiblePoint
            | SolverError::MissingLowerBound
            | SolverError::InvalidConfig(_) => CliError::Validation(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Validation(_) => EXIT_USAGE,
            CliError::Io(_) | CliError::Solver(_) | CliError::Stationarity(_) => EXIT_SOLVER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoFlag {
    Auto,
    Value(f64),
}

impl std::str::FromStr for RhoFlag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(RhoFlag::Auto);
        }
        s.parse::<f64>()
            .map(RhoFlag::Value)
            .map_err(|_| format!("expected `auto` or a number, got `{s}`"))
    }
}

/// The penalty family of a solve: `exact` and `square` pin α to 1 and 2,
/// `power` takes α from `--alpha`, and `lp` switches to the separable
/// ℓ_α-power penalty on interval-product targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyFlag {
    Exact,
    Square,
    Power,
    Lp,
}

impl std::str::FromStr for PenaltyFlag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(PenaltyFlag::Exact),
            "square" => Ok(PenaltyFlag::Square),
            "power" => Ok(PenaltyFlag::Power),
            "lp" => Ok(PenaltyFlag::Lp),
            other => Err(format!("expected exact|square|power|lp, got `{other}`")),
        }
    }
}

impl PenaltyFlag {
    /// Resolves the flag against an explicit `--alpha`, when given.
    pub fn resolve(self, alpha: Option<f64>) -> Result<(f64, PenaltyMetric), String> {
        match self {
            PenaltyFlag::Exact => match alpha {
                None => Ok((1.0, PenaltyMetric::Euclidean)),
                Some(a) if a == 1.0 => Ok((1.0, PenaltyMetric::Euclidean)),
                Some(a) => Err(format!("--penalty exact pins α = 1, got --alpha {a}")),
            },
            PenaltyFlag::Square => match alpha {
                None => Ok((2.0, PenaltyMetric::Euclidean)),
                Some(a) if a == 2.0 => Ok((2.0, PenaltyMetric::Euclidean)),
                Some(a) => Err(format!("--penalty square pins α = 2, got --alpha {a}")),
            },
            PenaltyFlag::Power => Ok((alpha.unwrap_or(2.0), PenaltyMetric::Euclidean)),
            PenaltyFlag::Lp => {
                let a = alpha.unwrap_or(2.0);
                if a > 1.0 {
                    Ok((a, PenaltyMetric::SeparableLp))
                } else {
                    Err(format!("--penalty lp needs α > 1, got {a}"))
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveArgs {
    pub problem: PathBuf,
    pub eps: f64,
    /// Explicit α; the penalty flag supplies the default.
    pub alpha: Option<f64>,
    pub penalty: PenaltyFlag,
    pub rho: RhoFlag,
    pub mu: f64,
    pub max_iters: usize,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    Def41,
    Conic,
    Kkt,
}

impl std::str::FromStr for CheckMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "def41" => Ok(CheckMode::Def41),
            "conic" => Ok(CheckMode::Conic),
            "kkt" => Ok(CheckMode::Kkt),
            other => Err(format!("expected def41|conic|kkt, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckArgs {
    pub problem: PathBuf,
    pub point: Vec<f64>,
    pub eps: f64,
    pub rho: Option<f64>,
    pub alpha: f64,
    pub mode: CheckMode,
}

#[derive(Debug, Clone)]
pub struct RateArgs {
    pub problem: PathBuf,
    pub eps_list: Vec<f64>,
    pub alpha: f64,
    pub out: Option<PathBuf>,
}

fn load_problem(path: &Path, alpha: f64) -> Result<Problem, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let pf = crate::problem_file::ProblemFile::parse(&text)?;
    let problem = pf.to_problem()?;
    problem
        .with_alpha(alpha)
        .map_err(|e| CliError::Validation(e.to_string()))
}

/// Fills in a probed lower bound when the document omits `M` and the
/// penalty parameter must be selected automatically. The probe is a short
/// descent run and is *not* a sound bound; the report labels it.
fn ensure_lower_bound(problem: Problem, alpha: f64) -> Result<(Problem, Option<f64>), CliError> {
    if problem.lower_bound.is_some() {
        return Ok((problem, None));
    }
    if problem.x0.is_none() {
        return Err(CliError::from(SolverError::MissingFeasiblePoint));
    }
    let estimate = estimate_lower_bound(&problem, alpha).map_err(CliError::from)?;
    let problem = problem
        .with_lower_bound(estimate)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((problem, Some(estimate)))
}

pub struct SolveSummary {
    pub report: String,
    pub exit: i32,
}

pub fn run_solve(args: &SolveArgs) -> Result<SolveSummary, CliError> {
    let (alpha, metric) = args
        .penalty
        .resolve(args.alpha)
        .map_err(CliError::Validation)?;
    let problem = load_problem(&args.problem, alpha)?;
    if metric == PenaltyMetric::SeparableLp {
        // Surface an unusable penalty/target pairing as a validation
        // failure before any solver work starts.
        problem
            .penalty_fn_lp(alpha, 1.0)
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let (problem, m_estimate) = match args.rho {
        RhoFlag::Auto => ensure_lower_bound(problem, alpha)?,
        RhoFlag::Value(_) => (problem, None),
    };

    let mut cfg = SolverConfig::new(args.eps);
    cfg.alpha = alpha;
    cfg.penalty_metric = metric;
    cfg.mu = args.mu;
    cfg.max_iters = args.max_iters;
    cfg.trace = args.trace.clone();
    if let RhoFlag::Value(v) = args.rho {
        cfg.rho = Some(v);
    }

    let result = solve(&problem, &cfg).map_err(CliError::from)?;

    let mut report = result.certificate.report();
    report.push_str(&format!("rho_solver: {}\n", format_float(result.rho)));
    report.push_str(&format!("iterations: {}\n", result.iterations));
    report.push_str(&format!("converged: {}\n", result.converged));
    if let Some(m) = m_estimate {
        report.push_str(&format!("m_estimate: unsound-estimate {}\n", format_float(m)));
    }
    if let Some(path) = &args.report {
        fs::write(path, &report)?;
    }

    let exit = if !result.converged {
        EXIT_SOLVER
    } else if result.certificate.passed() {
        EXIT_OK
    } else {
        EXIT_CERT
    };
    Ok(SolveSummary { report, exit })
}

pub fn cmd_solve(args: &SolveArgs) -> i32 {
    match run_solve(args) {
        Ok(summary) => {
            print!("{}", summary.report);
            summary.exit
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub struct CheckSummary {
    pub report: String,
    pub exit: i32,
}

pub fn run_check(args: &CheckArgs) -> Result<CheckSummary, CliError> {
    let problem = load_problem(&args.problem, args.alpha)?;
    if args.point.len() != problem.dim() {
        return Err(CliError::Validation(format!(
            "point has {} entries but the problem has {} variables",
            args.point.len(),
            problem.dim()
        )));
    }
    let x = &args.point;

    match args.mode {
        CheckMode::Def41 => {
            let (problem, rho) = match args.rho {
                Some(r) => (problem, r),
                None => {
                    let (problem, _) = ensure_lower_bound(problem, args.alpha)?;
                    let rho = solver::select_rho(&problem, args.eps).map_err(CliError::from)?;
                    (problem, rho)
                }
            };
            let cert = check_approx_stationary(&problem, x, args.eps, rho, args.alpha)
                .map_err(CliError::from)?;
            let report = cert.report();
            let exit = if cert.passed() { EXIT_OK } else { EXIT_CERT };
            Ok(CheckSummary { report, exit })
        }
        CheckMode::Conic => {
            let r = conic_residuals(&problem, x)?;
            let mut report = String::new();
            report.push_str(&format!("eps_feas: {}\n", format_float(r.feas)));
            report.push_str(&format!("eps_stat: {}\n", format_float(r.stat)));
            for (i, l) in r.lambda.iter().enumerate() {
                report.push_str(&format!("lambda[{i}]: {}\n", format_float(*l)));
            }
            let pass = r.feas <= args.eps && r.stat <= args.eps;
            report.push_str(&format!("passed: {pass}\n"));
            Ok(CheckSummary {
                report,
                exit: if pass { EXIT_OK } else { EXIT_CERT },
            })
        }
        CheckMode::Kkt => {
            let r = nlp_kkt_residuals(&problem, x, None)?;
            let mut report = String::new();
            report.push_str(&format!("stationarity: {}\n", format_float(r.stationarity)));
            report.push_str(&format!("feasibility: {}\n", format_float(r.feasibility)));
            report.push_str(&format!(
                "sign_violation: {}\n",
                format_float(r.sign_violation)
            ));
            report.push_str(&format!(
                "complementarity: {}\n",
                format_float(r.complementarity)
            ));
            report.push_str(&format!(
                "min_multiplier: {}\n",
                format_float(r.min_multiplier)
            ));
            for (i, l) in r.lambda.iter().enumerate() {
                report.push_str(&format!("lambda[{i}]: {}\n", format_float(*l)));
            }
            for (j, m) in r.mu.iter().enumerate() {
                report.push_str(&format!("mu[{j}]: {}\n", format_float(*m)));
            }
            let pass = r.stationarity <= args.eps
                && r.feasibility <= args.eps
                && r.sign_violation <= args.eps
                && r.complementarity <= args.eps;
            report.push_str(&format!("passed: {pass}\n"));
            Ok(CheckSummary {
                report,
                exit: if pass { EXIT_OK } else { EXIT_CERT },
            })
        }
    }
}

pub fn cmd_check(args: &CheckArgs) -> i32 {
    match run_check(args) {
        Ok(summary) => {
            print!("{}", summary.report);
            summary.exit
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub struct RateSummary {
    /// `eps,iters,rho` rows.
    pub csv: String,
    /// Least-squares slope of `log(iters)` on `log(1/eps)`; `None` below
    /// two sweep points.
    pub slope: Option<f64>,
    pub exit: i32,
}

pub fn run_rate(args: &RateArgs) -> Result<RateSummary, CliError> {
    if args.eps_list.is_empty() {
        return Err(CliError::Validation("eps list is empty".into()));
    }
    if args.eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(CliError::Validation("eps values must be positive".into()));
    }
    let problem = load_problem(&args.problem, args.alpha)?;
    let (problem, _) = ensure_lower_bound(problem, args.alpha)?;

    // One solver instance per ε; results collected in sweep order.
    let results: Vec<Result<(usize, f64, bool), SolverError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = args
            .eps_list
            .iter()
            .map(|&eps| {
                let problem = &problem;
                let alpha = args.alpha;
                scope.spawn(move || {
                    let mut cfg = SolverConfig::new(eps);
                    cfg.alpha = alpha;
                    let r = solve(problem, &cfg)?;
                    Ok((r.iterations, r.rho, r.converged))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep thread panicked"))
            .collect()
    });

    let mut csv = String::from("eps,iters,rho\n");
    let mut points = Vec::new();
    let mut all_converged = true;
    for (&eps, result) in args.eps_list.iter().zip(results) {
        let (iters, rho, converged) = result.map_err(CliError::from)?;
        all_converged &= converged;
        csv.push_str(&format!("{},{iters},{}\n", format_float(eps), format_float(rho)));
        points.push(((1.0 / eps).ln(), (iters.max(1) as f64).ln()));
    }
    if let Some(path) = &args.out {
        let mut f = fs::File::create(path)?;
        f.write_all(csv.as_bytes())?;
    }

    let slope = (points.len() >= 2).then(|| least_squares_slope(&points));
    Ok(RateSummary {
        csv,
        slope,
        exit: if all_converged { EXIT_OK } else { EXIT_SOLVER },
    })
}

pub fn cmd_rate(args: &RateArgs) -> i32 {
    match run_rate(args) {
        Ok(summary) => {
            print!("{}", summary.csv);
            match summary.slope {
                Some(s) => println!("slope: {s:.6}"),
                None => println!("slope: n/a"),
            }
            summary.exit
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|(x, _)| x).sum();
    let sy: f64 = points.iter().map(|(_, y)| y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Parses the `--point` flag: comma-separated coordinates.
pub fn parse_point(src: &str) -> Result<Vec<f64>, String> {
    src.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad coordinate `{}`", p.trim()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_flag_parses() {
        assert_eq!("auto".parse::<RhoFlag>().unwrap(), RhoFlag::Auto);
        assert_eq!("101".parse::<RhoFlag>().unwrap(), RhoFlag::Value(101.0));
        assert!("x".parse::<RhoFlag>().is_err());
    }

    #[test]
    fn point_parses() {
        assert_eq!(parse_point("0.5, -1").unwrap(), vec![0.5, -1.0]);
        assert!(parse_point("a,b").is_err());
    }

    #[test]
    fn slope_of_exact_powers() {
        // iters = (1/eps)²: slope 2 exactly.
        let points: Vec<(f64, f64)> = [0.1f64, 0.05, 0.025]
            .iter()
            .map(|&e| ((1.0 / e).ln(), (1.0 / e).powi(2).ln()))
            .collect();
        assert!((least_squares_slope(&points) - 2.0).abs() < 1e-12);
    }
}

//! End-to-end command tests: exit codes, trace CSV, and report formats.

use std::fs;
use std::path::{Path, PathBuf};

use penopt_cli::commands::{
    cmd_check, cmd_rate, cmd_solve, run_check, run_rate, run_solve, CheckArgs, CheckMode,
    PenaltyFlag, RateArgs, RhoFlag, SolveArgs, EXIT_CERT, EXIT_OK, EXIT_SOLVER, EXIT_USAGE,
};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn solve_args(problem: PathBuf, eps: f64) -> SolveArgs {
    SolveArgs {
        problem,
        eps,
        alpha: None,
        penalty: PenaltyFlag::Power,
        rho: RhoFlag::Auto,
        mu: 0.5,
        max_iters: 100_000,
        trace: None,
        report: None,
    }
}

fn report_value(report: &str, key: &str) -> Option<f64> {
    report.lines().find_map(|l| {
        let rest = l.strip_prefix(key)?.strip_prefix(':')?;
        rest.trim().parse().ok()
    })
}

#[test]
fn solve_benchmark_with_auto_rho() {
    let tmp = tempfile::tempdir().unwrap();
    let trace_path = tmp.path().join("trace.csv");
    let report_path = tmp.path().join("report.txt");
    let mut args = solve_args(fixture("bench_1d.prob"), 0.1);
    args.trace = Some(trace_path.clone());
    args.report = Some(report_path.clone());

    let summary = run_solve(&args).unwrap();
    assert_eq!(summary.exit, EXIT_OK);
    let feas = report_value(&summary.report, "eps_feas").unwrap();
    assert!((feas - 0.00495).abs() < 1e-4, "eps_feas = {feas}");
    // The selection rule fills in ρ = 101 from the document data.
    let rho = report_value(&summary.report, "rho_solver").unwrap();
    assert_eq!(rho, 101.0);
    assert_eq!(fs::read_to_string(&report_path).unwrap(), summary.report);

    // Trace CSV: header plus strictly decreasing f_val rows.
    let trace = fs::read_to_string(&trace_path).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "k,f_val,dist_val,dir_value,step,backtracks");
    let f_vals: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(f_vals.len() >= 2);
    for pair in f_vals.windows(2) {
        assert!(pair[1] < pair[0], "trace f_val not strictly decreasing");
    }
}

#[test]
fn solve_exit_codes_are_total() {
    let tmp = tempfile::tempdir().unwrap();

    // Missing start point with automatic ρ: validation failure.
    let nostart = tmp.path().join("nostart.prob");
    fs::write(
        &nostart,
        "variables = 1\nobjective = x1\nconstraint.expr = 1 - x1\nconstraint.set = orthant-\nM = 0\n",
    )
    .unwrap();
    assert_eq!(cmd_solve(&solve_args(nostart, 0.1)), EXIT_USAGE);

    // Unparseable document: validation failure.
    let bad = tmp.path().join("bad.prob");
    fs::write(&bad, "variables = 1\nobjective = x1 + $\n").unwrap();
    assert_eq!(cmd_solve(&solve_args(bad, 0.1)), EXIT_USAGE);

    // Infeasible start: validation failure.
    let infeasible = tmp.path().join("infeasible.prob");
    fs::write(
        &infeasible,
        "variables = 1\nobjective = x1\nconstraint.expr = 1 - x1\nconstraint.set = orthant-\nstart = [0]\nM = 0\n",
    )
    .unwrap();
    assert_eq!(cmd_solve(&solve_args(infeasible, 0.1)), EXIT_USAGE);

    // Iteration budget exhausted: solver failure.
    let mut tiny = solve_args(fixture("bench_1d.prob"), 0.1);
    tiny.max_iters = 1;
    assert_eq!(cmd_solve(&tiny), EXIT_SOLVER);
}

#[test]
fn solve_at_exact_kkt_point_with_zero_eps() {
    // The conic fixture starts at its KKT point; with the exact penalty
    // and a ρ above the multiplier the solve stops immediately at ε = 0.
    let mut args = solve_args(fixture("conic_kkt.prob"), 0.0);
    args.penalty = PenaltyFlag::Exact;
    args.rho = RhoFlag::Value(5.0);
    let summary = run_solve(&args).unwrap();
    assert_eq!(summary.exit, EXIT_OK, "report:\n{}", summary.report);
    assert_eq!(report_value(&summary.report, "iterations").unwrap(), 0.0);
}

#[test]
fn solve_with_lp_penalty_flag() {
    // The separable cubic penalty is smooth; on the orthant problem the
    // descent stays feasible and the run certifies cleanly.
    let mut args = solve_args(fixture("orthant_qp.prob"), 0.05);
    args.penalty = PenaltyFlag::Lp;
    args.alpha = Some(3.0);
    let summary = run_solve(&args).unwrap();
    assert_eq!(summary.exit, EXIT_OK, "report:\n{}", summary.report);

    // Interval-product targets only.
    let mut args = solve_args(fixture("ball_con.prob"), 0.05);
    args.penalty = PenaltyFlag::Lp;
    assert_eq!(cmd_solve(&args), EXIT_USAGE);
}

#[test]
fn penalty_flag_resolution() {
    use penopt::model::PenaltyMetric;
    assert_eq!(
        PenaltyFlag::Exact.resolve(None).unwrap(),
        (1.0, PenaltyMetric::Euclidean)
    );
    assert_eq!(
        PenaltyFlag::Square.resolve(None).unwrap(),
        (2.0, PenaltyMetric::Euclidean)
    );
    assert_eq!(
        PenaltyFlag::Power.resolve(Some(3.0)).unwrap(),
        (3.0, PenaltyMetric::Euclidean)
    );
    assert_eq!(
        PenaltyFlag::Lp.resolve(Some(3.0)).unwrap(),
        (3.0, PenaltyMetric::SeparableLp)
    );
    assert!(PenaltyFlag::Exact.resolve(Some(2.0)).is_err());
    assert!(PenaltyFlag::Lp.resolve(Some(1.0)).is_err());
    assert!("bogus".parse::<PenaltyFlag>().is_err());
}

#[test]
fn solve_probes_missing_lower_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("no_m.prob");
    fs::write(
        &path,
        "variables = 1\nobjective = x1^2\nconstraint.expr = x1 - 1\nconstraint.set = orthant-\nstart = [0]\n",
    )
    .unwrap();
    let summary = run_solve(&solve_args(path, 0.1)).unwrap();
    assert_eq!(summary.exit, EXIT_OK);
    assert!(
        summary.report.contains("m_estimate: unsound-estimate"),
        "probed bound must be labeled:\n{}",
        summary.report
    );
}

#[test]
fn check_conic_mode_at_kkt_point() {
    let args = CheckArgs {
        problem: fixture("conic_kkt.prob"),
        point: vec![-1.0, -1.0],
        eps: 1e-9,
        rho: None,
        alpha: 2.0,
        mode: CheckMode::Conic,
    };
    let summary = run_check(&args).unwrap();
    assert_eq!(summary.exit, EXIT_OK);
    let stat = report_value(&summary.report, "eps_stat").unwrap();
    assert!(stat <= 1e-9);
    let lambda = report_value(&summary.report, "lambda[0]").unwrap();
    assert!((lambda - 0.5).abs() < 1e-9);
}

#[test]
fn check_kkt_mode_reports_benchmark_residual() {
    let args = CheckArgs {
        problem: fixture("bench_1d.prob"),
        point: vec![0.9950495],
        eps: 0.1,
        rho: None,
        alpha: 2.0,
        mode: CheckMode::Kkt,
    };
    let summary = run_check(&args).unwrap();
    assert_eq!(summary.exit, EXIT_OK);
    let feas = report_value(&summary.report, "feasibility").unwrap();
    assert!((feas - 0.0049505).abs() < 1e-6, "feasibility = {feas}");
}

#[test]
fn check_def41_fails_with_zero_rho_and_gradient() {
    // Feasible point, nonzero gradient, ρ = 0, ε = 0: certificate failure.
    let args = CheckArgs {
        problem: fixture("bench_1d.prob"),
        point: vec![1.0],
        eps: 0.0,
        rho: Some(0.0),
        alpha: 2.0,
        mode: CheckMode::Def41,
    };
    assert_eq!(cmd_check(&args), EXIT_CERT);
}

#[test]
fn rate_sweep_emits_csv_and_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("rate.csv");
    let summary = run_rate(&RateArgs {
        problem: fixture("bench_1d.prob"),
        eps_list: vec![0.1, 0.05, 0.025, 0.0125],
        alpha: 2.0,
        out: Some(out.clone()),
    })
    .unwrap();
    assert_eq!(summary.exit, EXIT_OK);
    let slope = summary.slope.unwrap();
    assert!(slope <= 2.2, "slope = {slope}");
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("eps,iters,rho\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn rate_single_eps_has_no_slope() {
    let summary = run_rate(&RateArgs {
        problem: fixture("bench_1d.prob"),
        eps_list: vec![0.1],
        alpha: 2.0,
        out: None,
    })
    .unwrap();
    assert_eq!(summary.exit, EXIT_OK);
    assert!(summary.slope.is_none());
}

#[test]
fn every_fixture_round_trips_through_render() {
    use penopt_cli::problem_file::ProblemFile;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(53);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut count = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("prob") {
            continue;
        }
        let text = fs::read_to_string(&path).unwrap();
        let p1 = ProblemFile::parse(&text).unwrap();
        let p2 = ProblemFile::parse(&p1.render())
            .unwrap_or_else(|e| panic!("{}: reparse failed: {e}", path.display()));
        let m1 = p1.to_problem().unwrap();
        let m2 = p2.to_problem().unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..m1.dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            assert_eq!(
                m1.objective.value_scalar(&x).unwrap(),
                m2.objective.value_scalar(&x).unwrap(),
                "{}: objective mismatch",
                path.display()
            );
            assert_eq!(
                m1.constraint_value(&x).unwrap(),
                m2.constraint_value(&x).unwrap(),
                "{}: constraint mismatch",
                path.display()
            );
        }
        count += 1;
    }
    assert!(count >= 11, "expected the full fixture suite, saw {count}");
}

#[test]
fn rate_rejects_infeasible_start_files() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("infeasible.prob");
    fs::write(
        &path,
        "variables = 1\nobjective = x1\nconstraint.expr = 1 - x1\nconstraint.set = orthant-\nstart = [0]\nM = 0\n",
    )
    .unwrap();
    let code = cmd_rate(&RateArgs {
        problem: path,
        eps_list: vec![0.1, 0.05],
        alpha: 2.0,
        out: None,
    });
    assert_eq!(code, EXIT_USAGE);
}

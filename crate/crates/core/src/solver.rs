//! The subderivative descent method on the merged penalized function.
//!
//! Each iteration minimizes the subderivative `d f_{α,ρ}(x_k)(·)` over the
//! closed unit ball (direction search), terminates once that minimum is
//! ≥ −ε, and otherwise takes an Armijo-backtracked step
//!
//! ```text
//! f(x_k + α_k w_k) − f(x_k) < (α_k / 2) · d f(x_k)(w_k)
//! ```
//!
//! with the largest step in `{1, μ, μ², …}`. Started from a feasible point
//! with the penalty parameter chosen as `ρ ≥ ρ₀ + (φ(x₀) + M)/εᵅ`, every
//! iterate stays in the sublevel set `{x : f_{α,ρ}(x) ≤ φ(x₀)}` and the
//! terminal point is an ε-approximate stationary point of the constrained
//! problem.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{ConeTerm, ModelError, PenaltyFn, PenaltyMetric, PenaltyTerm, Problem};
use crate::stationarity::{check_approx_stationary, Certificate};
use crate::vecmath as vm;

/// Tolerance of the inner direction subproblems.
const INNER_TOL: f64 = 1e-10;
/// Iteration budget of the inner direction subproblems.
const INNER_MAX: usize = 10_000;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("penalty selection needs a feasible start x₀")]
    MissingFeasiblePoint,
    #[error("penalty selection needs the lower-bound datum M")]
    MissingLowerBound,
    #[error("backtracking exhausted after {backtracks} reductions at iteration {iteration}")]
    BacktrackExhausted { iteration: usize, backtracks: usize },
    #[error("inner direction subproblem did not reach tolerance {tol:.1e} (gap {gap:.3e})")]
    InnerSolveFailure { gap: f64, tol: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("trace output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Target stationarity tolerance ε.
    pub eps: f64,
    /// Penalty power α ≥ 1.
    pub alpha: f64,
    /// Penalty parameter; selected by the ρ rule when absent.
    pub rho: Option<f64>,
    /// Backtracking reduction multiple μ ∈ (0, 1).
    pub mu: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    /// Distance family of the penalty term.
    pub penalty_metric: PenaltyMetric,
    /// CSV trace sink, written as the run progresses.
    pub trace: Option<PathBuf>,
}

impl SolverConfig {
    pub fn new(eps: f64) -> Self {
        SolverConfig {
            eps,
            alpha: 2.0,
            rho: None,
            mu: 0.5,
            max_iters: 100_000,
            max_backtracks: 60,
            penalty_metric: PenaltyMetric::Euclidean,
            trace: None,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        // ε = 0 asks for exact stationarity; reachable only at points where
        // the direction value is exactly nonnegative, but legal.
        if !(self.eps >= 0.0) {
            return Err(SolverError::InvalidConfig("ε must be nonnegative".into()));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(SolverError::InvalidConfig("μ must lie in (0, 1)".into()));
        }
        if !(self.alpha >= 1.0) {
            return Err(SolverError::InvalidConfig("α must be ≥ 1".into()));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidConfig("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone)]
pub struct IterateRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub f_val: f64,
    pub dist_val: f64,
    /// Minimum of the subderivative over the unit ball at `x`.
    pub dir_value: f64,
    pub step: f64,
    pub backtracks: usize,
}

#[derive(Debug)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub certificate: Certificate,
    pub trace: Vec<IterateRecord>,
    /// False when the run stopped on the iteration budget instead of the
    /// ε-stationarity test; the certificate is then best-effort.
    pub converged: bool,
    pub rho: f64,
    pub iterations: usize,
}

/// The penalty-parameter rule: `ρ = ρ₀ + (φ(x₀) + M)/εᵅ`, clamped below
/// by a positive floor.
pub fn select_rho(problem: &Problem, eps: f64) -> Result<f64, SolverError> {
    if !(eps > 0.0) {
        return Err(SolverError::InvalidConfig(
            "automatic ρ selection needs ε > 0".into(),
        ));
    }
    let x0 = problem.x0.as_ref().ok_or(SolverError::MissingFeasiblePoint)?;
    let m = problem.lower_bound.ok_or(SolverError::MissingLowerBound)?;
    let phi0 = problem.objective.value_scalar(x0)?;
    let rho = problem.rho0 + (phi0 + m) * (1.0 / eps).powf(problem.alpha);
    Ok(rho.max(1e-6))
}

/// Probes a lower-bound datum when none is supplied: a short descent run
/// on `f_{α,ρ₀}` from `x₀`, taking the negative part of the best value
/// seen. The estimate is not sound — callers must label it as such.
pub fn estimate_lower_bound(problem: &Problem, alpha: f64) -> Result<f64, SolverError> {
    let x0 = problem
        .x0
        .as_ref()
        .ok_or(SolverError::MissingFeasiblePoint)?
        .clone();
    let pf = problem.penalty_fn(alpha, problem.rho0);
    let mut x = x0;
    let mut best = pf.value(&x)?;
    let cfg = SolverConfig::new(1e-3);
    for _ in 0..200 {
        let (w, d_val) = direction_search(&pf, &x)?;
        if d_val >= -1e-3 {
            break;
        }
        match armijo_step(&pf, &x, &w, d_val, &cfg) {
            Ok((_, xn, _)) => {
                x = xn;
                best = best.min(pf.value(&x)?);
            }
            Err(_) => break,
        }
    }
    Ok((-best).max(0.0))
}

/// Minimizes `d f_{α,ρ}(x)(·)` over the closed unit ball; returns the
/// minimizer and the attained value.
///
/// Min-of-linear forms have the closed form `−max_j ‖g_j‖`; max-of-smooth
/// objectives reduce to a minimum-norm point of the candidate hull; the
/// feasible exact-penalty case runs an inner loop on the ball with a dual
/// certificate whenever the subproblem is convex.
pub fn direction_search(pf: &PenaltyFn, x: &[f64]) -> Result<(Vec<f64>, f64), SolverError> {
    let form = pf.directional_form(x)?;
    let phi_c = form.phi_candidates;

    match form.penalty {
        PenaltyTerm::Zero | PenaltyTerm::MinOfLinear(_) => {
            let pen_c: Vec<Vec<f64>> = match form.penalty {
                PenaltyTerm::MinOfLinear(c) => c,
                _ => vec![vec![0.0; pf.dim()]],
            };
            if !form.phi_is_max {
                // min over both candidate lists: flatten the cartesian sums.
                let mut best_norm = -1.0;
                let mut best: Vec<f64> = Vec::new();
                for pg in &phi_c {
                    for cg in &pen_c {
                        let g = vm::add(pg, cg);
                        let n = vm::norm(&g);
                        if n > best_norm {
                            best_norm = n;
                            best = g;
                        }
                    }
                }
                if best_norm <= 0.0 {
                    return Ok((vec![0.0; pf.dim()], 0.0));
                }
                Ok((vm::scale(&best, -1.0 / best_norm), -best_norm))
            } else {
                // max_i⟨a_i, w⟩ + min_j⟨b_j, w⟩: for each j a minimum-norm
                // point over the hull of {a_i + b_j}. The returned value is
                // the exact evaluation at the found direction, so the line
                // search sees a slope the form actually attains.
                let exact = |w: &[f64]| {
                    phi_eval(&phi_c, true, w)
                        + pen_c
                            .iter()
                            .map(|b| vm::dot(b, w))
                            .fold(f64::INFINITY, f64::min)
                };
                let mut best_val = 0.0;
                let mut best_w = vec![0.0; pf.dim()];
                for bg in &pen_c {
                    let shifted: Vec<Vec<f64>> =
                        phi_c.iter().map(|ag| vm::add(ag, bg)).collect();
                    let v = min_norm_in_hull(&shifted)?;
                    let norm = vm::norm(&v);
                    if norm <= INNER_TOL {
                        continue;
                    }
                    let w = vm::scale(&v, -1.0 / norm);
                    let val = exact(&w);
                    if val < best_val {
                        best_val = val;
                        best_w = w;
                    }
                }
                Ok((best_w, best_val))
            }
        }
        PenaltyTerm::Cone(cone) => direction_with_cone(pf, &phi_c, form.phi_is_max, &cone),
        PenaltyTerm::General => {
            let dim = pf.dim();
            let raw = |w: &[f64]| pf.subderivative_value(x, w);
            let eval = |w: &[f64]| raw(w).map_err(SolverError::from);
            let subgrad = |w: &[f64]| numeric_subgradient(&raw, w, dim);
            let starts = default_starts(&phi_c, dim);
            subgradient_minimize_on_ball(dim, &eval, &subgrad, starts)
        }
    }
}

/// Direction search when the form carries a tangent-cone distance term.
fn direction_with_cone(
    pf: &PenaltyFn,
    phi_c: &[Vec<f64>],
    phi_is_max: bool,
    cone: &ConeTerm,
) -> Result<(Vec<f64>, f64), SolverError> {
    let dim = pf.dim();
    let exact_eval = |w: &[f64]| -> Result<f64, ModelError> {
        let phi = phi_eval(phi_c, phi_is_max, w);
        Ok(phi + cone.evaluate(w)?)
    };

    if cone.convex {
        if phi_is_max {
            // Fully convex: joint dual over simplex × (ρ-ball ∩ polar cone).
            let (w, _) = dual_min_norm(phi_c, true, cone, dim)?;
            let val = exact_eval(&w)?;
            return Ok((w, val.min(0.0)));
        }
        // min-of-smooth φ decomposes exactly: one convex subproblem per
        // active candidate.
        let mut best: Option<(Vec<f64>, f64)> = None;
        for g in phi_c {
            let (w, _) = dual_min_norm(std::slice::from_ref(g), false, cone, dim)?;
            let val = exact_eval(&w)?;
            if best.as_ref().is_none_or(|(_, bv)| val < *bv) {
                best = Some((w, val));
            }
        }
        let (w, val) = best.expect("objective has at least one active gradient");
        return Ok((w, val.min(0.0)));
    }

    // Nonconvex cone (finite/union/sphere blocks): projected subgradient
    // with multiple starts, tracking the best exactly evaluated iterate.
    let subgrad = |w: &[f64]| -> Result<Vec<f64>, ModelError> {
        let gphi = phi_pick(phi_c, phi_is_max, w);
        let gcone = cone.subgradient(w)?;
        Ok(vm::add(&gphi, &gcone))
    };
    let eval = |w: &[f64]| exact_eval(w).map_err(SolverError::from);
    let sg = |w: &[f64]| subgrad(w).map_err(SolverError::from);
    let starts = default_starts(phi_c, dim);
    subgradient_minimize_on_ball(dim, &eval, &sg, starts)
}

fn phi_eval(phi_c: &[Vec<f64>], is_max: bool, w: &[f64]) -> f64 {
    let vals = phi_c.iter().map(|g| vm::dot(g, w));
    if is_max {
        vals.fold(f64::NEG_INFINITY, f64::max)
    } else {
        vals.fold(f64::INFINITY, f64::min)
    }
}

/// An active-candidate gradient of the φ part at `w`.
fn phi_pick(phi_c: &[Vec<f64>], is_max: bool, w: &[f64]) -> Vec<f64> {
    let mut best = &phi_c[0];
    let mut best_val = vm::dot(best, w);
    for g in &phi_c[1..] {
        let v = vm::dot(g, w);
        if (is_max && v > best_val) || (!is_max && v < best_val) {
            best = g;
            best_val = v;
        }
    }
    best.clone()
}

fn default_starts(phi_c: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut starts: Vec<Vec<f64>> = phi_c
        .iter()
        .filter(|g| vm::norm(g) > 0.0)
        .map(|g| vm::scale(g, -1.0 / vm::norm(g)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::oracle::seed_from_env());
    for _ in 0..8 {
        starts.push(crate::sets::gauss_unit(&mut rng, dim));
    }
    starts
}

/// Minimum-norm point of the convex hull of `candidates` by projected
/// gradient over the simplex; the Frank-Wolfe gap certifies optimality.
fn min_norm_in_hull(candidates: &[Vec<f64>]) -> Result<Vec<f64>, SolverError> {
    let k = candidates.len();
    if k == 1 {
        return Ok(candidates[0].clone());
    }
    let mut lambda = vec![1.0 / k as f64; k];
    let lipschitz = 2.0 * candidates.iter().map(|c| vm::dot(c, c)).sum::<f64>();
    let step = 1.0 / lipschitz.max(1e-12);
    let mut v = combine(candidates, &lambda);
    for _ in 0..INNER_MAX {
        let vv = vm::dot(&v, &v);
        let min_edge = candidates
            .iter()
            .map(|c| vm::dot(c, &v))
            .fold(f64::INFINITY, f64::min);
        if vv - min_edge <= INNER_TOL * vv.max(1.0) {
            return Ok(v);
        }
        let grad: Vec<f64> = candidates.iter().map(|c| 2.0 * vm::dot(c, &v)).collect();
        let moved: Vec<f64> = lambda.iter().zip(&grad).map(|(l, g)| l - step * g).collect();
        lambda = project_simplex(&moved);
        v = combine(candidates, &lambda);
    }
    let vv = vm::dot(&v, &v);
    let min_edge = candidates
        .iter()
        .map(|c| vm::dot(c, &v))
        .fold(f64::INFINITY, f64::min);
    let gap = vv - min_edge;
    if gap <= 1e-6 * vv.max(1.0) {
        // Loose but usable optimum; the caller re-evaluates exactly.
        return Ok(v);
    }
    Err(SolverError::InnerSolveFailure { gap, tol: INNER_TOL })
}

fn combine(candidates: &[Vec<f64>], lambda: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; candidates[0].len()];
    for (c, &l) in candidates.iter().zip(lambda) {
        for (vi, ci) in v.iter_mut().zip(c) {
            *vi += l * ci;
        }
    }
    v
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite simplex coordinates"));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if s - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Convex dual of the cone-form direction subproblem.
///
/// With `ψ(w) = φ-part(w) + ρ·dist(Jw; T)` and `T` a convex product cone,
/// `min_{‖w‖≤1} ψ = −min ‖Cᵀλ + Jᵀu‖` over `λ` in the simplex and `u` in
/// the ρ-ball intersected with the polar cone `T°`. Projected gradient on
/// `(λ, u)` with exact projections (Moreau for the polar, radial clip for
/// the ball); the primal value at `w = −v/‖v‖` certifies the gap.
fn dual_min_norm(
    phi_c: &[Vec<f64>],
    use_simplex: bool,
    cone: &ConeTerm,
    dim: usize,
) -> Result<(Vec<f64>, f64), SolverError> {
    let k = phi_c.len();
    let m_total: usize = cone.blocks.iter().map(|b| b.set.dim()).sum();
    let mut lambda = vec![1.0 / k as f64; k];
    let mut u = vec![0.0; m_total];

    let jac_rows: Vec<Vec<f64>> = cone
        .blocks
        .iter()
        .flat_map(|b| b.jacobian.clone().expect("convex cone term has Jacobians"))
        .collect();

    let v_of = |lambda: &[f64], u: &[f64]| -> Vec<f64> {
        let mut v = combine(phi_c, lambda);
        for (row, &ui) in jac_rows.iter().zip(u) {
            for (vj, rj) in v.iter_mut().zip(row) {
                *vj += ui * rj;
            }
        }
        v
    };
    let project_u = |u: &[f64]| -> Result<Vec<f64>, SolverError> {
        // Per-block polar projection u − Π_T(u), then a radial clip.
        let mut out = Vec::with_capacity(m_total);
        let mut off = 0;
        for b in &cone.blocks {
            let d = b.set.dim();
            let block = &u[off..off + d];
            let tangent = b.set.tangent_project(&b.base, block).map_err(ModelError::from)?;
            out.extend(vm::sub(block, &tangent));
            off += d;
        }
        Ok(vm::clip_to_ball(&out, cone.rho))
    };

    let l_phi = 2.0 * phi_c.iter().map(|c| vm::dot(c, c)).sum::<f64>();
    let l_jac = 2.0 * jac_rows.iter().map(|r| vm::dot(r, r)).sum::<f64>();
    let step = 1.0 / (l_phi + l_jac).max(1e-12);

    let primal = |w: &[f64]| -> Result<f64, SolverError> {
        Ok(phi_eval(phi_c, use_simplex, w) + cone.evaluate(w).map_err(SolverError::from)?)
    };

    let mut best_gap = f64::INFINITY;
    for it in 0..INNER_MAX {
        let v = v_of(&lambda, &u);
        if it % 32 == 0 || it + 1 == INNER_MAX {
            let nv = vm::norm(&v);
            let w = if nv <= INNER_TOL {
                vec![0.0; dim]
            } else {
                vm::scale(&v, -1.0 / nv)
            };
            let p = primal(&w)?;
            let gap = p + nv;
            best_gap = best_gap.min(gap.abs());
            if gap.abs() <= INNER_TOL.max(1e-12 * nv.max(1.0)) || nv <= INNER_TOL {
                return Ok((w, p));
            }
        }
        // Gradient of ‖v(λ, u)‖².
        if use_simplex && k > 1 {
            let grad_l: Vec<f64> = phi_c.iter().map(|c| 2.0 * vm::dot(c, &v)).collect();
            let moved: Vec<f64> = lambda.iter().zip(&grad_l).map(|(l, g)| l - step * g).collect();
            lambda = project_simplex(&moved);
        }
        let mut grad_u = vec![0.0; m_total];
        for (gi, row) in grad_u.iter_mut().zip(&jac_rows) {
            *gi = 2.0 * vm::dot(row, &v);
        }
        let moved: Vec<f64> = u.iter().zip(&grad_u).map(|(ui, g)| ui - step * g).collect();
        u = project_u(&moved)?;
    }
    // The loop converges linearly on these small problems; reaching the
    // budget with a large residual gap means the subproblem data is bad.
    let v = v_of(&lambda, &u);
    let nv = vm::norm(&v);
    let w = if nv <= INNER_TOL {
        vec![0.0; dim]
    } else {
        vm::scale(&v, -1.0 / nv)
    };
    let p = primal(&w)?;
    let gap = (p + nv).abs();
    if gap <= 1e-6 * nv.max(1.0) {
        return Ok((w, p));
    }
    Err(SolverError::InnerSolveFailure { gap, tol: INNER_TOL })
}

/// Projected subgradient over the unit ball with several starts; keeps the
/// best exactly evaluated iterate. Used for the nonconvex inner cases
/// where no certificate exists.
fn subgradient_minimize_on_ball(
    dim: usize,
    eval: &dyn Fn(&[f64]) -> Result<f64, SolverError>,
    subgrad: &dyn Fn(&[f64]) -> Result<Vec<f64>, SolverError>,
    starts: Vec<Vec<f64>>,
) -> Result<(Vec<f64>, f64), SolverError> {
    let mut best_w = vec![0.0; dim];
    let mut best_val = 0.0; // ψ(0) = 0 is always available
    let budget = (INNER_MAX / starts.len().max(1)).max(64);
    for start in starts {
        let mut w = vm::clip_to_ball(&start, 1.0);
        for t in 0..budget {
            let val = eval(&w)?;
            if val < best_val {
                best_val = val;
                best_w = w.clone();
            }
            let g = subgrad(&w)?;
            let gn = vm::norm(&g);
            if gn <= 1e-14 {
                break;
            }
            let eta = 0.5 / ((t + 1) as f64).sqrt();
            w = vm::clip_to_ball(&vm::axpy(&w, -eta / gn, &g), 1.0);
        }
    }
    Ok((best_w, best_val))
}

/// Forward-difference subgradient estimate for the evaluable fallback.
fn numeric_subgradient(
    eval: &dyn Fn(&[f64]) -> Result<f64, ModelError>,
    w: &[f64],
    dim: usize,
) -> Result<Vec<f64>, SolverError> {
    let h = 1e-7 * vm::norm(w).max(1.0);
    let f0 = eval(w)?;
    let mut g = vec![0.0; dim];
    for j in 0..dim {
        let mut wp = w.to_vec();
        wp[j] += h;
        g[j] = (eval(&wp)? - f0) / h;
    }
    Ok(g)
}

/// Armijo backtracking from unit step: the largest `α ∈ {1, μ, μ², …}`
/// with `f(x + α w) − f(x) < (α/2)·d_val`. Requires `d_val < 0`; the
/// caller terminates instead when the direction value is nonnegative.
pub fn armijo_step(
    pf: &PenaltyFn,
    x: &[f64],
    w: &[f64],
    d_val: f64,
    cfg: &SolverConfig,
) -> Result<(f64, Vec<f64>, usize), SolverError> {
    assert!(d_val < 0.0, "armijo_step needs a descent direction");
    let f0 = pf.value(x)?;
    let mut step = 1.0;
    let mut backtracks = 0usize;
    loop {
        let x_next = vm::axpy(x, step, w);
        let f_next = pf.value(&x_next)?;
        if f_next - f0 < 0.5 * step * d_val {
            return Ok((step, x_next, backtracks));
        }
        if backtracks >= cfg.max_backtracks {
            return Err(SolverError::BacktrackExhausted {
                iteration: 0,
                backtracks,
            });
        }
        backtracks += 1;
        step *= cfg.mu;
    }
}

/// Runs the subderivative method from the problem's feasible start.
pub fn solve(problem: &Problem, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    cfg.validate()?;
    let rho = match cfg.rho {
        Some(r) => {
            if !(r > 0.0) {
                return Err(SolverError::InvalidConfig("ρ must be positive".into()));
            }
            r
        }
        None => select_rho(problem, cfg.eps)?,
    };
    let x0 = problem
        .x0
        .as_ref()
        .ok_or(SolverError::MissingFeasiblePoint)?
        .clone();
    let pf = match cfg.penalty_metric {
        PenaltyMetric::Euclidean => problem.penalty_fn(cfg.alpha, rho),
        PenaltyMetric::SeparableLp => problem.penalty_fn_lp(cfg.alpha, rho)?,
    };

    let mut sink = match &cfg.trace {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            writeln!(w, "{}", TRACE_HEADER)?;
            Some(w)
        }
        None => None,
    };

    let mut x = x0;
    let mut trace: Vec<IterateRecord> = Vec::new();
    let mut converged = false;

    for k in 0..cfg.max_iters {
        let (w, d_val) = direction_search(&pf, &x)?;
        let f_val = pf.value(&x)?;
        let dist_val = pf.dist(&x)?;

        if d_val >= -cfg.eps {
            let record = IterateRecord {
                k,
                x: x.clone(),
                f_val,
                dist_val,
                dir_value: d_val,
                step: 0.0,
                backtracks: 0,
            };
            if let Some(sink) = sink.as_mut() {
                write_trace_row(sink, &record)?;
            }
            trace.push(record);
            converged = true;
            break;
        }

        let (step, x_next, backtracks) =
            armijo_step(&pf, &x, &w, d_val, cfg).map_err(|e| match e {
                SolverError::BacktrackExhausted { backtracks, .. } => {
                    SolverError::BacktrackExhausted {
                        iteration: k,
                        backtracks,
                    }
                }
                other => other,
            })?;
        let record = IterateRecord {
            k,
            x: x.clone(),
            f_val,
            dist_val,
            dir_value: d_val,
            step,
            backtracks,
        };
        if let Some(sink) = sink.as_mut() {
            write_trace_row(sink, &record)?;
        }
        trace.push(record);
        x = x_next;
    }

    if let Some(sink) = sink.as_mut() {
        sink.flush()?;
    }

    let certificate = check_approx_stationary(problem, &x, cfg.eps, rho, cfg.alpha)?;
    let iterations = trace.len().saturating_sub(usize::from(converged));
    Ok(SolveResult {
        x,
        certificate,
        trace,
        converged,
        rho,
        iterations,
    })
}

pub const TRACE_HEADER: &str = "k,f_val,dist_val,dir_value,step,backtracks";

/// Floats in CSV output carry 17 significant digits so the values
/// round-trip bit-exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace_row(out: &mut dyn Write, r: &IterateRecord) -> std::io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{}",
        r.k,
        format_float(r.f_val),
        format_float(r.dist_val),
        format_float(r.dir_value),
        format_float(r.step),
        r.backtracks
    )
}

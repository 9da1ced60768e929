//! ε-approximate stationarity certificates and KKT-style residuals.
//!
//! A point `x̄` is an ε-approximate stationary point of
//! `min φ(x) s.t. F(x) ∈ X` when
//!
//! 1. `dist(F(x̄); X) ≤ ε`, and
//! 2. `inf_{‖w‖≤1} d f_{α,ρ}(x̄)(w) ≥ −ε` for the merged penalized
//!    function at the certificate's penalty parameter.
//!
//! Feasibility is *not* required, which is what makes the notion reachable
//! by a descent method. For smooth data and convex targets the condition
//! specializes to approximate Lagrange multipliers
//! `‖∇φ(x̄) + ∇F(x̄)ᵀλ‖ ≤ ε` with `λ ∈ N_X(proj_X(F(x̄)))`, and for
//! orthant×zeros targets to the familiar approximate KKT system.

use thiserror::Error;

use crate::model::{ModelError, Problem};
use crate::sets::{ClosedSet, SetError, TOL_FEAS};
use crate::solver::{direction_search, format_float, SolverError};
use crate::vecmath as vm;

/// Largest multiplier dimension for the active-set extraction.
const MAX_MULTIPLIERS: usize = 32;

#[derive(Debug, Error)]
pub enum StationarityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error("multiplier extraction supports at most {limit} constraint components, got {got}")]
    TooManyMultipliers { got: usize, limit: usize },
    #[error("{op} needs smooth objective and constraints")]
    NeedsSmoothData { op: &'static str },
    #[error("target set is not an orthant×zeros product: {0}")]
    WrongSetShape(String),
    #[error("no multiplier parametrization for `{kind}` at this point")]
    UnsupportedKind { kind: &'static str },
    #[error("problem has no constraints")]
    Unconstrained,
}

/// The outcome of a stationarity check.
#[derive(Debug, Clone)]
pub struct Certificate {
    /// `dist(F(x); X)`.
    pub eps_feas: f64,
    /// `−min_{‖w‖≤1} d f_{α,ρ}(x)(w)`; negative values mean strictly
    /// stationary.
    pub eps_stat: f64,
    /// Penalty parameter of the merged function the check ran on.
    pub rho_used: f64,
    /// Approximate Lagrange multipliers, when extractable.
    pub multipliers: Option<Vec<f64>>,
    /// `‖∇φ + ∇Fᵀλ‖` for the extracted multipliers, when available.
    pub kkt_residual: Option<f64>,
    /// The checked ε when both conditions hold; `None` otherwise.
    pub passed_at: Option<f64>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.passed_at.is_some()
    }

    /// Flat `key: value` report; keys are stable: `eps_feas`, `eps_stat`,
    /// `rho_used`, `passed_at`, `kkt_residual`, `lambda[i]`.
    pub fn report(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("eps_feas: {}\n", format_float(self.eps_feas)));
        out.push_str(&format!("eps_stat: {}\n", format_float(self.eps_stat)));
        out.push_str(&format!("rho_used: {}\n", format_float(self.rho_used)));
        match self.passed_at {
            Some(e) => out.push_str(&format!("passed_at: {}\n", format_float(e))),
            None => out.push_str("passed_at: none\n"),
        }
        if let Some(r) = self.kkt_residual {
            out.push_str(&format!("kkt_residual: {}\n", format_float(r)));
        }
        if let Some(lambda) = &self.multipliers {
            for (i, l) in lambda.iter().enumerate() {
                out.push_str(&format!("lambda[{i}]: {}\n", format_float(*l)));
            }
        }
        out
    }
}

/// Checks both conditions of ε-approximate stationarity at `x` for the
/// merged function `f_{α,ρ}`; `passed_at = eps` exactly when both hold.
pub fn check_approx_stationary(
    problem: &Problem,
    x: &[f64],
    eps: f64,
    rho: f64,
    alpha: f64,
) -> Result<Certificate, SolverError> {
    let eps_feas = problem.feasibility(x)?;
    let pf = problem.penalty_fn(alpha, rho);
    let (_, dir_value) = direction_search(&pf, x)?;
    let eps_stat = -dir_value;
    let passed = eps_feas <= eps && eps_stat <= eps;

    // Multipliers are a best-effort enrichment: smooth data and convex
    // targets only.
    let (multipliers, kkt_residual) = match conic_residuals(problem, x) {
        Ok(r) => (Some(r.lambda), Some(r.stat)),
        Err(_) => (None, None),
    };

    Ok(Certificate {
        eps_feas,
        eps_stat,
        rho_used: rho,
        multipliers,
        kkt_residual,
        passed_at: passed.then_some(eps),
    })
}

/// Residuals of the conic specialization.
#[derive(Debug, Clone)]
pub struct ConicResiduals {
    /// `dist(F(x); X)`.
    pub feas: f64,
    /// `‖∇φ(x) + ∇F(x)ᵀλ‖` at the best multiplier.
    pub stat: f64,
    /// The multiplier, an element of `N_X(proj_X(F(x)))`.
    pub lambda: Vec<f64>,
}

/// Computes approximate-multiplier residuals for smooth data and convex
/// targets: `λ = argmin ‖∇φ + ∇Fᵀλ‖` over the normal-cone
/// parametrization at `proj_X(F(x))`.
///
/// At an infeasible point the normal cone at the projection contains the
/// ray spanned by `F(x) − proj_X(F(x))`; the extraction scales that ray.
/// At a feasible point the cone is parametrized componentwise (orthant,
/// box, zeros) or by the boundary ray (ball, ice-cream cone) and the
/// sign-constrained least-squares problem is solved by an active-set
/// sweep.
pub fn conic_residuals(problem: &Problem, x: &[f64]) -> Result<ConicResiduals, StationarityError> {
    if problem.constraints.is_empty() {
        return Err(StationarityError::Unconstrained);
    }
    let m = problem.constraint_dim();
    if m > MAX_MULTIPLIERS {
        return Err(StationarityError::TooManyMultipliers {
            got: m,
            limit: MAX_MULTIPLIERS,
        });
    }
    for (_, set) in &problem.constraints {
        if !set.is_convex() {
            return Err(StationarityError::UnsupportedKind {
                kind: set.kind_name(),
            });
        }
    }
    let grad_phi = smooth_gradient(problem, x, "conic_residuals")?;
    let jac = smooth_jacobian(problem, x, "conic_residuals")?;
    let fx = problem.constraint_value(x)?;
    let set = problem.constraint_set().expect("nonempty constraints");
    let feas = set.distance(&fx)?;

    if feas > TOL_FEAS {
        // One-dimensional cone case: λ on the ray (F(x) − proj)/dist.
        let proj = set.project(&fx)?;
        let y = proj.unique().expect("convex projections are singletons");
        let dir = vm::scale(&vm::sub(&fx, y), 1.0 / feas);
        let column = jac_transpose_apply(&jac, &dir);
        let cc = vm::dot(&column, &column);
        let t = if cc <= 1e-30 {
            0.0
        } else {
            (-vm::dot(&column, &grad_phi) / cc).max(0.0)
        };
        let stat = vm::norm(&vm::axpy(&grad_phi, t, &column));
        return Ok(ConicResiduals {
            feas,
            stat,
            lambda: vm::scale(&dir, t),
        });
    }

    // Feasible: parametrize N_X at the projection of F(x).
    let proj = set.project(&fx)?;
    let y = proj.unique().expect("convex projections are singletons").to_vec();
    let vars = normal_cone_variables(&set, &y)?;
    let columns: Vec<Vec<f64>> = vars
        .iter()
        .map(|v| jac_transpose_apply(&jac, &v.direction))
        .collect();
    let signs: Vec<bool> = vars.iter().map(|v| v.nonneg).collect();
    let t = nnls_with_free(&columns, &signs, &grad_phi);
    let mut residual = grad_phi.clone();
    for (col, &ti) in columns.iter().zip(&t) {
        residual = vm::axpy(&residual, ti, col);
    }
    let mut lambda = vec![0.0; m];
    for (v, &ti) in vars.iter().zip(&t) {
        for (j, &dj) in v.direction.iter().enumerate() {
            lambda[j] += ti * dj;
        }
    }
    Ok(ConicResiduals {
        feas,
        stat: vm::norm(&residual),
        lambda,
    })
}

/// Variant of [`conic_residuals`] that relaxes dual feasibility to
/// `λ_i ≥ −eps` on orthant components (the ε-enlarged normal cone); the
/// sign-constrained variables are shifted by `eps` before the sweep.
pub fn conic_residuals_relaxed(
    problem: &Problem,
    x: &[f64],
    eps: f64,
) -> Result<ConicResiduals, StationarityError> {
    let base = conic_residuals(problem, x)?;
    if eps == 0.0 {
        return Ok(base);
    }
    let grad_phi = smooth_gradient(problem, x, "conic_residuals")?;
    let jac = smooth_jacobian(problem, x, "conic_residuals")?;
    let fx = problem.constraint_value(x)?;
    let set = problem.constraint_set().expect("nonempty constraints");
    if set.distance(&fx)? > TOL_FEAS {
        return Ok(base);
    }
    let proj = set.project(&fx)?;
    let y = proj.unique().expect("convex projections are singletons").to_vec();
    let vars = normal_cone_variables(&set, &y)?;
    // Substitute t = t′ − ε on the sign-constrained variables.
    let columns: Vec<Vec<f64>> = vars
        .iter()
        .map(|v| jac_transpose_apply(&jac, &v.direction))
        .collect();
    let signs: Vec<bool> = vars.iter().map(|v| v.nonneg).collect();
    let mut shifted_b = grad_phi.clone();
    for (col, v) in columns.iter().zip(&vars) {
        if v.nonneg {
            shifted_b = vm::axpy(&shifted_b, -eps, col);
        }
    }
    let t_shift = nnls_with_free(&columns, &signs, &shifted_b);
    let t: Vec<f64> = t_shift
        .iter()
        .zip(&vars)
        .map(|(&ti, v)| if v.nonneg { ti - eps } else { ti })
        .collect();
    let mut residual = grad_phi.clone();
    for (col, &ti) in columns.iter().zip(&t) {
        residual = vm::axpy(&residual, ti, col);
    }
    let m = problem.constraint_dim();
    let mut lambda = vec![0.0; m];
    for (v, &ti) in vars.iter().zip(&t) {
        for (j, &dj) in v.direction.iter().enumerate() {
            lambda[j] += ti * dj;
        }
    }
    let stat = vm::norm(&residual);
    if stat <= base.stat {
        Ok(ConicResiduals {
            feas: base.feas,
            stat,
            lambda,
        })
    } else {
        Ok(base)
    }
}

/// The four residual groups of the approximate KKT system for
/// `min φ s.t. g_i ≤ 0, h_j = 0`.
#[derive(Debug, Clone)]
pub struct NlpKktResiduals {
    /// `‖∇φ + Σ λ_i ∇g_i + Σ μ_j ∇h_j‖`.
    pub stationarity: f64,
    /// `max(max_i g_i(x)₊, max_j |h_j(x)|)`.
    pub feasibility: f64,
    /// `max_i max(−λ_i, 0)`.
    pub sign_violation: f64,
    /// `max{|λ_i·g_i(x)| : g_i(x) ≤ 0}`.
    pub complementarity: f64,
    /// Inequality multipliers, in constraint-component order.
    pub lambda: Vec<f64>,
    /// Equality multipliers.
    pub mu: Vec<f64>,
    /// Signed minimum over the inequality multipliers, for callers that
    /// apply the relaxed `λ ≥ −ε` dual-feasibility test.
    pub min_multiplier: f64,
}

/// Evaluates the approximate KKT residuals at `x`. Multipliers are
/// extracted by the conic machinery when not supplied; a supplied vector
/// is the stacked `(λ, μ)` in constraint-component order.
pub fn nlp_kkt_residuals(
    problem: &Problem,
    x: &[f64],
    multipliers: Option<&[f64]>,
) -> Result<NlpKktResiduals, StationarityError> {
    let classes = nlp_component_classes(problem)?;
    let m = classes.len();
    let stacked: Vec<f64> = match multipliers {
        Some(v) => {
            if v.len() != m {
                return Err(StationarityError::Model(ModelError::DimensionMismatch {
                    expected: m,
                    got: v.len(),
                }));
            }
            v.to_vec()
        }
        None => conic_residuals(problem, x)?.lambda,
    };

    let grad_phi = smooth_gradient(problem, x, "nlp_kkt_residuals")?;
    let jac = smooth_jacobian(problem, x, "nlp_kkt_residuals")?;
    let fx = problem.constraint_value(x)?;

    let mut residual = grad_phi;
    for (row, &li) in jac.iter().zip(&stacked) {
        residual = vm::axpy(&residual, li, row);
    }

    let mut feasibility = 0.0f64;
    let mut sign_violation = 0.0f64;
    let mut complementarity = 0.0f64;
    let mut lambda = Vec::new();
    let mut mu = Vec::new();
    let mut min_multiplier = f64::INFINITY;
    for ((&class_eq, &v), &li) in classes.iter().zip(&fx).zip(&stacked) {
        if class_eq {
            feasibility = feasibility.max(v.abs());
            mu.push(li);
        } else {
            feasibility = feasibility.max(v.max(0.0));
            sign_violation = sign_violation.max((-li).max(0.0));
            if v <= 0.0 {
                complementarity = complementarity.max((li * v).abs());
            }
            min_multiplier = min_multiplier.min(li);
            lambda.push(li);
        }
    }
    if lambda.is_empty() {
        min_multiplier = 0.0;
    }

    Ok(NlpKktResiduals {
        stationarity: vm::norm(&residual),
        feasibility,
        sign_violation,
        complementarity,
        lambda,
        mu,
        min_multiplier,
    })
}

/// Per-component classification of the target set: `true` for an equality
/// (zeros) component, `false` for an inequality (orthant) component.
fn nlp_component_classes(problem: &Problem) -> Result<Vec<bool>, StationarityError> {
    fn classify(set: &ClosedSet, out: &mut Vec<bool>) -> Result<(), StationarityError> {
        match set {
            ClosedSet::NonpositiveOrthant(d) => {
                out.extend(std::iter::repeat_n(false, *d));
                Ok(())
            }
            ClosedSet::Zeros(d) => {
                out.extend(std::iter::repeat_n(true, *d));
                Ok(())
            }
            ClosedSet::Product(members) => {
                members.iter().try_for_each(|m| classify(m, out))
            }
            other => Err(StationarityError::WrongSetShape(format!(
                "component of kind `{}`",
                other.kind_name()
            ))),
        }
    }
    if problem.constraints.is_empty() {
        return Err(StationarityError::Unconstrained);
    }
    let mut out = Vec::with_capacity(problem.constraint_dim());
    for (_, set) in &problem.constraints {
        classify(set, &mut out)?;
    }
    Ok(out)
}

/// Outcome of the infeasible-descent condition
/// `inf ⟨dF(x)(w), F(x) − y⟩ ≤ −dist(F(x); X)/κ′`.
#[derive(Debug, Clone, Copy)]
pub struct KappaPrime {
    pub satisfied: bool,
    /// The implied constant; `0` at feasible points (where every κ′ > 0
    /// works), `+∞` when the condition fails.
    pub kappa_prime: f64,
    pub feasible: bool,
}

/// Evaluates the condition at `x`: over the unit ball the infimum equals
/// `min_y −‖∇F(x)ᵀ(F(x) − y)‖` over projection candidates `y`, and a
/// strictly negative value yields `κ′ = dist/‖∇Fᵀ(F − y*)‖`.
pub fn kappa_prime_condition(
    problem: &Problem,
    x: &[f64],
) -> Result<KappaPrime, StationarityError> {
    if problem.constraints.is_empty() {
        return Err(StationarityError::Unconstrained);
    }
    let dist = problem.feasibility(x)?;
    if dist <= TOL_FEAS {
        return Ok(KappaPrime {
            satisfied: true,
            kappa_prime: 0.0,
            feasible: true,
        });
    }
    let jac = smooth_jacobian(problem, x, "kappa_prime_condition")?;
    let fx = problem.constraint_value(x)?;
    let set = problem.constraint_set().expect("nonempty constraints");
    let proj = set.project(&fx)?;
    let mut best = 0.0f64;
    for y in &proj.candidates {
        let r = vm::sub(&fx, y);
        best = best.max(vm::norm(&jac_transpose_apply(&jac, &r)));
    }
    if best <= 1e-14 {
        return Ok(KappaPrime {
            satisfied: false,
            kappa_prime: f64::INFINITY,
            feasible: false,
        });
    }
    Ok(KappaPrime {
        satisfied: true,
        kappa_prime: dist / best,
        feasible: false,
    })
}

fn smooth_gradient(
    problem: &Problem,
    x: &[f64],
    op: &'static str,
) -> Result<Vec<f64>, StationarityError> {
    match problem.objective.jacobian_at(x)? {
        Some(rows) => Ok(rows.into_iter().next().expect("scalar objective")),
        None => Err(StationarityError::NeedsSmoothData { op }),
    }
}

fn smooth_jacobian(
    problem: &Problem,
    x: &[f64],
    op: &'static str,
) -> Result<Vec<Vec<f64>>, StationarityError> {
    let mut rows = Vec::with_capacity(problem.constraint_dim());
    for (model, _) in &problem.constraints {
        match model.jacobian_at(x)? {
            Some(r) => rows.extend(r),
            None => return Err(StationarityError::NeedsSmoothData { op }),
        }
    }
    Ok(rows)
}

/// `Jᵀ v` for a Jacobian stored as rows.
fn jac_transpose_apply(jac: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let n = jac.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; n];
    for (row, &vi) in jac.iter().zip(v) {
        for (oj, rj) in out.iter_mut().zip(row) {
            *oj += vi * rj;
        }
    }
    out
}

/// One scalar degree of freedom of the normal-cone parametrization:
/// `t · direction` with `t ≥ 0` or `t` free.
struct NormalVariable {
    direction: Vec<f64>,
    nonneg: bool,
}

/// Parametrizes `N_X(y)` at a point of a convex set as a list of scalar
/// variables in the ambient constraint space.
fn normal_cone_variables(
    set: &ClosedSet,
    y: &[f64],
) -> Result<Vec<NormalVariable>, StationarityError> {
    let m = set.dim();
    fn walk(
        set: &ClosedSet,
        y: &[f64],
        offset: usize,
        m: usize,
        out: &mut Vec<NormalVariable>,
    ) -> Result<(), StationarityError> {
        let unit = |offset: usize, i: usize, sign: f64, m: usize| {
            let mut d = vec![0.0; m];
            d[offset + i] = sign;
            d
        };
        match set {
            ClosedSet::NonpositiveOrthant(dim) => {
                for i in 0..*dim {
                    if y[i].abs() <= TOL_FEAS {
                        out.push(NormalVariable {
                            direction: unit(offset, i, 1.0, m),
                            nonneg: true,
                        });
                    }
                    // Interior components contribute nothing: N_i = {0}.
                }
                Ok(())
            }
            ClosedSet::Zeros(dim) => {
                for i in 0..*dim {
                    out.push(NormalVariable {
                        direction: unit(offset, i, 1.0, m),
                        nonneg: false,
                    });
                }
                Ok(())
            }
            ClosedSet::Box { lower, upper } => {
                for i in 0..lower.len() {
                    let at_lower = (y[i] - lower[i]).abs() <= TOL_FEAS;
                    let at_upper = (y[i] - upper[i]).abs() <= TOL_FEAS;
                    match (at_lower, at_upper) {
                        (true, true) => out.push(NormalVariable {
                            direction: unit(offset, i, 1.0, m),
                            nonneg: false,
                        }),
                        (true, false) => out.push(NormalVariable {
                            direction: unit(offset, i, -1.0, m),
                            nonneg: true,
                        }),
                        (false, true) => out.push(NormalVariable {
                            direction: unit(offset, i, 1.0, m),
                            nonneg: true,
                        }),
                        (false, false) => {}
                    }
                }
                Ok(())
            }
            ClosedSet::Ball { center, radius } => {
                if *radius <= TOL_FEAS {
                    // A point: the whole space.
                    for i in 0..center.len() {
                        out.push(NormalVariable {
                            direction: unit(offset, i, 1.0, m),
                            nonneg: false,
                        });
                    }
                    return Ok(());
                }
                let r = vm::dist(y, center);
                if r < radius - TOL_FEAS {
                    return Ok(()); // interior: N = {0}
                }
                let mut d = vec![0.0; m];
                let n = vm::normalized(&vm::sub(y, center));
                d[offset..offset + n.len()].copy_from_slice(&n);
                out.push(NormalVariable {
                    direction: d,
                    nonneg: true,
                });
                Ok(())
            }
            ClosedSet::Lorentz(dim) => {
                let (z, t) = y.split_at(dim - 1);
                let s = vm::norm(z);
                if s < t[0] - TOL_FEAS {
                    return Ok(()); // interior
                }
                if t[0].abs() <= TOL_FEAS && s <= TOL_FEAS {
                    return Err(StationarityError::UnsupportedKind {
                        kind: "lorentz apex",
                    });
                }
                let mut local: Vec<f64> = z.iter().map(|&zi| zi / s).collect();
                local.push(-1.0);
                let mut d = vec![0.0; m];
                let n = vm::normalized(&local);
                d[offset..offset + n.len()].copy_from_slice(&n);
                out.push(NormalVariable {
                    direction: d,
                    nonneg: true,
                });
                Ok(())
            }
            ClosedSet::Sphere { center, .. } => {
                // Convex only when degenerate to a point: N = R^d.
                for i in 0..center.len() {
                    out.push(NormalVariable {
                        direction: unit(offset, i, 1.0, m),
                        nonneg: false,
                    });
                }
                Ok(())
            }
            ClosedSet::FiniteSet(points) => {
                for i in 0..points[0].len() {
                    out.push(NormalVariable {
                        direction: unit(offset, i, 1.0, m),
                        nonneg: false,
                    });
                }
                Ok(())
            }
            ClosedSet::Product(members) => {
                let mut off = offset;
                for member in members {
                    let d = member.dim();
                    walk(member, &y[off - offset..off - offset + d], off, m, out)?;
                    off += d;
                }
                Ok(())
            }
            ClosedSet::Union(_) => Err(StationarityError::UnsupportedKind { kind: "union" }),
        }
    }
    let mut out = Vec::new();
    walk(set, y, 0, m, &mut out)?;
    Ok(out)
}

/// Minimizes `‖b + Σ t_i c_i‖²` with `t_i ≥ 0` on sign-constrained
/// variables and `t_i` free otherwise — the Lawson-Hanson active-set
/// sweep with an always-passive free block.
fn nnls_with_free(columns: &[Vec<f64>], nonneg: &[bool], b: &[f64]) -> Vec<f64> {
    let k = columns.len();
    if k == 0 {
        return Vec::new();
    }
    let mut passive: Vec<bool> = nonneg.iter().map(|&s| !s).collect();
    let mut t = vec![0.0; k];

    let residual = |t: &[f64]| -> Vec<f64> {
        let mut r = b.to_vec();
        for (c, &ti) in columns.iter().zip(t) {
            r = vm::axpy(&r, ti, c);
        }
        r
    };

    // The free block is always passive; give it the unconstrained optimum
    // before sweeping the sign-constrained variables in.
    if passive.iter().any(|&p| p) {
        let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
        let sol = solve_least_squares(columns, &idx, b);
        for (&i, &z) in idx.iter().zip(&sol) {
            t[i] = z;
        }
    }

    for _sweep in 0..(4 * k.max(1) + 16) {
        // Most negative gradient among active sign-constrained variables.
        let r = residual(&t);
        let mut best: Option<(usize, f64)> = None;
        for i in 0..k {
            if !passive[i] {
                let g = vm::dot(&columns[i], &r);
                if g < -1e-12 && best.is_none_or(|(_, bg)| g < bg) {
                    best = Some((i, g));
                }
            }
        }
        match best {
            None => break,
            Some((enter, _)) => passive[enter] = true,
        }

        // Re-solve on the passive set, stepping back when sign constraints
        // break.
        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let sol = solve_least_squares(columns, &idx, b);
            let violated: Vec<usize> = idx
                .iter()
                .zip(&sol)
                .filter(|(&i, &z)| nonneg[i] && z <= 0.0)
                .map(|(&i, _)| i)
                .collect();
            if violated.is_empty() {
                for (&i, &z) in idx.iter().zip(&sol) {
                    t[i] = z;
                }
                break;
            }
            // Largest feasible interpolation toward the new solution.
            let mut alpha = f64::INFINITY;
            for (&i, &z) in idx.iter().zip(&sol) {
                if nonneg[i] && z <= 0.0 {
                    let denom = t[i] - z;
                    if denom > 0.0 {
                        alpha = alpha.min(t[i] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (&i, &z) in idx.iter().zip(&sol) {
                t[i] += alpha * (z - t[i]);
            }
            for &i in &violated {
                if t[i] <= 1e-14 {
                    t[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    t
}

/// Dense least squares `min ‖b + A_idx z‖²` by normal equations with
/// partial pivoting; a tiny ridge handles rank deficiency.
fn solve_least_squares(columns: &[Vec<f64>], idx: &[usize], b: &[f64]) -> Vec<f64> {
    let k = idx.len();
    if k == 0 {
        return Vec::new();
    }
    let mut gram = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for (a, &ia) in idx.iter().enumerate() {
        for (c, &ic) in idx.iter().enumerate() {
            gram[a][c] = vm::dot(&columns[ia], &columns[ic]);
        }
        rhs[a] = -vm::dot(&columns[ia], b);
    }
    match gaussian_solve(gram.clone(), rhs.clone()) {
        Some(z) => z,
        None => {
            let scale = (0..k).map(|i| gram[i][i]).fold(0.0f64, f64::max).max(1.0);
            for (i, row) in gram.iter_mut().enumerate() {
                row[i] += 1e-12 * scale;
            }
            gaussian_solve(gram, rhs).expect("ridge system is positive definite")
        }
    }
}

fn gaussian_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty range");
        if a[pivot][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in (row + 1)..n {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FuncModel;

    fn conic_problem() -> Problem {
        // min x₁+x₂ s.t. ‖x‖² − 2 ≤ 0.
        let objective = FuncModel::smooth_scalar(2, |x| x[0] + x[1], |_| vec![1.0, 1.0]);
        let g = FuncModel::smooth_scalar(
            2,
            |x| x[0] * x[0] + x[1] * x[1] - 2.0,
            |x| vec![2.0 * x[0], 2.0 * x[1]],
        );
        Problem::new(objective, vec![(g, ClosedSet::nonpositive_orthant(1))]).unwrap()
    }

    fn bench_1d() -> Problem {
        let objective = FuncModel::smooth_scalar(1, |x| x[0], |_| vec![1.0]);
        let g = FuncModel::smooth_scalar(1, |x| 1.0 - x[0], |_| vec![-1.0]);
        Problem::new(objective, vec![(g, ClosedSet::nonpositive_orthant(1))]).unwrap()
    }

    #[test]
    fn conic_residuals_at_exact_kkt_point() {
        let p = conic_problem();
        let r = conic_residuals(&p, &[-1.0, -1.0]).unwrap();
        assert_eq!(r.feas, 0.0);
        assert!((r.lambda[0] - 0.5).abs() < 1e-12, "λ = {}", r.lambda[0]);
        assert!(r.stat < 1e-12, "stat = {}", r.stat);
    }

    #[test]
    fn conic_residuals_near_kkt_point() {
        // At (−1.1, −1.0): feas = 0.21, λ by explicit least squares.
        let p = conic_problem();
        let r = conic_residuals(&p, &[-1.1, -1.0]).unwrap();
        assert!((r.feas - 0.21).abs() < 1e-12);
        let expected_lambda = (2.2 + 2.0) / (2.2f64 * 2.2 + 2.0 * 2.0);
        assert!(
            (r.lambda[0] - expected_lambda).abs() < 1e-10,
            "λ = {} vs {expected_lambda}",
            r.lambda[0]
        );
        let stat_expected =
            ((1.0 - 2.2 * expected_lambda).powi(2) + (1.0 - 2.0 * expected_lambda).powi(2)).sqrt();
        assert!((r.stat - stat_expected).abs() < 1e-10);

        // Cross-check the one-dimensional least squares by grid search.
        let mut best = f64::INFINITY;
        let mut best_l = 0.0;
        let mut l = 0.0;
        while l <= 2.0 {
            let v = f64::hypot(1.0 - 2.2 * l, 1.0 - 2.0 * l);
            if v < best {
                best = v;
                best_l = l;
            }
            l += 1e-6;
        }
        assert!((r.lambda[0] - best_l).abs() < 1e-5);
    }

    #[test]
    fn certificate_fails_with_zero_rho_and_nonzero_gradient() {
        let p = bench_1d();
        // x₀ = 1 is feasible with ∇φ = 1 ≠ 0: condition (2) fails at ρ = 0
        // for every ε < 1.
        let cert = check_approx_stationary(&p, &[1.0], 0.5, 0.0, 2.0).unwrap();
        assert!(!cert.passed());
        assert!((cert.eps_stat - 1.0).abs() < 1e-12);
        assert_eq!(cert.eps_feas, 0.0);
        // But it passes once ε dominates the gradient norm.
        let cert = check_approx_stationary(&p, &[1.0], 1.5, 0.0, 2.0).unwrap();
        assert!(cert.passed());
    }

    #[test]
    fn certificate_on_solved_1d_benchmark() {
        let x = 1.0 - 1.0 / 202.0;
        let p = bench_1d();
        let cert = check_approx_stationary(&p, &[x], 0.1, 101.0, 2.0).unwrap();
        assert!(cert.passed(), "cert: {cert:?}");
        assert!((cert.eps_feas - 1.0 / 202.0).abs() < 1e-12);
        let lambda = cert.multipliers.expect("extractable multipliers");
        assert!((lambda[0] - 1.0).abs() < 1e-9, "λ = {}", lambda[0]);
    }

    #[test]
    fn certificate_at_zero_eps_on_exact_kkt_point() {
        let p = conic_problem();
        let cert = check_approx_stationary(&p, &[-1.0, -1.0], 0.0, 5.0, 1.0).unwrap();
        assert!(cert.passed(), "cert: {cert:?}");
    }

    #[test]
    fn zero_eps_check_matches_direction_grid() {
        // d-stationarity at ε = 0 cross-checked by a direction grid on the
        // unit ball (resolution 1e−2).
        let p = conic_problem();
        let pf = p.penalty_fn(1.0, 5.0);
        let x = [-1.0, -1.0];
        let mut grid_min = f64::INFINITY;
        let n = 201;
        for i in 0..n {
            for j in 0..n {
                let w = [-1.0 + 0.01 * i as f64, -1.0 + 0.01 * j as f64];
                if vm::norm(&w) <= 1.0 {
                    grid_min = grid_min.min(pf.subderivative_value(&x, &w).unwrap());
                }
            }
        }
        let (_, dir_val) = direction_search(&pf, &x).unwrap();
        assert!(grid_min >= -1e-9, "grid found descent: {grid_min}");
        assert!((dir_val - grid_min.min(0.0)).abs() <= 1e-2);
    }

    #[test]
    fn nlp_residuals_at_exact_and_approximate_points() {
        let p = bench_1d();
        // Exact KKT point x = 1 with λ = 1.
        let r = nlp_kkt_residuals(&p, &[1.0], Some(&[1.0])).unwrap();
        assert!(r.stationarity < 1e-12);
        assert_eq!(r.feasibility, 0.0);
        assert_eq!(r.sign_violation, 0.0);
        assert_eq!(r.complementarity, 0.0);

        // Solver endpoint: g = 1/202 > 0, extraction gives λ = 1;
        // complementarity is not charged since g > 0.
        let x = 1.0 - 1.0 / 202.0;
        let r = nlp_kkt_residuals(&p, &[x], None).unwrap();
        assert!((r.feasibility - 1.0 / 202.0).abs() < 1e-12);
        assert!((r.lambda[0] - 1.0).abs() < 1e-9);
        assert_eq!(r.complementarity, 0.0);

        // Externally supplied negative multiplier: sign violation.
        let r = nlp_kkt_residuals(&p, &[1.0], Some(&[-0.5])).unwrap();
        assert_eq!(r.sign_violation, 0.5);
        assert_eq!(r.min_multiplier, -0.5);
    }

    #[test]
    fn nlp_feasibility_bound_against_set_distance() {
        // The residual groups dominate dist(F(x); X) up to the factor m.
        let objective = FuncModel::smooth_scalar(2, |x| x[0], |_| vec![1.0, 0.0]);
        let g = FuncModel::smooth(
            2,
            2,
            |x: &[f64]| vec![x[0] - 1.0, x[1] + 2.0],
            |_| vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        );
        let set = ClosedSet::product(vec![
            ClosedSet::nonpositive_orthant(1),
            ClosedSet::zeros(1),
        ])
        .unwrap();
        let p = Problem::new(objective, vec![(g, set)]).unwrap();
        for point in [[2.0, 0.5], [0.0, -3.0], [1.5, 1.5]] {
            let r = nlp_kkt_residuals(&p, &point, Some(&[0.0, 0.0])).unwrap();
            let dist = p.feasibility(&point).unwrap();
            let m = 2.0;
            assert!(dist <= m * r.feasibility + 1e-12);
        }
    }

    #[test]
    fn multiplier_is_collinear_with_projection_residual() {
        let p = conic_problem();
        // Infeasible point: λ must lie on the ray (F(x) − proj)/dist.
        let r = conic_residuals(&p, &[-1.3, -1.2]).unwrap();
        assert!(r.feas > 0.0);
        assert!(r.lambda[0] >= 0.0);
        // Scalar case: the ray is the positive axis.
        assert_eq!(r.lambda.len(), 1);
    }

    #[test]
    fn kappa_prime_fixtures() {
        // F(x) = x, X = R₋ at x = 1: inf = −1, dist = 1, κ′ = 1.
        let objective = FuncModel::smooth_scalar(1, |x| x[0], |_| vec![1.0]);
        let f = FuncModel::smooth_scalar(1, |x| x[0], |_| vec![1.0]);
        let p = Problem::new(objective, vec![(f, ClosedSet::nonpositive_orthant(1))]).unwrap();
        let k = kappa_prime_condition(&p, &[1.0]).unwrap();
        assert!(k.satisfied && !k.feasible);
        assert!((k.kappa_prime - 1.0).abs() < 1e-12);

        // Feasible point: trivially satisfied, sentinel 0.
        let k = kappa_prime_condition(&p, &[-1.0]).unwrap();
        assert!(k.satisfied && k.feasible);
        assert_eq!(k.kappa_prime, 0.0);

        // Degenerate Jacobian: F constant, F(x) = (0, 1) ∉ {0}².
        let objective = FuncModel::smooth_scalar(1, |x| x[0], |_| vec![1.0]);
        let f = FuncModel::smooth(
            1,
            2,
            |_: &[f64]| vec![0.0, 1.0],
            |_| vec![vec![0.0], vec![0.0]],
        );
        let p = Problem::new(objective, vec![(f, ClosedSet::zeros(2))]).unwrap();
        let k = kappa_prime_condition(&p, &[0.0]).unwrap();
        assert!(!k.satisfied);
        assert!(k.kappa_prime.is_infinite());
    }

    #[test]
    fn nnls_solves_sign_constrained_least_squares() {
        // min ‖(1,1) + λ(−2,−2)‖², λ ≥ 0 → λ = 1/2.
        let t = nnls_with_free(&[vec![-2.0, -2.0]], &[true], &[1.0, 1.0]);
        assert!((t[0] - 0.5).abs() < 1e-12);
        // Sign constraint binds: minimizer would be negative.
        let t = nnls_with_free(&[vec![1.0, 0.0]], &[true], &[1.0, 0.0]);
        assert_eq!(t[0], 0.0);
        // Free variable gets the unconstrained optimum.
        let t = nnls_with_free(&[vec![1.0, 0.0]], &[false], &[1.0, 0.0]);
        assert!((t[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn relaxed_normal_cone_only_widens() {
        let p = conic_problem();
        let strict = conic_residuals(&p, &[-1.0, -1.0]).unwrap();
        let relaxed = conic_residuals_relaxed(&p, &[-1.0, -1.0], 0.1).unwrap();
        assert!(relaxed.stat <= strict.stat + 1e-15);
    }

    #[test]
    fn wrong_set_shape_is_rejected() {
        let objective = FuncModel::smooth_scalar(1, |x| x[0], |_| vec![1.0]);
        let f = FuncModel::smooth_scalar(1, |x| x[0], |_| vec![1.0]);
        let p = Problem::new(objective, vec![(f, ClosedSet::ball(vec![0.0], 1.0).unwrap())])
            .unwrap();
        assert!(matches!(
            nlp_kkt_residuals(&p, &[0.0], None),
            Err(StationarityError::WrongSetShape(_))
        ));
    }
}

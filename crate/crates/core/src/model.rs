//! Objective and constraint models, problem assembly, and the merged
//! penalized function.
//!
//! A [`FuncModel`] carries value and semi-derivative oracles for the
//! classes the toolkit understands: smooth maps with explicit
//! gradients/Jacobians, and scalar minima or maxima of finitely many
//! smooth pieces. For all of these the semi-derivative
//!
//! ```text
//! d F(x)(w) = lim_{t↓0, w′→w} (F(x + t w′) − F(x)) / t
//! ```
//!
//! exists and is computed exactly: linear for smooth maps, min/max over
//! the *active* pieces otherwise.
//!
//! A [`Problem`] bundles a scalar objective with constraint blocks
//! `F_i(x) ∈ X_i`, and a [`PenaltyFn`] is the merged unconstrained
//! function `f_{α,ρ}(x) = φ(x) + ρ·distᵅ(F(x); X)` whose subderivative
//! the solver drives.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::penalty::{PenaltyError, PenaltyKind, SubderivativeForm};
use crate::sets::{gauss, ClosedSet, SetError, TOL_FEAS};
use crate::vecmath as vm;

/// Activity tolerance for min/max-of-smooth pieces.
pub const TOL_ACTIVE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model produced a non-finite value")]
    NonFiniteValue,
    #[error("gradient check failed for piece {piece}, coordinate {coordinate}: analytic {analytic:.6e} vs numeric {numeric:.6e}")]
    GradientMismatch {
        piece: usize,
        coordinate: usize,
        analytic: f64,
        numeric: f64,
    },
    #[error("start point is infeasible: dist(F(x₀); X) = {dist:.3e}")]
    InfeasibleStart { dist: f64 },
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
    #[error("invalid model: {0}")]
    Invalid(String),
}

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;

/// One smooth scalar piece with an explicit gradient.
#[derive(Clone)]
pub struct SmoothPiece {
    pub value: ScalarFn,
    pub gradient: GradientFn,
}

impl SmoothPiece {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        SmoothPiece {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }
}

/// A function with value and semi-derivative oracles.
#[derive(Clone)]
pub enum FuncModel {
    /// Continuously differentiable map with an explicit Jacobian
    /// (rows indexed by output component).
    Smooth {
        value: VectorFn,
        jacobian: JacobianFn,
        dim_in: usize,
        dim_out: usize,
    },
    /// Pointwise minimum of smooth scalar pieces.
    MinOfSmooth {
        pieces: Vec<SmoothPiece>,
        dim_in: usize,
    },
    /// Pointwise maximum of smooth scalar pieces.
    MaxOfSmooth {
        pieces: Vec<SmoothPiece>,
        dim_in: usize,
    },
    /// Concatenation of models sharing the input space; assembly plumbing
    /// for vector constraints with mixed components.
    Stack { parts: Vec<FuncModel>, dim_in: usize },
}

impl fmt::Debug for FuncModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FuncModel::Smooth { dim_in, dim_out, .. } => {
                write!(f, "Smooth({dim_in} -> {dim_out})")
            }
            FuncModel::MinOfSmooth { pieces, dim_in } => {
                write!(f, "MinOfSmooth({} pieces, dim {dim_in})", pieces.len())
            }
            FuncModel::MaxOfSmooth { pieces, dim_in } => {
                write!(f, "MaxOfSmooth({} pieces, dim {dim_in})", pieces.len())
            }
            FuncModel::Stack { parts, dim_in } => {
                write!(f, "Stack({} parts, dim {dim_in})", parts.len())
            }
        }
    }
}

impl FuncModel {
    pub fn smooth(
        dim_in: usize,
        dim_out: usize,
        value: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        FuncModel::Smooth {
            value: Arc::new(value),
            jacobian: Arc::new(jacobian),
            dim_in,
            dim_out,
        }
    }

    pub fn smooth_scalar(
        dim_in: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        let value = Arc::new(value);
        let gradient = Arc::new(gradient);
        FuncModel::Smooth {
            value: Arc::new(move |x| vec![value(x)]),
            jacobian: Arc::new(move |x| vec![gradient(x)]),
            dim_in,
            dim_out: 1,
        }
    }

    pub fn min_of_smooth(dim_in: usize, pieces: Vec<SmoothPiece>) -> Result<Self, ModelError> {
        if pieces.is_empty() {
            return Err(ModelError::Invalid("min-of-smooth needs at least one piece".into()));
        }
        Ok(FuncModel::MinOfSmooth { pieces, dim_in })
    }

    pub fn max_of_smooth(dim_in: usize, pieces: Vec<SmoothPiece>) -> Result<Self, ModelError> {
        if pieces.is_empty() {
            return Err(ModelError::Invalid("max-of-smooth needs at least one piece".into()));
        }
        Ok(FuncModel::MaxOfSmooth { pieces, dim_in })
    }

    pub fn stack(parts: Vec<FuncModel>) -> Result<Self, ModelError> {
        if parts.is_empty() {
            return Err(ModelError::Invalid("stack needs at least one part".into()));
        }
        let dim_in = parts[0].dim_in();
        if parts.iter().any(|p| p.dim_in() != dim_in) {
            return Err(ModelError::Invalid("stack parts must share the input space".into()));
        }
        Ok(FuncModel::Stack { parts, dim_in })
    }

    pub fn dim_in(&self) -> usize {
        match self {
            FuncModel::Smooth { dim_in, .. }
            | FuncModel::MinOfSmooth { dim_in, .. }
            | FuncModel::MaxOfSmooth { dim_in, .. }
            | FuncModel::Stack { dim_in, .. } => *dim_in,
        }
    }

    pub fn dim_out(&self) -> usize {
        match self {
            FuncModel::Smooth { dim_out, .. } => *dim_out,
            FuncModel::MinOfSmooth { .. } | FuncModel::MaxOfSmooth { .. } => 1,
            FuncModel::Stack { parts, .. } => parts.iter().map(|p| p.dim_out()).sum(),
        }
    }

    pub fn is_smooth(&self) -> bool {
        match self {
            FuncModel::Smooth { .. } => true,
            FuncModel::MinOfSmooth { pieces, .. } | FuncModel::MaxOfSmooth { pieces, .. } => {
                pieces.len() == 1
            }
            FuncModel::Stack { parts, .. } => parts.iter().all(|p| p.is_smooth()),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.dim_in() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim_in(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Function value; min/max classes evaluate every piece and reduce.
    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_input(x)?;
        let out = match self {
            FuncModel::Smooth { value, .. } => value(x),
            FuncModel::MinOfSmooth { pieces, .. } => {
                vec![pieces
                    .iter()
                    .map(|p| (p.value)(x))
                    .fold(f64::INFINITY, f64::min)]
            }
            FuncModel::MaxOfSmooth { pieces, .. } => {
                vec![pieces
                    .iter()
                    .map(|p| (p.value)(x))
                    .fold(f64::NEG_INFINITY, f64::max)]
            }
            FuncModel::Stack { parts, .. } => {
                let mut out = Vec::with_capacity(self.dim_out());
                for p in parts {
                    out.extend(p.value(x)?);
                }
                out
            }
        };
        if out.len() != self.dim_out() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim_out(),
                got: out.len(),
            });
        }
        if !vm::is_finite(&out) {
            return Err(ModelError::NonFiniteValue);
        }
        Ok(out)
    }

    /// Scalar value for models with a single output.
    pub fn value_scalar(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(self.value(x)?[0])
    }

    /// The semi-derivative `d F(x)(w)`: linear for smooth maps, min/max
    /// over active pieces otherwise.
    pub fn semiderivative(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_input(x)?;
        self.check_input(w)?;
        match self {
            FuncModel::Smooth { jacobian, .. } => {
                Ok(jacobian(x).iter().map(|row| vm::dot(row, w)).collect())
            }
            FuncModel::MinOfSmooth { .. } => {
                let v = self
                    .active_gradients(x)?
                    .iter()
                    .map(|g| vm::dot(g, w))
                    .fold(f64::INFINITY, f64::min);
                Ok(vec![v])
            }
            FuncModel::MaxOfSmooth { .. } => {
                let v = self
                    .active_gradients(x)?
                    .iter()
                    .map(|g| vm::dot(g, w))
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok(vec![v])
            }
            FuncModel::Stack { parts, .. } => {
                let mut out = Vec::with_capacity(self.dim_out());
                for p in parts {
                    out.extend(p.semiderivative(x, w)?);
                }
                Ok(out)
            }
        }
    }

    pub fn semiderivative_scalar(&self, x: &[f64], w: &[f64]) -> Result<f64, ModelError> {
        Ok(self.semiderivative(x, w)?[0])
    }

    /// Gradients of the pieces active at `x` (all pieces whose value is
    /// within [`TOL_ACTIVE`] of the min/max). For smooth scalar models the
    /// single gradient.
    pub fn active_gradients(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, ModelError> {
        self.check_input(x)?;
        match self {
            FuncModel::Smooth { jacobian, dim_out, .. } => {
                if *dim_out != 1 {
                    return Err(ModelError::Invalid(
                        "active gradients need a scalar model".into(),
                    ));
                }
                Ok(jacobian(x))
            }
            FuncModel::MinOfSmooth { pieces, .. } => {
                let vals: Vec<f64> = pieces.iter().map(|p| (p.value)(x)).collect();
                let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
                Ok(pieces
                    .iter()
                    .zip(&vals)
                    .filter(|(_, &v)| v <= best + TOL_ACTIVE)
                    .map(|(p, _)| (p.gradient)(x))
                    .collect())
            }
            FuncModel::MaxOfSmooth { pieces, .. } => {
                let vals: Vec<f64> = pieces.iter().map(|p| (p.value)(x)).collect();
                let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(pieces
                    .iter()
                    .zip(&vals)
                    .filter(|(_, &v)| v >= best - TOL_ACTIVE)
                    .map(|(p, _)| (p.gradient)(x))
                    .collect())
            }
            FuncModel::Stack { .. } => Err(ModelError::Invalid(
                "active gradients need a scalar model".into(),
            )),
        }
    }

    /// The Jacobian when the model is linearizable at `x`: smooth, or
    /// nonsmooth with a unique active piece.
    pub fn jacobian_at(&self, x: &[f64]) -> Result<Option<Vec<Vec<f64>>>, ModelError> {
        self.check_input(x)?;
        match self {
            FuncModel::Smooth { jacobian, .. } => Ok(Some(jacobian(x))),
            FuncModel::MinOfSmooth { .. } | FuncModel::MaxOfSmooth { .. } => {
                let grads = self.active_gradients(x)?;
                if grads.len() == 1 {
                    Ok(Some(grads))
                } else {
                    Ok(None)
                }
            }
            FuncModel::Stack { parts, .. } => {
                let mut rows = Vec::with_capacity(self.dim_out());
                for p in parts {
                    match p.jacobian_at(x)? {
                        Some(r) => rows.extend(r),
                        None => return Ok(None),
                    }
                }
                Ok(Some(rows))
            }
        }
    }

    /// Checks every piece gradient against central finite differences on
    /// Gaussian sample points. Run once at problem load.
    pub fn validate_gradients(&self, samples: usize, seed: u64) -> Result<(), ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim_in();
        let h = 1e-6;
        for _ in 0..samples {
            let x: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
            for (piece, (vals, grad)) in self.scalar_pieces().into_iter().enumerate() {
                let g = grad(&x);
                for j in 0..n {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += h;
                    xm[j] -= h;
                    let (fp, fm) = (vals(&xp), vals(&xm));
                    if !fp.is_finite() || !fm.is_finite() {
                        continue;
                    }
                    let fd = (fp - fm) / (2.0 * h);
                    let scale = g[j].abs().max(fd.abs()).max(1.0);
                    if (fd - g[j]).abs() / scale > 1e-4 {
                        return Err(ModelError::GradientMismatch {
                            piece,
                            coordinate: j,
                            analytic: g[j],
                            numeric: fd,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Every scalar piece of the model as (value, gradient) closures.
    fn scalar_pieces(&self) -> Vec<(ScalarFn, GradientFn)> {
        match self {
            FuncModel::Smooth { value, jacobian, dim_out, .. } => (0..*dim_out)
                .map(|i| {
                    let value = value.clone();
                    let jacobian = jacobian.clone();
                    (
                        Arc::new(move |x: &[f64]| value(x)[i]) as ScalarFn,
                        Arc::new(move |x: &[f64]| jacobian(x)[i].clone()) as GradientFn,
                    )
                })
                .collect(),
            FuncModel::MinOfSmooth { pieces, .. } | FuncModel::MaxOfSmooth { pieces, .. } => pieces
                .iter()
                .map(|p| (p.value.clone(), p.gradient.clone()))
                .collect(),
            FuncModel::Stack { parts, .. } => {
                parts.iter().flat_map(|p| p.scalar_pieces()).collect()
            }
        }
    }

    /// Re-bases the model onto a block of a larger input space: the new
    /// model reads its inputs from `z[offset .. offset + dim_in]`.
    pub fn remap_input(&self, total_dim: usize, offset: usize) -> FuncModel {
        let d = self.dim_in();
        assert!(offset + d <= total_dim);
        let slice = move |z: &[f64]| z[offset..offset + d].to_vec();
        let pad = move |g: Vec<f64>| {
            let mut out = vec![0.0; total_dim];
            out[offset..offset + d].copy_from_slice(&g);
            out
        };
        match self {
            FuncModel::Smooth { value, jacobian, dim_out, .. } => {
                let value = value.clone();
                let jacobian = jacobian.clone();
                FuncModel::Smooth {
                    value: Arc::new(move |z| value(&slice(z))),
                    jacobian: Arc::new(move |z| {
                        jacobian(&slice(z)).into_iter().map(pad).collect()
                    }),
                    dim_in: total_dim,
                    dim_out: *dim_out,
                }
            }
            FuncModel::MinOfSmooth { pieces, .. } => FuncModel::MinOfSmooth {
                pieces: remap_pieces(pieces, total_dim, offset, d),
                dim_in: total_dim,
            },
            FuncModel::MaxOfSmooth { pieces, .. } => FuncModel::MaxOfSmooth {
                pieces: remap_pieces(pieces, total_dim, offset, d),
                dim_in: total_dim,
            },
            FuncModel::Stack { parts, .. } => FuncModel::Stack {
                parts: parts
                    .iter()
                    .map(|p| p.remap_input(total_dim, offset))
                    .collect(),
                dim_in: total_dim,
            },
        }
    }
}

fn remap_pieces(
    pieces: &[SmoothPiece],
    total_dim: usize,
    offset: usize,
    d: usize,
) -> Vec<SmoothPiece> {
    pieces
        .iter()
        .map(|p| {
            let value = p.value.clone();
            let gradient = p.gradient.clone();
            SmoothPiece {
                value: Arc::new(move |z: &[f64]| value(&z[offset..offset + d])),
                gradient: Arc::new(move |z: &[f64]| {
                    let g = gradient(&z[offset..offset + d]);
                    let mut out = vec![0.0; total_dim];
                    out[offset..offset + d].copy_from_slice(&g);
                    out
                }),
            }
        })
        .collect()
}

/// The constrained problem `min φ(x) s.t. F_i(x) ∈ X_i`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub objective: FuncModel,
    pub constraints: Vec<(FuncModel, ClosedSet)>,
    /// Known feasible start.
    pub x0: Option<Vec<f64>>,
    /// Lower-bound datum: `f_{α,ρ₀}(x) ≥ −M` for all `x` (an assumption
    /// carried as metadata, never verified globally).
    pub lower_bound: Option<f64>,
    pub rho0: f64,
    pub alpha: f64,
}

const GRADIENT_PROBE_SAMPLES: usize = 16;

impl Problem {
    /// Assembles and validates a problem: dimension consistency, set
    /// validity, and a finite-difference probe of every supplied gradient.
    pub fn new(
        objective: FuncModel,
        constraints: Vec<(FuncModel, ClosedSet)>,
    ) -> Result<Self, ModelError> {
        if objective.dim_out() != 1 {
            return Err(ModelError::Invalid("objective must be scalar".into()));
        }
        let n = objective.dim_in();
        for (model, set) in &constraints {
            if model.dim_in() != n {
                return Err(ModelError::DimensionMismatch {
                    expected: n,
                    got: model.dim_in(),
                });
            }
            set.validate()?;
            if model.dim_out() != set.dim() {
                return Err(ModelError::DimensionMismatch {
                    expected: set.dim(),
                    got: model.dim_out(),
                });
            }
        }
        let seed = crate::oracle::seed_from_env();
        objective.validate_gradients(GRADIENT_PROBE_SAMPLES, seed)?;
        for (model, _) in &constraints {
            model.validate_gradients(GRADIENT_PROBE_SAMPLES, seed)?;
        }
        Ok(Problem {
            objective,
            constraints,
            x0: None,
            lower_bound: None,
            rho0: 0.0,
            alpha: 2.0,
        })
    }

    /// Attaches a feasible start; rejects points with
    /// `dist(F(x₀); X) > TOL_FEAS`.
    pub fn with_start(mut self, x0: Vec<f64>) -> Result<Self, ModelError> {
        let d = self.feasibility(&x0)?;
        if d > TOL_FEAS {
            return Err(ModelError::InfeasibleStart { dist: d });
        }
        self.x0 = Some(x0);
        Ok(self)
    }

    pub fn with_lower_bound(mut self, m: f64) -> Result<Self, ModelError> {
        if !(m >= 0.0) {
            return Err(ModelError::Invalid("lower-bound datum M must be ≥ 0".into()));
        }
        self.lower_bound = Some(m);
        Ok(self)
    }

    pub fn with_rho0(mut self, rho0: f64) -> Result<Self, ModelError> {
        if !(rho0 >= 0.0) {
            return Err(ModelError::Invalid("ρ₀ must be ≥ 0".into()));
        }
        self.rho0 = rho0;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self, ModelError> {
        if !(alpha >= 1.0) {
            return Err(ModelError::Invalid("α must be ≥ 1".into()));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.objective.dim_in()
    }

    /// Total constraint output dimension `m`.
    pub fn constraint_dim(&self) -> usize {
        self.constraints.iter().map(|(m, _)| m.dim_out()).sum()
    }

    /// The product target set `X = X₁ × … × X_k`, or `None` for an
    /// unconstrained problem.
    pub fn constraint_set(&self) -> Option<ClosedSet> {
        match self.constraints.len() {
            0 => None,
            1 => Some(self.constraints[0].1.clone()),
            _ => Some(ClosedSet::Product(
                self.constraints.iter().map(|(_, s)| s.clone()).collect(),
            )),
        }
    }

    /// Stacked constraint value `F(x)`.
    pub fn constraint_value(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut out = Vec::with_capacity(self.constraint_dim());
        for (model, _) in &self.constraints {
            out.extend(model.value(x)?);
        }
        Ok(out)
    }

    /// `dist(F(x); X)`; zero for unconstrained problems.
    pub fn feasibility(&self, x: &[f64]) -> Result<f64, ModelError> {
        let mut acc = 0.0;
        for (model, set) in &self.constraints {
            let v = model.value(x)?;
            acc += set.distance(&v)?.powi(2);
        }
        Ok(acc.sqrt())
    }

    /// The merged unconstrained function `f_{α,ρ}`.
    pub fn penalty_fn(&self, alpha: f64, rho: f64) -> PenaltyFn {
        PenaltyFn {
            objective: self.objective.clone(),
            constraints: self.constraints.clone(),
            rho,
            alpha,
            metric: PenaltyMetric::Euclidean,
        }
    }

    /// The merged function with the separable ℓ_α-power penalty; the
    /// target set must be a product of intervals (orthants, zeros, boxes).
    pub fn penalty_fn_lp(&self, alpha: f64, rho: f64) -> Result<PenaltyFn, ModelError> {
        let set = self
            .constraint_set()
            .ok_or_else(|| ModelError::Invalid("lp penalty needs constraints".into()))?;
        // Construction validates α > 1 and the interval-product shape.
        PenaltyKind::lp_power(alpha, set)?;
        Ok(PenaltyFn {
            objective: self.objective.clone(),
            constraints: self.constraints.clone(),
            rho,
            alpha,
            metric: PenaltyMetric::SeparableLp,
        })
    }
}

/// Rewrites the composite problem `min g(F(x))` as the exact penalization
/// `min g(y) + ρ·‖F(x) − y‖` over the lifted variables `(x, y)`: the set
/// is `{0}^m` and the constraint map is `(x, y) ↦ F(x) − y`. Values on
/// the graph `y = F(x)` reproduce `g(F(x))` exactly.
pub fn pull_out(g: &FuncModel, f: &FuncModel, rho: f64) -> Result<PenaltyFn, ModelError> {
    if g.dim_out() != 1 {
        return Err(ModelError::Invalid("outer function must be scalar".into()));
    }
    if !(rho > 0.0) {
        return Err(ModelError::Invalid("pull-out needs ρ > 0".into()));
    }
    let n = f.dim_in();
    let m = f.dim_out();
    if g.dim_in() != m {
        return Err(ModelError::DimensionMismatch {
            expected: m,
            got: g.dim_in(),
        });
    }
    let objective = g.remap_input(n + m, n);
    let residual = lifted_residual(f, n, m)?;
    Ok(PenaltyFn {
        objective,
        constraints: vec![(residual, ClosedSet::zeros(m))],
        rho,
        alpha: 1.0,
        metric: PenaltyMetric::Euclidean,
    })
}

/// The map `(x, y) ↦ F(x) − y` on `R^{n+m}`.
fn lifted_residual(f: &FuncModel, n: usize, m: usize) -> Result<FuncModel, ModelError> {
    lifted_residual_offset(f, n, m, 0)
}

/// Lifted residual for the part of `F` whose outputs start at `row_offset`
/// inside the lifted block; each scalar component subtracts its own lifted
/// variable, so min/max classes are preserved.
fn lifted_residual_offset(
    f: &FuncModel,
    n: usize,
    m: usize,
    row_offset: usize,
) -> Result<FuncModel, ModelError> {
    match f {
        FuncModel::Smooth { value, jacobian, dim_out, .. } => {
            let value = value.clone();
            let jacobian = jacobian.clone();
            let dim_out = *dim_out;
            Ok(FuncModel::Smooth {
                value: Arc::new(move |z: &[f64]| {
                    let fx = value(&z[..n]);
                    fx.iter()
                        .enumerate()
                        .map(|(i, a)| a - z[n + row_offset + i])
                        .collect()
                }),
                jacobian: Arc::new(move |z: &[f64]| {
                    jacobian(&z[..n])
                        .into_iter()
                        .enumerate()
                        .map(|(i, row)| {
                            let mut out = vec![0.0; n + m];
                            out[..n].copy_from_slice(&row);
                            out[n + row_offset + i] = -1.0;
                            out
                        })
                        .collect()
                }),
                dim_in: n + m,
                dim_out,
            })
        }
        FuncModel::MinOfSmooth { pieces, .. } | FuncModel::MaxOfSmooth { pieces, .. } => {
            let shifted: Vec<SmoothPiece> = pieces
                .iter()
                .map(|p| {
                    let value = p.value.clone();
                    let gradient = p.gradient.clone();
                    SmoothPiece {
                        value: Arc::new(move |z: &[f64]| value(&z[..n]) - z[n + row_offset]),
                        gradient: Arc::new(move |z: &[f64]| {
                            let mut g = gradient(&z[..n]);
                            g.resize(n + m, 0.0);
                            g[n + row_offset] = -1.0;
                            g
                        }),
                    }
                })
                .collect();
            match f {
                FuncModel::MinOfSmooth { .. } => FuncModel::min_of_smooth(n + m, shifted),
                _ => FuncModel::max_of_smooth(n + m, shifted),
            }
        }
        FuncModel::Stack { parts, .. } => {
            let mut out = Vec::with_capacity(parts.len());
            let mut row = row_offset;
            for p in parts {
                out.push(lifted_residual_offset(p, n, m, row)?);
                row += p.dim_out();
            }
            FuncModel::stack(out)
        }
    }
}

/// Which distance family the merged function penalizes with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyMetric {
    /// `distᵅ(F(x); X)` in the Euclidean norm.
    Euclidean,
    /// `Σ_i |F(x)_i − clamp_i|ᵅ`, the ℓ_α-power penalty; interval-product
    /// targets only, smooth in the constraint output for α > 1.
    SeparableLp,
}

/// The merged unconstrained function `f_{α,ρ}(x) = φ(x) + ρ·distᵅ(F(x); X)`
/// with exact subderivative evaluation.
#[derive(Debug, Clone)]
pub struct PenaltyFn {
    pub objective: FuncModel,
    pub constraints: Vec<(FuncModel, ClosedSet)>,
    pub rho: f64,
    pub alpha: f64,
    pub metric: PenaltyMetric,
}

/// What the penalty term contributes to `d f_{α,ρ}(x)(·)`.
#[derive(Debug, Clone)]
pub enum PenaltyTerm {
    /// No contribution (feasible point with α > 1, or ρ = 0).
    Zero,
    /// `min_j ⟨g_j, w⟩` over ρ-scaled chained gradients.
    MinOfLinear(Vec<Vec<f64>>),
    /// `ρ · dist(dF(x)(w); T_X(F(x)))` — the feasible exact-penalty case.
    Cone(ConeTerm),
    /// Evaluable but not linearizable (nonsmooth constraint components
    /// with several active pieces at an infeasible point).
    General,
}

/// Data for the tangent-cone distance term at a feasible point.
#[derive(Debug, Clone)]
pub struct ConeTerm {
    pub rho: f64,
    pub x: Vec<f64>,
    pub blocks: Vec<ConeBlock>,
    /// True when every block map is linearizable at `x` and every block
    /// set is convex: the direction subproblem is then convex with a
    /// dual certificate.
    pub convex: bool,
}

#[derive(Debug, Clone)]
pub struct ConeBlock {
    pub model: FuncModel,
    pub set: ClosedSet,
    /// Anchor point of the tangent cone: the projection of `F_b(x)`.
    pub base: Vec<f64>,
    /// Jacobian rows of the block map when linearizable at `x`.
    pub jacobian: Option<Vec<Vec<f64>>>,
}

impl ConeTerm {
    /// `ρ · dist(dF(x)(w); T_X(F(x)))` with the product-cone distance.
    pub fn evaluate(&self, w: &[f64]) -> Result<f64, ModelError> {
        let mut acc = 0.0;
        for b in &self.blocks {
            let v = b.model.semiderivative(&self.x, w)?;
            acc += b.set.tangent_dist(&b.base, &v)?.powi(2);
        }
        Ok(self.rho * acc.sqrt())
    }

    /// A generalized gradient of the cone term at `w` (active-piece
    /// Jacobians through the residual to the tangent cone).
    pub fn subgradient(&self, w: &[f64]) -> Result<Vec<f64>, ModelError> {
        let n = self.x.len();
        let mut residuals: Vec<Vec<f64>> = Vec::with_capacity(self.blocks.len());
        let mut total_sq = 0.0;
        for b in &self.blocks {
            let v = b.model.semiderivative(&self.x, w)?;
            let p = b.set.tangent_project(&b.base, &v)?;
            let r = vm::sub(&v, &p);
            total_sq += vm::dot(&r, &r);
            residuals.push(r);
        }
        let total = total_sq.sqrt();
        if total <= 1e-15 {
            return Ok(vec![0.0; n]);
        }
        let mut g = vec![0.0; n];
        for (b, r) in self.blocks.iter().zip(&residuals) {
            let rows = match &b.jacobian {
                Some(rows) => rows.clone(),
                // Nonsmooth block: differentiate through an active piece.
                None => b.model.active_gradients(&self.x)?.into_iter().take(1).collect(),
            };
            for (row, ri) in rows.iter().zip(r) {
                for j in 0..n {
                    g[j] += row[j] * ri / total;
                }
            }
        }
        Ok(vm::scale(&g, self.rho))
    }
}

/// `d f_{α,ρ}(x)(·)` split into the objective part and the penalty part.
#[derive(Debug, Clone)]
pub struct DirectionalForm {
    /// Active-piece gradients of φ.
    pub phi_candidates: Vec<Vec<f64>>,
    /// True when φ is max-of-smooth (candidates combine by max).
    pub phi_is_max: bool,
    pub penalty: PenaltyTerm,
}

impl PenaltyFn {
    pub fn dim(&self) -> usize {
        self.objective.dim_in()
    }

    /// The target set as a single product set.
    pub fn constraint_set(&self) -> Option<ClosedSet> {
        match self.constraints.len() {
            0 => None,
            1 => Some(self.constraints[0].1.clone()),
            _ => Some(ClosedSet::Product(
                self.constraints.iter().map(|(_, s)| s.clone()).collect(),
            )),
        }
    }

    pub fn phi(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.objective.value_scalar(x)
    }

    /// `dist(F(x); X)` in the Euclidean norm — the feasibility residual is
    /// Euclidean under either penalty metric.
    pub fn dist(&self, x: &[f64]) -> Result<f64, ModelError> {
        let mut acc = 0.0;
        for (model, set) in &self.constraints {
            let v = model.value(x)?;
            acc += set.distance(&v)?.powi(2);
        }
        Ok(acc.sqrt())
    }

    /// `f_{α,ρ}(x)`: the objective plus the ρ-scaled penalty term.
    pub fn value(&self, x: &[f64]) -> Result<f64, ModelError> {
        match self.metric {
            PenaltyMetric::Euclidean => {
                Ok(self.phi(x)? + self.rho * self.dist(x)?.powf(self.alpha))
            }
            PenaltyMetric::SeparableLp => {
                let set = self.constraint_set().expect("lp penalty has constraints");
                let pk = PenaltyKind::lp_power(self.alpha, set)?;
                let fx = self.stacked_value(x)?;
                Ok(self.phi(x)? + self.rho * pk.eval(&fx)?)
            }
        }
    }

    /// Evaluates the total subderivative `d f_{α,ρ}(x)(w)` by the chain
    /// rule: `dφ(x)(w) + ρ·d(distᵅ)(F(x))(dF(x)(w))`.
    pub fn subderivative_value(&self, x: &[f64], w: &[f64]) -> Result<f64, ModelError> {
        let phi_part = self.objective.semiderivative_scalar(x, w)?;
        if self.constraints.is_empty() || self.rho == 0.0 {
            return Ok(phi_part);
        }
        let set = self.constraint_set().expect("nonempty constraints");
        let fx = self.stacked_value(x)?;
        let v = self.stacked_semiderivative(x, w)?;
        let form = self.distance_power_form(&set, &fx)?;
        Ok(phi_part + self.rho * form.evaluate(&v))
    }

    fn stacked_value(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut out = Vec::new();
        for (model, _) in &self.constraints {
            out.extend(model.value(x)?);
        }
        Ok(out)
    }

    fn stacked_semiderivative(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut out = Vec::new();
        for (model, _) in &self.constraints {
            out.extend(model.semiderivative(x, w)?);
        }
        Ok(out)
    }

    /// Subderivative form of the penalty term at `fx`.
    fn distance_power_form(
        &self,
        set: &ClosedSet,
        fx: &[f64],
    ) -> Result<SubderivativeForm, ModelError> {
        let pk = match self.metric {
            PenaltyMetric::SeparableLp => PenaltyKind::lp_power(self.alpha, set.clone())?,
            PenaltyMetric::Euclidean if self.alpha == 1.0 => PenaltyKind::exact(set.clone()),
            PenaltyMetric::Euclidean => PenaltyKind::power(self.alpha, set.clone())?,
        };
        Ok(pk.subderivative(fx)?)
    }

    /// Structures `d f_{α,ρ}(x)(·)` for direction search.
    pub fn directional_form(&self, x: &[f64]) -> Result<DirectionalForm, ModelError> {
        let phi_candidates = self.objective.active_gradients(x)?;
        let phi_is_max = matches!(self.objective, FuncModel::MaxOfSmooth { .. });

        if self.constraints.is_empty() || self.rho == 0.0 {
            return Ok(DirectionalForm {
                phi_candidates,
                phi_is_max,
                penalty: PenaltyTerm::Zero,
            });
        }

        if self.metric == PenaltyMetric::SeparableLp {
            // The ℓ_α-power penalty is smooth in the constraint output for
            // α > 1: a single chained gradient, zero at feasible points.
            let set = self.constraint_set().expect("nonempty constraints");
            let fx = self.stacked_value(x)?;
            let form = self.distance_power_form(&set, &fx)?;
            let g = &form.linear_candidates[0];
            if g.iter().all(|v| *v == 0.0) {
                return Ok(DirectionalForm {
                    phi_candidates,
                    phi_is_max,
                    penalty: PenaltyTerm::Zero,
                });
            }
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for (model, _) in &self.constraints {
                match model.jacobian_at(x)? {
                    Some(r) => rows.extend(r),
                    None => {
                        return Ok(DirectionalForm {
                            phi_candidates,
                            phi_is_max,
                            penalty: PenaltyTerm::General,
                        })
                    }
                }
            }
            let n = self.dim();
            let mut chained = vec![0.0; n];
            for (row, gi) in rows.iter().zip(g) {
                for j in 0..n {
                    chained[j] += self.rho * gi * row[j];
                }
            }
            return Ok(DirectionalForm {
                phi_candidates,
                phi_is_max,
                penalty: PenaltyTerm::MinOfLinear(vec![chained]),
            });
        }

        let dist = self.dist(x)?;
        if dist <= TOL_FEAS {
            if self.alpha > 1.0 {
                // α·distᵅ⁻¹ vanishes: the penalty drops out of the form.
                return Ok(DirectionalForm {
                    phi_candidates,
                    phi_is_max,
                    penalty: PenaltyTerm::Zero,
                });
            }
            // Exact penalty at a feasible point: tangent-cone distance.
            let mut blocks = Vec::with_capacity(self.constraints.len());
            let mut convex = true;
            for (model, set) in &self.constraints {
                let v = model.value(x)?;
                let proj = set.project(&v)?;
                let base = proj.candidates.into_iter().next().expect("feasible block");
                let jacobian = model.jacobian_at(x)?;
                convex = convex && jacobian.is_some() && set.is_convex();
                blocks.push(ConeBlock {
                    model: model.clone(),
                    set: set.clone(),
                    base,
                    jacobian,
                });
            }
            return Ok(DirectionalForm {
                phi_candidates,
                phi_is_max,
                penalty: PenaltyTerm::Cone(ConeTerm {
                    rho: self.rho,
                    x: x.to_vec(),
                    blocks,
                    convex,
                }),
            });
        }

        // Infeasible: candidates α·ρ·distᵅ⁻²·Jᵀ(F(x) − y) over projection
        // candidates y, provided every block is linearizable at x.
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (model, _) in &self.constraints {
            match model.jacobian_at(x)? {
                Some(r) => rows.extend(r),
                None => {
                    return Ok(DirectionalForm {
                        phi_candidates,
                        phi_is_max,
                        penalty: PenaltyTerm::General,
                    })
                }
            }
        }
        let set = self.constraint_set().expect("nonempty constraints");
        let fx = self.stacked_value(x)?;
        let proj = set.project(&fx)?;
        let coef = self.rho * self.alpha * dist.powf(self.alpha - 2.0);
        let n = self.dim();
        let candidates = proj
            .candidates
            .iter()
            .map(|y| {
                let r = vm::sub(&fx, y);
                let mut g = vec![0.0; n];
                for (row, ri) in rows.iter().zip(&r) {
                    for j in 0..n {
                        g[j] += coef * ri * row[j];
                    }
                }
                g
            })
            .collect();
        Ok(DirectionalForm {
            phi_candidates,
            phi_is_max,
            penalty: PenaltyTerm::MinOfLinear(candidates),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{estimate_subderivative, GridSpec};

    fn square_model() -> FuncModel {
        FuncModel::smooth_scalar(1, |x| x[0] * x[0], |x| vec![2.0 * x[0]])
    }

    fn abs_model() -> FuncModel {
        FuncModel::max_of_smooth(
            1,
            vec![
                SmoothPiece::new(|x: &[f64]| x[0], |_| vec![1.0]),
                SmoothPiece::new(|x: &[f64]| -x[0], |_| vec![-1.0]),
            ],
        )
        .unwrap()
    }

    fn min_pieces_model() -> FuncModel {
        // min(x, 2 − x)
        FuncModel::min_of_smooth(
            1,
            vec![
                SmoothPiece::new(|x: &[f64]| x[0], |_| vec![1.0]),
                SmoothPiece::new(|x: &[f64]| 2.0 - x[0], |_| vec![-1.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn values_reduce_over_pieces() {
        assert_eq!(square_model().value_scalar(&[3.0]).unwrap(), 9.0);
        assert_eq!(min_pieces_model().value_scalar(&[3.0]).unwrap(), -1.0);
        assert_eq!(abs_model().value_scalar(&[-2.0]).unwrap(), 2.0);
    }

    #[test]
    fn semiderivative_examples() {
        // |x| at 0 in direction 1.
        assert_eq!(abs_model().semiderivative_scalar(&[0.0], &[1.0]).unwrap(), 1.0);
        // min(x, 2−x) at 1: both pieces active, min(1, −1) = −1.
        assert_eq!(
            min_pieces_model().semiderivative_scalar(&[1.0], &[1.0]).unwrap(),
            -1.0
        );
        // Smooth x² at 3, direction 2.
        assert_eq!(square_model().semiderivative_scalar(&[3.0], &[2.0]).unwrap(), 12.0);
    }

    #[test]
    fn semiderivative_matches_oracle_on_classes() {
        let models = vec![square_model(), abs_model(), min_pieces_model()];
        let grid = GridSpec::default();
        for model in &models {
            for x in [-1.3, 0.0, 0.7, 1.0] {
                for w in [-1.0, 0.4, 1.0] {
                    let analytic = model.semiderivative_scalar(&[x], &[w]).unwrap();
                    let est = estimate_subderivative(
                        |p| model.value_scalar(p).unwrap(),
                        &[x],
                        &[w],
                        &grid,
                    )
                    .unwrap();
                    assert!(
                        (analytic - est.lower).abs() < 1e-3,
                        "{model:?} at x={x}, w={w}: {analytic} vs {}",
                        est.lower
                    );
                }
            }
        }
    }

    #[test]
    fn piece_bounds_on_active_inner_products() {
        let m = min_pieces_model();
        let grads = m.active_gradients(&[1.0]).unwrap();
        assert_eq!(grads.len(), 2);
        let w = [0.3];
        let d = m.semiderivative_scalar(&[1.0], &w).unwrap();
        for g in &grads {
            assert!(d <= vm::dot(g, &w) + 1e-12);
        }
        // The max class bounds from the other side.
        let m = abs_model();
        let grads = m.active_gradients(&[0.0]).unwrap();
        assert_eq!(grads.len(), 2);
        let d = m.semiderivative_scalar(&[0.0], &w).unwrap();
        for g in &grads {
            assert!(d >= vm::dot(g, &w) - 1e-12);
        }
    }

    #[test]
    fn gradient_validation_catches_mismatch() {
        let bad = FuncModel::smooth_scalar(1, |x| x[0] * x[0], |x| vec![3.0 * x[0]]);
        assert!(matches!(
            bad.validate_gradients(16, 1),
            Err(ModelError::GradientMismatch { .. })
        ));
        assert!(square_model().validate_gradients(16, 1).is_ok());
    }

    #[test]
    fn problem_assembly_checks_start_feasibility() {
        let objective = square_model();
        let g = FuncModel::smooth_scalar(1, |x| 1.0 - x[0], |_| vec![-1.0]);
        let problem = Problem::new(
            objective,
            vec![(g, ClosedSet::nonpositive_orthant(1))],
        )
        .unwrap();
        assert!(problem.clone().with_start(vec![1.0]).is_ok());
        assert!(matches!(
            problem.with_start(vec![0.0]),
            Err(ModelError::InfeasibleStart { .. })
        ));
    }

    #[test]
    fn penalty_fn_value_and_subderivative() {
        // f(x) = x + 101·(1 − x)² on the 1-d benchmark.
        let objective = FuncModel::smooth_scalar(1, |x| x[0], |_| vec![1.0]);
        let g = FuncModel::smooth_scalar(1, |x| 1.0 - x[0], |_| vec![-1.0]);
        let problem = Problem::new(objective, vec![(g, ClosedSet::nonpositive_orthant(1))])
            .unwrap()
            .with_start(vec![1.0])
            .unwrap();
        let pf = problem.penalty_fn(2.0, 101.0);
        let x = [0.5];
        assert!((pf.value(&x).unwrap() - (0.5 + 101.0 * 0.25)).abs() < 1e-12);
        // d f(x)(w) = w + 101·2·(1−x)·(−w) = w(1 − 202·0.5).
        let d = pf.subderivative_value(&x, &[1.0]).unwrap();
        assert!((d - (1.0 - 101.0)).abs() < 1e-9, "{d}");
    }

    #[test]
    fn directional_form_classifies_cases() {
        let objective = FuncModel::smooth_scalar(1, |x| x[0], |_| vec![1.0]);
        let g = FuncModel::smooth_scalar(1, |x| 1.0 - x[0], |_| vec![-1.0]);
        let problem =
            Problem::new(objective, vec![(g, ClosedSet::nonpositive_orthant(1))]).unwrap();

        // Infeasible, α = 2: single chained candidate.
        let pf = problem.penalty_fn(2.0, 101.0);
        let form = pf.directional_form(&[0.5]).unwrap();
        match &form.penalty {
            PenaltyTerm::MinOfLinear(c) => {
                assert_eq!(c.len(), 1);
                assert!((c[0][0] + 101.0 * 2.0 * 0.5).abs() < 1e-12);
            }
            other => panic!("expected MinOfLinear, got {other:?}"),
        }

        // Feasible, α = 2: penalty part drops out.
        let form = pf.directional_form(&[2.0]).unwrap();
        assert!(matches!(form.penalty, PenaltyTerm::Zero));

        // Feasible boundary, α = 1: cone term.
        let pf = problem.penalty_fn(1.0, 5.0);
        let form = pf.directional_form(&[1.0]).unwrap();
        match &form.penalty {
            PenaltyTerm::Cone(cone) => {
                assert!(cone.convex);
                // d f(1)(w) = w + 5·max(−w, 0).
                let v = cone.evaluate(&[-1.0]).unwrap();
                assert!((v - 5.0).abs() < 1e-12);
                assert_eq!(cone.evaluate(&[1.0]).unwrap(), 0.0);
            }
            other => panic!("expected Cone, got {other:?}"),
        }
    }

    #[test]
    fn pull_out_assembles_the_lifted_penalty() {
        // g = identity on R, F(x) = x², ρ = 2: lifted value y + 2|x² − y|.
        let g = FuncModel::smooth_scalar(1, |y| y[0], |_| vec![1.0]);
        let f = FuncModel::smooth_scalar(1, |x| x[0] * x[0], |x| vec![2.0 * x[0]]);
        let lifted = pull_out(&g, &f, 2.0).unwrap();
        assert_eq!(lifted.dim(), 2);
        assert!((lifted.value(&[1.0, 0.0]).unwrap() - 2.0).abs() < 1e-12);

        // Exactness on the graph.
        for x in [-1.5, 0.0, 0.3, 2.0] {
            let fx = x * x;
            let v = lifted.value(&[x, fx]).unwrap();
            assert_eq!(v, fx, "graph value at {x}");
        }

        // Semiderivative at (1, 1) in direction (0, 1) against the oracle.
        let d = lifted.subderivative_value(&[1.0, 1.0], &[0.0, 1.0]).unwrap();
        let est = estimate_subderivative(
            |z| z[1] + 2.0 * (z[0] * z[0] - z[1]).abs(),
            &[1.0, 1.0],
            &[0.0, 1.0],
            &GridSpec::default(),
        )
        .unwrap();
        assert!((d - est.lower).abs() < 1e-3, "{d} vs {}", est.lower);
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lp_penalty_fn_value_and_subderivative() {
        // Two inequality components with the cubic separable penalty:
        // value Σ max³(gᵢ, 0), gradient 3·max²(gᵢ, 0) chained through J.
        let objective = FuncModel::smooth_scalar(
            2,
            |x| x[0] * x[0] + x[1] * x[1],
            |x| vec![2.0 * x[0], 2.0 * x[1]],
        );
        let id = FuncModel::smooth(
            2,
            2,
            |x: &[f64]| x.to_vec(),
            |_| vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        );
        let problem =
            Problem::new(objective, vec![(id, ClosedSet::nonpositive_orthant(2))]).unwrap();
        let pf = problem.penalty_fn_lp(3.0, 2.0).unwrap();

        let x = [1.0, 0.5];
        // f = ‖x‖² + 2(1 + 0.125) = 1.25 + 2.25.
        assert!((pf.value(&x).unwrap() - 3.5).abs() < 1e-14);
        // d f(x)(w) = ⟨2x, w⟩ + 2·⟨3(1, 0.25), w⟩.
        let d = pf.subderivative_value(&x, &[1.0, 0.0]).unwrap();
        assert!((d - (2.0 + 6.0)).abs() < 1e-12, "{d}");
        let est = estimate_subderivative(
            |z| pf.value(z).unwrap(),
            &x,
            &[1.0, 0.0],
            &GridSpec::default(),
        )
        .unwrap();
        assert!((d - est.lower).abs() < 1e-3);

        // Feasible points drop the penalty from the form.
        let form = pf.directional_form(&[-1.0, -0.5]).unwrap();
        assert!(matches!(form.penalty, PenaltyTerm::Zero));

        // Non-interval targets are rejected at construction.
        let ball = Problem::new(
            FuncModel::smooth_scalar(1, |x| x[0], |_| vec![1.0]),
            vec![(
                FuncModel::smooth_scalar(1, |x| x[0], |_| vec![1.0]),
                ClosedSet::ball(vec![0.0], 1.0).unwrap(),
            )],
        )
        .unwrap();
        assert!(ball.penalty_fn_lp(3.0, 1.0).is_err());
    }

    #[test]
    fn remap_input_embeds_block() {
        let m = abs_model().remap_input(3, 1);
        assert_eq!(m.dim_in(), 3);
        assert_eq!(m.value_scalar(&[9.0, -2.0, 9.0]).unwrap(), 2.0);
        let g = m.active_gradients(&[9.0, 3.0, 9.0]).unwrap();
        assert_eq!(g, vec![vec![0.0, 1.0, 0.0]]);
    }
}

//! Distance-function penalties and their exact subderivatives.
//!
//! For a closed set `X` write `p(x) = dist(x; X)` and `q = ½p²`. The
//! subderivative of `p` is
//!
//! ```text
//! d p(x)(w) = dist(w; T_X(x))                        if x ∈ X
//! d p(x)(w) = min { ⟨(x − y)/p(x), w⟩ : y ∈ proj_X(x) }   otherwise
//! ```
//!
//! and powers follow by the chain rule: `d(pᵅ)(x) = α·pᵅ⁻¹·d p(x)`. Both
//! branches are captured by [`SubderivativeForm`], a minimum over finite
//! gradient candidates plus optional tangent-cone distance terms; the form
//! stores gradients rather than closures so direction search can reason
//! about the candidate list explicitly.

use thiserror::Error;

use crate::sets::{ClosedSet, SetError, TOL_FEAS};
use crate::vecmath as vm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PenaltyError {
    #[error(transparent)]
    Set(#[from] SetError),
    #[error("operation `{op}` requires form `{expected}`")]
    WrongForm { op: &'static str, expected: &'static str },
    #[error("lp-power penalties need an interval-product set, got kind `{kind}`")]
    NotIntervalProduct { kind: &'static str },
    #[error("invalid penalty: {0}")]
    Invalid(String),
}

/// A penalty built from the distance to a closed set.
#[derive(Debug, Clone)]
pub enum PenaltyKind {
    /// `dist(x; X)` — the exact penalty.
    Exact { set: ClosedSet },
    /// `½ dist²(x; X)` — smooth whenever the projection is unique.
    HalfSquare { set: ClosedSet },
    /// `distᵅ(x; X)`, `α ≥ 1`.
    Power { alpha: f64, set: ClosedSet },
    /// `dist_α(x; X)ᵅ` with the ℓ_α norm, `α > 1`; only interval-product
    /// sets, where the ℓ_α projection is the componentwise clamp.
    LpPower { alpha: f64, set: ClosedSet },
    /// Weighted sum of penalties over consecutive coordinate blocks.
    SeparableSum(Vec<(f64, PenaltyKind)>),
}

/// One tangent-cone distance term of a subderivative form.
#[derive(Debug, Clone)]
pub struct ConePart {
    pub scale: f64,
    /// Start of the coordinate block the term applies to.
    pub offset: usize,
    pub set: ClosedSet,
    /// Point of the set anchoring the tangent cone.
    pub base: Vec<f64>,
}

/// The subderivative as a positively homogeneous function of `w`:
///
/// ```text
/// d(x)(w) = min_j ⟨g_j, w⟩ + Σ_i scale_i · dist(w_block_i ; T(base_i))
/// ```
#[derive(Debug, Clone)]
pub struct SubderivativeForm {
    pub linear_candidates: Vec<Vec<f64>>,
    pub cone_parts: Vec<ConePart>,
}

impl SubderivativeForm {
    pub fn zero(dim: usize) -> Self {
        SubderivativeForm {
            linear_candidates: vec![vec![0.0; dim]],
            cone_parts: Vec::new(),
        }
    }

    pub fn from_candidates(linear_candidates: Vec<Vec<f64>>) -> Self {
        SubderivativeForm {
            linear_candidates,
            cone_parts: Vec::new(),
        }
    }

    pub fn evaluate(&self, w: &[f64]) -> f64 {
        let linear = self
            .linear_candidates
            .iter()
            .map(|g| vm::dot(g, w))
            .fold(f64::INFINITY, f64::min);
        let mut total = linear;
        for part in &self.cone_parts {
            let block = &w[part.offset..part.offset + part.set.dim()];
            let d = part
                .set
                .tangent_dist(&part.base, block)
                .expect("cone part anchored off its set");
            total += part.scale * d;
        }
        total
    }

    /// Merges `other`, acting on the coordinate block at `offset`, into a
    /// form over the ambient dimension. Candidate lists combine by a
    /// cartesian sum: the blocks are disjoint, so the minima distribute.
    fn absorb_block(&mut self, other: SubderivativeForm, offset: usize, block_dim: usize, dim: usize) {
        let mut combined =
            Vec::with_capacity(self.linear_candidates.len() * other.linear_candidates.len());
        for head in &self.linear_candidates {
            for g in &other.linear_candidates {
                debug_assert_eq!(g.len(), block_dim);
                let mut c = head.clone();
                c.resize(dim, 0.0);
                for (i, gi) in g.iter().enumerate() {
                    c[offset + i] += gi;
                }
                combined.push(c);
            }
        }
        self.linear_candidates = combined;
        self.cone_parts.extend(other.cone_parts.into_iter().map(|mut p| {
            p.offset += offset;
            p
        }));
    }
}

impl PenaltyKind {
    pub fn exact(set: ClosedSet) -> Self {
        PenaltyKind::Exact { set }
    }

    pub fn half_square(set: ClosedSet) -> Self {
        PenaltyKind::HalfSquare { set }
    }

    pub fn power(alpha: f64, set: ClosedSet) -> Result<Self, PenaltyError> {
        if !(alpha >= 1.0) {
            return Err(PenaltyError::Invalid(format!("power needs α ≥ 1, got {alpha}")));
        }
        Ok(PenaltyKind::Power { alpha, set })
    }

    pub fn lp_power(alpha: f64, set: ClosedSet) -> Result<Self, PenaltyError> {
        if !(alpha > 1.0) {
            return Err(PenaltyError::Invalid(format!("lp-power needs α > 1, got {alpha}")));
        }
        if interval_product(&set).is_none() {
            return Err(PenaltyError::NotIntervalProduct {
                kind: set.kind_name(),
            });
        }
        Ok(PenaltyKind::LpPower { alpha, set })
    }

    pub fn separable_sum(terms: Vec<(f64, PenaltyKind)>) -> Result<Self, PenaltyError> {
        if terms.is_empty() {
            return Err(PenaltyError::Invalid("separable sum needs at least one term".into()));
        }
        if terms.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) {
            return Err(PenaltyError::Invalid("separable-sum weights must be ≥ 0".into()));
        }
        Ok(PenaltyKind::SeparableSum(terms))
    }

    pub fn dim(&self) -> usize {
        match self {
            PenaltyKind::Exact { set }
            | PenaltyKind::HalfSquare { set }
            | PenaltyKind::Power { set, .. }
            | PenaltyKind::LpPower { set, .. } => set.dim(),
            PenaltyKind::SeparableSum(terms) => terms.iter().map(|(_, t)| t.dim()).sum(),
        }
    }

    /// Penalty value at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64, PenaltyError> {
        match self {
            PenaltyKind::Exact { set } => Ok(set.distance(x)?),
            PenaltyKind::HalfSquare { set } => {
                let d = set.distance(x)?;
                Ok(0.5 * d * d)
            }
            PenaltyKind::Power { alpha, set } => Ok(set.distance(x)?.powf(*alpha)),
            PenaltyKind::LpPower { alpha, set } => {
                let intervals = interval_product(set).expect("validated at construction");
                Ok(x.iter()
                    .zip(&intervals)
                    .map(|(&v, iv)| (v - iv.clamp(v)).abs().powf(*alpha))
                    .sum())
            }
            PenaltyKind::SeparableSum(terms) => {
                let mut total = 0.0;
                let mut off = 0;
                for (weight, term) in terms {
                    let d = term.dim();
                    total += weight * term.eval(&x[off..off + d])?;
                    off += d;
                }
                Ok(total)
            }
        }
    }

    /// The exact subderivative of the penalty at `x`.
    pub fn subderivative(&self, x: &[f64]) -> Result<SubderivativeForm, PenaltyError> {
        match self {
            PenaltyKind::Exact { set } => power_subderivative(set, x, 1.0),
            PenaltyKind::HalfSquare { set } => {
                // ½p² has candidates x − y everywhere (zero when feasible).
                let proj = set.project(x)?;
                Ok(SubderivativeForm::from_candidates(
                    proj.candidates.iter().map(|y| vm::sub(x, y)).collect(),
                ))
            }
            PenaltyKind::Power { alpha, set } => power_subderivative(set, x, *alpha),
            PenaltyKind::LpPower { alpha, set } => {
                let intervals = interval_product(set).expect("validated at construction");
                let grad: Vec<f64> = x
                    .iter()
                    .zip(&intervals)
                    .map(|(&v, iv)| {
                        let d = v - iv.clamp(v);
                        if d == 0.0 {
                            0.0
                        } else {
                            alpha * d.abs().powf(alpha - 1.0) * d.signum()
                        }
                    })
                    .collect();
                Ok(SubderivativeForm::from_candidates(vec![grad]))
            }
            PenaltyKind::SeparableSum(terms) => {
                let dim = self.dim();
                let mut form = SubderivativeForm::from_candidates(vec![Vec::new()]);
                let mut off = 0;
                for (weight, term) in terms {
                    let d = term.dim();
                    let mut block = term.subderivative(&x[off..off + d])?;
                    for g in &mut block.linear_candidates {
                        for gi in g.iter_mut() {
                            *gi *= weight;
                        }
                    }
                    for p in &mut block.cone_parts {
                        p.scale *= weight;
                    }
                    form.absorb_block(block, off, d, dim);
                    off += d;
                }
                Ok(form)
            }
        }
    }

    /// `∇q(x) = x − proj_X(x)` when the projection is unique; absent when
    /// the candidate list has more than one element.
    pub fn gradient_if_unique(&self, x: &[f64]) -> Result<Option<Vec<f64>>, PenaltyError> {
        let PenaltyKind::HalfSquare { set } = self else {
            return Err(PenaltyError::WrongForm {
                op: "gradient_if_unique",
                expected: "half-square",
            });
        };
        let proj = set.project(x)?;
        Ok(proj.unique().map(|y| vm::sub(x, y)))
    }

    /// `q(y) − q(x) − dq(x)(y − x) − (c/2)·‖y − x‖²` with `c = 1` for a
    /// single half-square penalty and `c = k` for a separable sum of `k`
    /// half-square terms. The result is never positive.
    pub fn descent_gap(&self, x: &[f64], y: &[f64]) -> Result<f64, PenaltyError> {
        let c = match self {
            PenaltyKind::HalfSquare { .. } => 1.0,
            PenaltyKind::SeparableSum(terms) => {
                if terms
                    .iter()
                    .any(|(_, t)| !matches!(t, PenaltyKind::HalfSquare { .. }))
                {
                    return Err(PenaltyError::WrongForm {
                        op: "descent_gap",
                        expected: "separable sum of half-square terms",
                    });
                }
                terms.len() as f64
            }
            _ => {
                return Err(PenaltyError::WrongForm {
                    op: "descent_gap",
                    expected: "half-square",
                })
            }
        };
        let step = vm::sub(y, x);
        let dq = self.subderivative(x)?.evaluate(&step);
        let gap = self.eval(y)? - self.eval(x)? - dq - 0.5 * c * vm::dot(&step, &step);
        Ok(gap)
    }
}

/// Subderivative of `pᵅ` (`α = 1` is the exact penalty itself).
fn power_subderivative(
    set: &ClosedSet,
    x: &[f64],
    alpha: f64,
) -> Result<SubderivativeForm, PenaltyError> {
    let dist = set.distance(x)?;
    if dist <= TOL_FEAS {
        if alpha > 1.0 {
            // The chain-rule factor α·pᵅ⁻¹ vanishes at feasible points.
            return Ok(SubderivativeForm::zero(set.dim()));
        }
        let proj = set.project(x)?;
        let base = proj.candidates.into_iter().next().expect("projection of a feasible point");
        return Ok(SubderivativeForm {
            linear_candidates: vec![vec![0.0; set.dim()]],
            cone_parts: vec![ConePart {
                scale: 1.0,
                offset: 0,
                set: set.clone(),
                base,
            }],
        });
    }
    let proj = set.project(x)?;
    let coef = alpha * dist.powf(alpha - 2.0);
    Ok(SubderivativeForm::from_candidates(
        proj.candidates
            .iter()
            .map(|y| vm::scale(&vm::sub(x, y), coef))
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Decomposes a set into a product of one-dimensional intervals, when it
/// is one; the componentwise clamp is then the projection in every ℓ_α
/// norm.
fn interval_product(set: &ClosedSet) -> Option<Vec<Interval>> {
    match set {
        ClosedSet::NonpositiveOrthant(d) => Some(vec![
            Interval {
                lo: f64::NEG_INFINITY,
                hi: 0.0,
            };
            *d
        ]),
        ClosedSet::Zeros(d) => Some(vec![Interval { lo: 0.0, hi: 0.0 }; *d]),
        ClosedSet::Box { lower, upper } => Some(
            lower
                .iter()
                .zip(upper)
                .map(|(&lo, &hi)| Interval { lo, hi })
                .collect(),
        ),
        ClosedSet::Product(members) => {
            let mut out = Vec::new();
            for m in members {
                out.extend(interval_product(m)?);
            }
            Some(out)
        }
        _ => None,
    }
}

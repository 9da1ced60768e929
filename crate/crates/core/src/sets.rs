//! Closed target sets with projection, distance, tangent-cone and
//! normal-cone oracles.
//!
//! Every supported set is closed and geometrically derivable, so the
//! distance function `dist(·; X)` is semi-differentiable everywhere and the
//! penalty machinery built on top of these oracles is exact. Projections
//! are reported as an explicit finite candidate list: the subderivative of
//! the distance function takes a minimum over *all* projection points, so
//! a kind whose projection set can be infinite (the center of a sphere in
//! dimension ≥ 2) raises [`SetError::NonFiniteProjection`] instead of
//! silently sampling.

use rand::Rng;
use thiserror::Error;

use crate::vecmath as vm;

/// Absolute tolerance on candidate distances (ties, projection checks).
pub const TOL_PROJ: f64 = 1e-10;
/// Absolute tolerance for membership tests (`x ∈ X`).
pub const TOL_FEAS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetError {
    #[error("dimension mismatch: set has dimension {expected}, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point has non-finite coordinates")]
    NonFinitePoint,
    #[error("projection set is not finite (kind `{kind}`)")]
    NonFiniteProjection { kind: &'static str },
    #[error("point is not on the set (distance {dist:.3e})")]
    PointNotOnSet { dist: f64 },
    #[error("no tangent-cone formula for kind `{kind}`")]
    UnsupportedTangent { kind: &'static str },
    #[error("operation `{op}` not supported for kind `{kind}`")]
    UnsupportedKind { op: &'static str, kind: &'static str },
    #[error("invalid set: {0}")]
    InvalidSet(String),
}

/// A closed subset of Euclidean space with computable oracles.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedSet {
    /// `{x : x_i ≤ 0}`
    NonpositiveOrthant(usize),
    /// `{0}^d`
    Zeros(usize),
    /// `{x : lower ≤ x ≤ upper}` componentwise
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `{x : ‖x − center‖ ≤ radius}`
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x : ‖x − center‖ = radius}`
    Sphere { center: Vec<f64>, radius: f64 },
    /// A finite list of points.
    FiniteSet(Vec<Vec<f64>>),
    /// `{(z, t) ∈ R^{d−1} × R : ‖z‖ ≤ t}`
    Lorentz(usize),
    /// Cartesian product of member sets.
    Product(Vec<ClosedSet>),
    /// Union of convex member sets (all of the same dimension).
    Union(Vec<ClosedSet>),
}

/// All Euclidean projection candidates of a point together with the
/// attained distance; each candidate `y` satisfies `‖x − y‖ = distance`
/// within [`TOL_PROJ`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub candidates: Vec<Vec<f64>>,
    pub distance: f64,
}

impl ProjectionResult {
    /// The unique candidate, if there is exactly one.
    pub fn unique(&self) -> Option<&[f64]> {
        if self.candidates.len() == 1 {
            Some(&self.candidates[0])
        } else {
            None
        }
    }
}

impl ClosedSet {
    pub fn nonpositive_orthant(dim: usize) -> Self {
        ClosedSet::NonpositiveOrthant(dim)
    }

    pub fn zeros(dim: usize) -> Self {
        ClosedSet::Zeros(dim)
    }

    pub fn box_set(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SetError> {
        let s = ClosedSet::Box { lower, upper };
        s.validate()?;
        Ok(s)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, SetError> {
        let s = ClosedSet::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn sphere(center: Vec<f64>, radius: f64) -> Result<Self, SetError> {
        let s = ClosedSet::Sphere { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn finite(points: Vec<Vec<f64>>) -> Result<Self, SetError> {
        let s = ClosedSet::FiniteSet(points);
        s.validate()?;
        Ok(s)
    }

    pub fn lorentz(dim: usize) -> Self {
        ClosedSet::Lorentz(dim)
    }

    pub fn product(members: Vec<ClosedSet>) -> Result<Self, SetError> {
        let s = ClosedSet::Product(members);
        s.validate()?;
        Ok(s)
    }

    pub fn union(members: Vec<ClosedSet>) -> Result<Self, SetError> {
        let s = ClosedSet::Union(members);
        s.validate()?;
        Ok(s)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ClosedSet::NonpositiveOrthant(_) => "orthant-",
            ClosedSet::Zeros(_) => "zeros",
            ClosedSet::Box { .. } => "box",
            ClosedSet::Ball { .. } => "ball",
            ClosedSet::Sphere { .. } => "sphere",
            ClosedSet::FiniteSet(_) => "finite",
            ClosedSet::Lorentz(_) => "lorentz",
            ClosedSet::Product(_) => "product",
            ClosedSet::Union(_) => "union",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ClosedSet::NonpositiveOrthant(d) | ClosedSet::Zeros(d) | ClosedSet::Lorentz(d) => *d,
            ClosedSet::Box { lower, .. } => lower.len(),
            ClosedSet::Ball { center, .. } | ClosedSet::Sphere { center, .. } => center.len(),
            ClosedSet::FiniteSet(points) => points[0].len(),
            ClosedSet::Product(members) => members.iter().map(|m| m.dim()).sum(),
            ClosedSet::Union(members) => members[0].dim(),
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            ClosedSet::NonpositiveOrthant(_)
            | ClosedSet::Zeros(_)
            | ClosedSet::Box { .. }
            | ClosedSet::Ball { .. }
            | ClosedSet::Lorentz(_) => true,
            ClosedSet::Sphere { radius, .. } => *radius == 0.0,
            ClosedSet::FiniteSet(points) => points.len() == 1,
            ClosedSet::Product(members) => members.iter().all(|m| m.is_convex()),
            ClosedSet::Union(_) => false,
        }
    }

    pub fn validate(&self) -> Result<(), SetError> {
        match self {
            ClosedSet::NonpositiveOrthant(_) | ClosedSet::Zeros(_) => Ok(()),
            ClosedSet::Lorentz(d) => {
                if *d == 0 {
                    Err(SetError::InvalidSet("lorentz cone needs dimension ≥ 1".into()))
                } else {
                    Ok(())
                }
            }
            ClosedSet::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(SetError::InvalidSet("box bound lengths differ".into()));
                }
                if !vm::is_finite(lower) || !vm::is_finite(upper) {
                    return Err(SetError::InvalidSet("box bounds must be finite".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(SetError::InvalidSet("box needs lower ≤ upper".into()));
                }
                Ok(())
            }
            ClosedSet::Ball { center, radius } | ClosedSet::Sphere { center, radius } => {
                if !vm::is_finite(center) || !radius.is_finite() {
                    return Err(SetError::InvalidSet("center/radius must be finite".into()));
                }
                if *radius < 0.0 {
                    return Err(SetError::InvalidSet("radius must be nonnegative".into()));
                }
                Ok(())
            }
            ClosedSet::FiniteSet(points) => {
                if points.is_empty() {
                    return Err(SetError::InvalidSet("finite set needs at least one point".into()));
                }
                let d = points[0].len();
                if points.iter().any(|p| p.len() != d || !vm::is_finite(p)) {
                    return Err(SetError::InvalidSet(
                        "finite-set points must be finite and of equal dimension".into(),
                    ));
                }
                Ok(())
            }
            ClosedSet::Product(members) => {
                if members.is_empty() {
                    return Err(SetError::InvalidSet("product needs at least one member".into()));
                }
                members.iter().try_for_each(|m| m.validate())
            }
            ClosedSet::Union(members) => {
                if members.is_empty() {
                    return Err(SetError::InvalidSet("union needs at least one member".into()));
                }
                let d = members[0].dim();
                for m in members {
                    m.validate()?;
                    if m.dim() != d {
                        return Err(SetError::InvalidSet(
                            "union members must share one dimension".into(),
                        ));
                    }
                    if !m.is_convex() {
                        return Err(SetError::InvalidSet("union members must be convex".into()));
                    }
                }
                Ok(())
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), SetError> {
        if x.len() != self.dim() {
            return Err(SetError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !vm::is_finite(x) {
            return Err(SetError::NonFinitePoint);
        }
        Ok(())
    }

    /// Point-to-set Euclidean distance. Total for every kind, including
    /// those whose projection set is infinite.
    pub fn distance(&self, x: &[f64]) -> Result<f64, SetError> {
        self.check_dim(x)?;
        Ok(self.distance_unchecked(x))
    }

    fn distance_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            ClosedSet::NonpositiveOrthant(_) => x
                .iter()
                .map(|&v| v.max(0.0).powi(2))
                .sum::<f64>()
                .sqrt(),
            ClosedSet::Zeros(_) => vm::norm(x),
            ClosedSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&v, (&l, &u))| (v - v.clamp(l, u)).powi(2))
                .sum::<f64>()
                .sqrt(),
            ClosedSet::Ball { center, radius } => (vm::dist(x, center) - radius).max(0.0),
            ClosedSet::Sphere { center, radius } => (vm::dist(x, center) - radius).abs(),
            ClosedSet::FiniteSet(points) => points
                .iter()
                .map(|p| vm::dist(x, p))
                .fold(f64::INFINITY, f64::min),
            ClosedSet::Lorentz(_) => {
                let y = lorentz_project(x);
                vm::dist(x, &y)
            }
            ClosedSet::Product(members) => {
                let mut acc = 0.0;
                let mut off = 0;
                for m in members {
                    let d = m.dim();
                    acc += m.distance_unchecked(&x[off..off + d]).powi(2);
                    off += d;
                }
                acc.sqrt()
            }
            ClosedSet::Union(members) => members
                .iter()
                .map(|m| m.distance_unchecked(x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Membership test within `tol` on the distance.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool, SetError> {
        Ok(self.distance(x)? <= tol)
    }

    /// All Euclidean projection candidates and the distance. For convex
    /// kinds the candidate list has exactly one element.
    pub fn project(&self, x: &[f64]) -> Result<ProjectionResult, SetError> {
        self.check_dim(x)?;
        self.project_unchecked(x)
    }

    fn project_unchecked(&self, x: &[f64]) -> Result<ProjectionResult, SetError> {
        match self {
            ClosedSet::NonpositiveOrthant(_) => {
                let y: Vec<f64> = x.iter().map(|&v| v.min(0.0)).collect();
                Ok(single(x, y))
            }
            ClosedSet::Zeros(d) => Ok(single(x, vec![0.0; *d])),
            ClosedSet::Box { lower, upper } => {
                let y: Vec<f64> = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(&v, (&l, &u))| v.clamp(l, u))
                    .collect();
                Ok(single(x, y))
            }
            ClosedSet::Ball { center, radius } => {
                let r = vm::dist(x, center);
                if r <= *radius {
                    Ok(single(x, x.to_vec()))
                } else {
                    let dir = vm::scale(&vm::sub(x, center), 1.0 / r);
                    Ok(single(x, vm::axpy(center, *radius, &dir)))
                }
            }
            ClosedSet::Sphere { center, radius } => {
                let r = vm::dist(x, center);
                if r <= TOL_PROJ && *radius > 0.0 {
                    // At the center every sphere point is a projection. In
                    // dimension one that is still a finite pair; above it
                    // the candidate set is a continuum.
                    if center.len() == 1 {
                        return Ok(ProjectionResult {
                            candidates: vec![vec![center[0] - radius], vec![center[0] + radius]],
                            distance: *radius,
                        });
                    }
                    return Err(SetError::NonFiniteProjection { kind: "sphere" });
                }
                if *radius == 0.0 {
                    return Ok(single(x, center.clone()));
                }
                let dir = vm::scale(&vm::sub(x, center), 1.0 / r);
                Ok(single(x, vm::axpy(center, *radius, &dir)))
            }
            ClosedSet::FiniteSet(points) => {
                let dists: Vec<f64> = points.iter().map(|p| vm::dist(x, p)).collect();
                let dmin = dists.iter().copied().fold(f64::INFINITY, f64::min);
                let candidates = points
                    .iter()
                    .zip(&dists)
                    .filter(|(_, &d)| d <= dmin + TOL_PROJ)
                    .map(|(p, _)| p.clone())
                    .collect();
                Ok(ProjectionResult {
                    candidates,
                    distance: dmin,
                })
            }
            ClosedSet::Lorentz(_) => {
                let y = lorentz_project(x);
                Ok(single(x, y))
            }
            ClosedSet::Product(members) => {
                let mut block_candidates: Vec<Vec<Vec<f64>>> = Vec::with_capacity(members.len());
                let mut acc = 0.0;
                let mut off = 0;
                for m in members {
                    let d = m.dim();
                    let r = m.project_unchecked(&x[off..off + d])?;
                    acc += r.distance * r.distance;
                    block_candidates.push(r.candidates);
                    off += d;
                }
                // Any mix of per-block minimizers attains the same total
                // distance, so the exhaustive list is a cartesian product.
                let mut combined: Vec<Vec<f64>> = vec![Vec::new()];
                for block in &block_candidates {
                    let mut next = Vec::with_capacity(combined.len() * block.len());
                    for head in &combined {
                        for tail in block {
                            let mut c = head.clone();
                            c.extend_from_slice(tail);
                            next.push(c);
                        }
                    }
                    combined = next;
                }
                Ok(ProjectionResult {
                    candidates: combined,
                    distance: acc.sqrt(),
                })
            }
            ClosedSet::Union(members) => {
                let results: Vec<ProjectionResult> = members
                    .iter()
                    .map(|m| m.project_unchecked(x))
                    .collect::<Result<_, _>>()?;
                let dmin = results
                    .iter()
                    .map(|r| r.distance)
                    .fold(f64::INFINITY, f64::min);
                let mut candidates = Vec::new();
                for r in results {
                    if r.distance <= dmin + TOL_PROJ {
                        candidates.extend(r.candidates);
                    }
                }
                Ok(ProjectionResult {
                    candidates,
                    distance: dmin,
                })
            }
        }
    }

    /// Projection of `w` onto the tangent cone `T_X(x)` at a point of the
    /// set. For a union the cone is the union of the member cones over the
    /// members containing `x`.
    pub fn tangent_project(&self, x_on_set: &[f64], w: &[f64]) -> Result<Vec<f64>, SetError> {
        self.check_dim(x_on_set)?;
        self.check_dim(w)?;
        let d = self.distance_unchecked(x_on_set);
        if d > TOL_FEAS {
            return Err(SetError::PointNotOnSet { dist: d });
        }
        self.tangent_project_unchecked(x_on_set, w)
    }

    fn tangent_project_unchecked(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>, SetError> {
        match self {
            ClosedSet::NonpositiveOrthant(_) => Ok(x
                .iter()
                .zip(w)
                .map(|(&xi, &wi)| if xi.abs() <= TOL_FEAS { wi.min(0.0) } else { wi })
                .collect()),
            ClosedSet::Zeros(d) => Ok(vec![0.0; *d]),
            ClosedSet::Box { lower, upper } => Ok(x
                .iter()
                .zip(w)
                .zip(lower.iter().zip(upper))
                .map(|((&xi, &wi), (&l, &u))| {
                    let at_lower = (xi - l).abs() <= TOL_FEAS;
                    let at_upper = (xi - u).abs() <= TOL_FEAS;
                    match (at_lower, at_upper) {
                        (true, true) => 0.0,
                        (true, false) => wi.max(0.0),
                        (false, true) => wi.min(0.0),
                        (false, false) => wi,
                    }
                })
                .collect()),
            ClosedSet::Ball { center, radius } => {
                if *radius <= TOL_FEAS {
                    return Ok(vec![0.0; center.len()]);
                }
                let r = vm::dist(x, center);
                if r < radius - TOL_FEAS {
                    Ok(w.to_vec())
                } else {
                    // Boundary: halfspace {w : ⟨w, n⟩ ≤ 0} with outward
                    // normal n = (x − c)/‖x − c‖.
                    let n = vm::normalized(&vm::sub(x, center));
                    let t = vm::dot(w, &n).max(0.0);
                    Ok(vm::axpy(w, -t, &n))
                }
            }
            ClosedSet::Sphere { center, radius } => {
                if *radius <= TOL_FEAS {
                    return Ok(vec![0.0; center.len()]);
                }
                // Tangent hyperplane {w : ⟨w, n⟩ = 0}.
                let n = vm::normalized(&vm::sub(x, center));
                let t = vm::dot(w, &n);
                Ok(vm::axpy(w, -t, &n))
            }
            ClosedSet::FiniteSet(_) => Ok(vec![0.0; self.dim()]),
            ClosedSet::Lorentz(d) => {
                let (z, t) = x.split_at(d - 1);
                let s = vm::norm(z);
                if s < t[0] - TOL_FEAS {
                    return Ok(w.to_vec()); // interior
                }
                if t[0].abs() <= TOL_FEAS && s <= TOL_FEAS {
                    return Ok(lorentz_project(w)); // apex: T = the cone itself
                }
                // Smooth boundary point ‖z‖ = t > 0: halfspace
                // {(u, v) : ⟨u, z/s⟩ − v ≤ 0} with normal a = (z/s, −1).
                let mut a: Vec<f64> = z.iter().map(|&zi| zi / s).collect();
                a.push(-1.0);
                let coef = vm::dot(w, &a).max(0.0) / vm::dot(&a, &a);
                Ok(vm::axpy(w, -coef, &a))
            }
            ClosedSet::Product(members) => {
                let mut out = Vec::with_capacity(self.dim());
                let mut off = 0;
                for m in members {
                    let d = m.dim();
                    out.extend(m.tangent_project_unchecked(&x[off..off + d], &w[off..off + d])?);
                    off += d;
                }
                Ok(out)
            }
            ClosedSet::Union(members) => {
                let mut best: Option<(f64, Vec<f64>)> = None;
                for m in members {
                    if m.distance_unchecked(x) <= TOL_FEAS {
                        let p = m.tangent_project_unchecked(x, w)?;
                        let d = vm::dist(w, &p);
                        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                            best = Some((d, p));
                        }
                    }
                }
                best.map(|(_, p)| p)
                    .ok_or(SetError::PointNotOnSet { dist: f64::NAN })
            }
        }
    }

    /// Euclidean distance of `w` to the tangent cone `T_X(x)`.
    pub fn tangent_dist(&self, x_on_set: &[f64], w: &[f64]) -> Result<f64, SetError> {
        let p = self.tangent_project(x_on_set, w)?;
        Ok(vm::dist(w, &p))
    }

    /// Distance of `lambda` to the normal cone `N_X(y)` at a point of a
    /// convex set; zero exactly when `lambda` is a valid normal.
    pub fn normal_cone_residual(&self, y_on_set: &[f64], lambda: &[f64]) -> Result<f64, SetError> {
        self.check_dim(y_on_set)?;
        self.check_dim(lambda)?;
        if !self.is_convex() {
            return Err(SetError::UnsupportedKind {
                op: "normal_cone_residual",
                kind: self.kind_name(),
            });
        }
        let d = self.distance_unchecked(y_on_set);
        if d > TOL_FEAS {
            return Err(SetError::PointNotOnSet { dist: d });
        }
        self.normal_residual_unchecked(y_on_set, lambda)
    }

    fn normal_residual_unchecked(&self, y: &[f64], lambda: &[f64]) -> Result<f64, SetError> {
        match self {
            ClosedSet::NonpositiveOrthant(_) => Ok(y
                .iter()
                .zip(lambda)
                .map(|(&yi, &li)| {
                    if yi.abs() <= TOL_FEAS {
                        li.min(0.0).powi(2) // N_i = R₊ at the boundary
                    } else {
                        li * li // N_i = {0} in the interior
                    }
                })
                .sum::<f64>()
                .sqrt()),
            ClosedSet::Zeros(_) => Ok(0.0),
            ClosedSet::Box { lower, upper } => Ok(y
                .iter()
                .zip(lambda)
                .zip(lower.iter().zip(upper))
                .map(|((&yi, &li), (&l, &u))| {
                    let at_lower = (yi - l).abs() <= TOL_FEAS;
                    let at_upper = (yi - u).abs() <= TOL_FEAS;
                    match (at_lower, at_upper) {
                        (true, true) => 0.0,               // N_i = R
                        (true, false) => li.max(0.0).powi(2), // N_i = R₋
                        (false, true) => li.min(0.0).powi(2), // N_i = R₊
                        (false, false) => li * li,            // N_i = {0}
                    }
                })
                .sum::<f64>()
                .sqrt()),
            ClosedSet::Ball { center, radius } => {
                if *radius <= TOL_FEAS {
                    return Ok(0.0); // a point: N = R^d
                }
                let r = vm::dist(y, center);
                if r < radius - TOL_FEAS {
                    Ok(vm::norm(lambda)) // interior: N = {0}
                } else {
                    Ok(dist_to_ray(lambda, &vm::normalized(&vm::sub(y, center))))
                }
            }
            // Convex only in the degenerate single-point case: N = R^d.
            ClosedSet::Sphere { .. } | ClosedSet::FiniteSet(_) => Ok(0.0),
            ClosedSet::Lorentz(d) => {
                let (z, t) = y.split_at(d - 1);
                let s = vm::norm(z);
                if t[0].abs() <= TOL_FEAS && s <= TOL_FEAS {
                    // Apex: N = −L (the cone is self-dual).
                    let neg: Vec<f64> = lambda.iter().map(|v| -v).collect();
                    let p = lorentz_project(&neg);
                    return Ok(vm::dist(&neg, &p));
                }
                if s < t[0] - TOL_FEAS {
                    return Ok(vm::norm(lambda)); // interior
                }
                // Smooth boundary: ray along (z/s, −1).
                let mut a: Vec<f64> = z.iter().map(|&zi| zi / s).collect();
                a.push(-1.0);
                Ok(dist_to_ray(lambda, &vm::normalized(&a)))
            }
            ClosedSet::Product(members) => {
                let mut acc = 0.0;
                let mut off = 0;
                for m in members {
                    let d = m.dim();
                    acc += m
                        .normal_residual_unchecked(&y[off..off + d], &lambda[off..off + d])?
                        .powi(2);
                    off += d;
                }
                Ok(acc.sqrt())
            }
            ClosedSet::Union(_) => Err(SetError::UnsupportedKind {
                op: "normal_cone_residual",
                kind: "union",
            }),
        }
    }

    /// Draws a point of the set; used by sampled invariants and tests.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            ClosedSet::NonpositiveOrthant(d) => {
                (0..*d).map(|_| -gauss(rng).abs()).collect()
            }
            ClosedSet::Zeros(d) => vec![0.0; *d],
            ClosedSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| {
                    if l == u {
                        l
                    } else {
                        rng.gen_range(l..=u)
                    }
                })
                .collect(),
            ClosedSet::Ball { center, radius } => {
                let dir = gauss_unit(rng, center.len());
                let u: f64 = rng.gen_range(0.0..=1.0);
                let r = radius * u.powf(1.0 / center.len().max(1) as f64);
                vm::axpy(center, r, &dir)
            }
            ClosedSet::Sphere { center, radius } => {
                let dir = gauss_unit(rng, center.len());
                vm::axpy(center, *radius, &dir)
            }
            ClosedSet::FiniteSet(points) => points[rng.gen_range(0..points.len())].clone(),
            ClosedSet::Lorentz(d) => {
                let z: Vec<f64> = (0..d - 1).map(|_| gauss(rng)).collect();
                let t = vm::norm(&z) + gauss(rng).abs();
                let mut out = z;
                out.push(t);
                out
            }
            ClosedSet::Product(members) => {
                let mut out = Vec::with_capacity(self.dim());
                for m in members {
                    out.extend(m.sample_point(rng));
                }
                out
            }
            ClosedSet::Union(members) => {
                members[rng.gen_range(0..members.len())].sample_point(rng)
            }
        }
    }
}

fn single(x: &[f64], y: Vec<f64>) -> ProjectionResult {
    let distance = vm::dist(x, &y);
    ProjectionResult {
        candidates: vec![y],
        distance,
    }
}

/// Projection onto `{(z, t) : ‖z‖ ≤ t}`.
fn lorentz_project(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let (z, t) = x.split_at(d - 1);
    let t = t[0];
    let s = vm::norm(z);
    if s <= t {
        x.to_vec()
    } else if s <= -t {
        vec![0.0; d]
    } else {
        let coef = (s + t) / (2.0 * s);
        let mut y: Vec<f64> = z.iter().map(|&zi| coef * zi).collect();
        y.push((s + t) / 2.0);
        y
    }
}

/// Distance of `v` to the ray `{t·dir : t ≥ 0}` with `‖dir‖ = 1`.
fn dist_to_ray(v: &[f64], dir: &[f64]) -> f64 {
    let t = vm::dot(v, dir).max(0.0);
    vm::dist(v, &vm::scale(dir, t))
}

/// Standard normal draw (Box-Muller); enough for the samplers here.
pub fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform draw from the unit sphere.
pub fn gauss_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gauss(rng)).collect();
        let n = vm::norm(&v);
        if n > 1e-12 {
            return vm::scale(&v, 1.0 / n);
        }
    }
}

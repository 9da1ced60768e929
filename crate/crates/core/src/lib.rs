//! Constrained optimization via exact distance penalties.
//!
//! The toolkit solves problems of the form
//!
//! ```text
//! minimize φ(x)   subject to   F(x) ∈ X,   X = X₁ × … × X_k
//! ```
//!
//! by merging the constraints into the unconstrained penalized function
//!
//! ```text
//! f_{α,ρ}(x) = φ(x) + ρ · distᵅ(F(x); X)
//! ```
//!
//! and driving a first-order descent scheme on the subderivative of
//! `f_{α,ρ}`. The pieces are:
//!
//! - [`sets`]: closed target sets with projection, distance, tangent-cone
//!   and normal-cone oracles,
//! - [`penalty`]: distance penalties (exact, half-squared, powers,
//!   separable sums) with exact subderivative forms,
//! - [`model`]: objective/constraint function models (smooth,
//!   min-of-smooth, max-of-smooth) and problem assembly,
//! - [`solver`]: the subderivative descent method with Armijo
//!   backtracking and the penalty-parameter selection rule,
//! - [`stationarity`]: ε-approximate stationarity certificates,
//!   conic/KKT residuals and approximate Lagrange multipliers,
//! - [`oracle`]: independent brute-force estimators used to validate the
//!   analytic machinery.

pub mod model;
pub mod oracle;
pub mod penalty;
pub mod sets;
pub mod solver;
pub mod stationarity;
pub mod vecmath;

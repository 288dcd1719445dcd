//! Solver library for cone-constrained homogeneous stochastic control problems.
//!
//! The controlled state is scalar, the control lives in a closed convex cone
//! `Γ ⊆ ℝᵐ`, and all coefficients are positively homogeneous (degree 1 for
//! drift/volatility, degree `p` for the costs). For such problems the value
//! function splits as `P₁,₀(x⁺)ᵖ + P₂,₀(x⁻)ᵖ` where `P₁` and `P₂` solve two
//! one-dimensional backward equations whose drivers are cone infima, and the
//! optimal control is the piecewise-linear feedback `u*(t,X) = v̂₁X⁺ + v̂₂X⁻`.
//!
//! The crate provides:
//! - [`model`]: the homogeneous system encoded by its restrictions at `x = ±1`;
//! - [`cone`]: cone membership and Euclidean projection;
//! - [`optim`]: multistart projected gradient minimization over a cone;
//! - [`driver`]: the branch drivers `𝒢₁`, `𝒢₂`, their infima and argmins;
//! - [`bsde`]: backward solvers (deterministic RK4 mode and binomial tree mode),
//!   the linear comparison equation and an independent Riccati oracle;
//! - [`control`]: feedback construction, exact forward simulation, Monte Carlo
//!   cost estimation and competitor evaluation;
//! - [`config`] / [`export`]: file formats for model specs, experiments and
//!   result tables;
//! - [`battery`]: the built-in regression model battery.

pub mod battery;
pub mod bsde;
pub mod cone;
pub mod config;
pub mod control;
pub mod driver;
pub mod error;
pub mod export;
pub mod model;
pub mod optim;
pub mod rng;

pub use cone::ConeSpec;
pub use error::{Error, Result};
pub use model::{BoundaryCoefficients, HomogeneousModel, Regime, RegimeParams};

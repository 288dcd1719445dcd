//! The branch drivers and their cone infima.
//!
//! For a point `(t, P, Λ)` the plus-branch driver is
//! `𝒢₁(v) = f(1,v) + ½p(p-1)P|σ(1,v)|² + pP·b(1,v) + pΛᵀσ(1,v)`
//! and the minus branch flips the sign of the drift and volatility terms.
//! The backward equations integrate the infima `𝒢ᵢ* = inf_{v∈Γ} 𝒢ᵢ(v)`,
//! which may be `-∞`; that case is surfaced as a divergence status rather
//! than a finite value.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HomogeneousModel, Regime};
use crate::optim::{self, MinimizeStatus, Minimum, MinimizerConfig};

/// Which boundary restriction (`x = +1` or `x = -1`) a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

/// Arguments `(t, P, Λ)` of the drivers.
#[derive(Debug, Clone)]
pub struct DriverPoint {
    pub t: f64,
    pub p_value: f64,
    pub lambda: DVector<f64>,
}

impl DriverPoint {
    pub fn new(t: f64, p_value: f64, lambda: DVector<f64>) -> Self {
        Self { t, p_value, lambda }
    }

    pub fn deterministic(t: f64, p_value: f64, n: usize) -> Self {
        Self::new(t, p_value, DVector::zeros(n))
    }
}

/// Whether `G_star` may route through the closed-form unconstrained fast path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FastPath {
    #[default]
    Auto,
    /// Force the numerical cone minimizer even when a closed form applies.
    NumericOnly,
}

/// Evaluates the driver at a feasible control `v ∈ Γ`.
pub fn eval_g(
    model: &HomogeneousModel,
    branch: Branch,
    v: &DVector<f64>,
    point: &DriverPoint,
) -> Result<f64> {
    let tol = 1e-9 * (1.0 + v.norm());
    if !model.cone.contains(v, tol)? {
        return Err(Error::ConstraintViolation(format!("v = {v:?} not in Γ")));
    }
    Ok(eval_g_unchecked(model, branch, v, point))
}

/// Same as [`eval_g`] without the cone membership check; used by the inner
/// optimization loop where iterates are projections and therefore feasible.
pub fn eval_g_unchecked(
    model: &HomogeneousModel,
    branch: Branch,
    v: &DVector<f64>,
    point: &DriverPoint,
) -> f64 {
    let p = model.p;
    let t = point.t;
    let f = model.coeffs.running_cost(branch, t, v, p, model.horizon);
    let sigma = model.coeffs.volatility(branch, t, v, model.horizon);
    let b = model.coeffs.drift(branch, t, v, model.horizon);
    let second_order = 0.5 * p * (p - 1.0) * point.p_value * sigma.norm_squared();
    let sign = match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    f + second_order + sign * (p * point.p_value * b + p * point.lambda.dot(&sigma))
}

/// Parameters of the unconstrained power-LQ closed form:
/// `b(1,v) = A + Bᵀv`, `σ(1,v) = C` (control-free), `f(1,v) = |Q|ᵖ + |Rv|ᵖ`.
#[derive(Debug, Clone)]
pub struct ClosedFormParams {
    pub a: f64,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub q: f64,
    pub r: DMatrix<f64>,
}

/// Closed-form infimum of the unconstrained power-LQ driver and its argmin.
///
/// Value:
/// `(1-p)(Bᵀ(RᵀR)⁻¹B)^{p/(2(p-1))}|P|^{p/(p-1)} + |Q|ᵖ + ½p(p-1)P|C|² + pPA + pΛᵀC`.
/// The argmin carries the indicator `1_{PB≠0}`: it is exactly zero when `PB`
/// vanishes, which also guards the singular `|P|` exponent at `P = 0`. At
/// `p = 2` the exponent `(p-2)/(p-1)` is implemented as an exact zero power.
pub fn closed_form_unconstrained(
    params: &ClosedFormParams,
    p: f64,
    point: &DriverPoint,
) -> Result<(f64, DVector<f64>)> {
    let rtr = params.r.transpose() * &params.r;
    let chol = rtr
        .cholesky()
        .ok_or_else(|| Error::SingularMatrix("RᵀR must be positive definite".into()))?;
    let rtr_inv_b = chol.solve(&params.b);
    let s = params.b.dot(&rtr_inv_b); // Bᵀ(RᵀR)⁻¹B ≥ 0
    let pv = point.p_value;

    let control_term = if s > 0.0 && pv != 0.0 {
        (1.0 - p) * s.powf(p / (2.0 * (p - 1.0))) * pv.abs().powf(p / (p - 1.0))
    } else {
        0.0
    };
    let value = control_term
        + params.q.abs().powf(p)
        + 0.5 * p * (p - 1.0) * pv * params.c.norm_squared()
        + p * pv * params.a
        + p * point.lambda.dot(&params.c);

    let argmin = if s > 0.0 && pv != 0.0 {
        let exp = (p - 2.0) / (p - 1.0);
        // |P|^0 and s^0 are exactly 1 at p = 2.
        let p_factor = if exp == 0.0 { 1.0 } else { pv.abs().powf(-exp) };
        let s_factor = if exp == 0.0 { 1.0 } else { s.powf(-exp / 2.0) };
        rtr_inv_b * (-pv * p_factor * s_factor)
    } else {
        DVector::zeros(params.b.len())
    };
    Ok((value, argmin))
}

/// Extracts closed-form parameters for a branch when the model qualifies:
/// parametric family, full-space cone, control-free volatility, uniform drift
/// loading, no mixed cost term, positive definite `RᵀR`.
fn fast_path_params(model: &HomogeneousModel, branch: Branch) -> Option<(ClosedFormParams, f64)> {
    if !matches!(model.cone, crate::cone::ConeSpec::FullSpace { .. }) {
        return None;
    }
    let fam = model.coeffs.as_power_lq()?;
    if !fam.volatility_control_free() || !fam.has_uniform_control_loading() {
        return None;
    }
    (fam.r.transpose() * &fam.r).cholesky()?;
    // Minus-branch driver reduces to the same closed form with the argmin
    // negated (the control term enters as -pPBᵀv there).
    let control_sign = match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    Some((
        ClosedFormParams {
            a: 0.0, // t-dependent; filled per evaluation
            b: fam.b_plus.clone(),
            c: fam.c.clone(),
            q: 0.0,
            r: fam.r.clone(),
        },
        control_sign,
    ))
}

/// The infimum of the branch driver over the cone, with its argmin.
///
/// Uses the closed form when the model qualifies (and `fast_path` allows),
/// otherwise the multistart projected gradient minimizer. A
/// `DivergentToMinusInfinity` status signals an ill-posed problem.
pub fn g_star(
    model: &HomogeneousModel,
    branch: Branch,
    point: &DriverPoint,
    config: &MinimizerConfig,
    fast_path: FastPath,
) -> Result<Minimum> {
    if fast_path == FastPath::Auto {
        if let Some((mut params, control_sign)) = fast_path_params(model, branch) {
            let fam = model.coeffs.as_power_lq().expect("checked in fast path");
            params.a = match branch {
                Branch::Plus => fam.a_plus.eval(point.t, model.horizon),
                Branch::Minus => fam.a_minus.eval(point.t, model.horizon),
            };
            params.q = fam.q.eval(point.t, model.horizon);
            let (value, argmin) = closed_form_unconstrained(&params, model.p, point)?;
            return Ok(Minimum {
                argmin: argmin * control_sign,
                value,
                status: MinimizeStatus::Converged,
            });
        }
    }
    let objective = |v: &DVector<f64>| eval_g_unchecked(model, branch, v, point);
    optim::minimize(&model.cone, &objective, config)
}

/// Regime-specific a-priori bound on the minimizer, reported as the smallest
/// constant `c` with `quantity(v̂) ≤ c(1 + |Λ|)`. The constant is diagnostic;
/// no fixed threshold is asserted.
#[derive(Debug, Clone)]
pub struct ArgminBoundReport {
    pub branch: Branch,
    pub regime: Regime,
    pub quantity: f64,
    pub smallest_c: f64,
}

pub fn argmin_bound_check(
    model: &HomogeneousModel,
    branch: Branch,
    point: &DriverPoint,
    argmin: &DVector<f64>,
) -> ArgminBoundReport {
    let t = point.t;
    let b = model.coeffs.drift(branch, t, argmin, model.horizon).abs();
    let sig = model.coeffs.volatility(branch, t, argmin, model.horizon).norm();
    let f = model
        .coeffs
        .running_cost(branch, t, argmin, model.p, model.horizon);
    let quantity = match model.regime {
        Regime::CaseI => b.max(sig),
        Regime::CaseII => f,
        Regime::CaseIII => sig,
    };
    ArgminBoundReport {
        branch,
        regime: model.regime,
        quantity,
        smallest_c: quantity / (1.0 + point.lambda.norm()),
    }
}

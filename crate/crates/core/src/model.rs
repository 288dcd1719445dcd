//! The homogeneous control system, encoded by its coefficient restrictions at
//! `x = +1`, `x = -1` and `x = 0`.
//!
//! A degree-1 (drift/volatility) or degree-p (cost) homogeneous coefficient is
//! fully determined by these restrictions: for `x > 0`,
//! `φ(x, u) = |x|^q φ(1, u/|x|)`, and symmetrically for `x < 0`. Coefficients
//! are supplied either as the built-in piecewise-linear / power-cost parametric
//! family or as opaque callbacks, and are deterministic functions of time
//! (piecewise-constant tables are supported for the scalar entries).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::cone::ConeSpec;
use crate::driver::Branch;
use crate::error::{Error, Result};
use crate::rng::SmallRng;

/// Scalar coefficient, constant or piecewise-constant on uniform cells of
/// `[0, T]`.
#[derive(Debug, Clone)]
pub enum TimeTable {
    Constant(f64),
    /// Values on `cells.len()` uniform cells; the last cell is closed at `T`.
    PiecewiseConstant(Vec<f64>),
}

impl TimeTable {
    pub fn eval(&self, t: f64, horizon: f64) -> f64 {
        match self {
            TimeTable::Constant(v) => *v,
            TimeTable::PiecewiseConstant(cells) => {
                let k = ((t / horizon) * cells.len() as f64).floor() as usize;
                cells[k.min(cells.len() - 1)]
            }
        }
    }
}

impl From<f64> for TimeTable {
    fn from(v: f64) -> Self {
        TimeTable::Constant(v)
    }
}

/// The built-in parametric family: piecewise-linear drift and volatility with
/// power running cost
/// `f(x,u) = |Qx|^p + |Ru|^p + |Q̃x|^{p/3}|R̃u|^{2p/3}` and terminal cost
/// `g(x) = G₊(x⁺)^p + G₋(x⁻)^p`.
///
/// Drift: `b(1,v) = a₊ + b₊ᵀv⁺ - b₋ᵀv⁻`, `b(-1,v) = -a₋ + b₊ᵀv⁺ - b₋ᵀv⁻`.
/// Volatility: `σ(±1,v) = ±c + Dv`.
#[derive(Debug, Clone)]
pub struct PowerLqFamily {
    /// Drift rate at `x = +1` with zero control.
    pub a_plus: TimeTable,
    /// Drift rate magnitude at `x = -1` with zero control (enters as `-a₋`).
    pub a_minus: TimeTable,
    /// Drift loading on `u⁺` (length m).
    pub b_plus: DVector<f64>,
    /// Drift loading on `u⁻` (length m).
    pub b_minus: DVector<f64>,
    /// Volatility state loading (length n).
    pub c: DVector<f64>,
    /// Volatility control loading (n×m).
    pub d: DMatrix<f64>,
    /// State cost scale.
    pub q: TimeTable,
    /// Control cost matrix (rows×m); the cost term is `|Rv|^p`.
    pub r: DMatrix<f64>,
    /// Mixed-term state scale (the `|Q̃x|^{p/3}` factor).
    pub q_tilde: TimeTable,
    /// Mixed-term control matrix (the `|R̃u|^{2p/3}` factor).
    pub r_tilde: DMatrix<f64>,
    /// Terminal weight on `(x⁺)^p`.
    pub g_plus: f64,
    /// Terminal weight on `(x⁻)^p`.
    pub g_minus: f64,
}

impl PowerLqFamily {
    /// Symmetric linear-quadratic-style instance: `b = Ax + Bᵀu`,
    /// `σ = Cx + Du`, `f = |Qx|^p + |Ru|^p`, `g = |Gx|^p` at degree `p`.
    pub fn symmetric(
        a: f64,
        b: DVector<f64>,
        c: DVector<f64>,
        d: DMatrix<f64>,
        q: f64,
        r: DMatrix<f64>,
        g: f64,
        p: f64,
    ) -> Self {
        let m = b.len();
        let g_weight = g.abs().powf(p);
        Self {
            a_plus: a.into(),
            a_minus: a.into(),
            b_plus: b.clone(),
            b_minus: b,
            c,
            d,
            q: q.into(),
            r,
            q_tilde: 0.0.into(),
            r_tilde: DMatrix::zeros(1, m),
            g_plus: g_weight,
            g_minus: g_weight,
        }
    }

    /// True when the drift control loadings coincide and the mixed term is
    /// absent; needed by the unconstrained closed-form driver.
    pub fn has_uniform_control_loading(&self) -> bool {
        self.b_plus == self.b_minus && self.mixed_term_absent()
    }

    pub fn mixed_term_absent(&self) -> bool {
        self.r_tilde.iter().all(|x| *x == 0.0)
    }

    pub fn volatility_control_free(&self) -> bool {
        self.d.iter().all(|x| *x == 0.0)
    }
}

/// Opaque coefficient callbacks at the boundary points.
#[derive(Clone)]
pub struct CallbackCoefficients {
    pub b_plus: Arc<dyn Fn(f64, &DVector<f64>) -> f64 + Send + Sync>,
    pub b_minus: Arc<dyn Fn(f64, &DVector<f64>) -> f64 + Send + Sync>,
    pub sigma_plus: Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>,
    pub sigma_minus: Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>,
    pub f_plus: Arc<dyn Fn(f64, &DVector<f64>) -> f64 + Send + Sync>,
    pub f_minus: Arc<dyn Fn(f64, &DVector<f64>) -> f64 + Send + Sync>,
    pub f_zero: Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
    pub g_plus: f64,
    pub g_minus: f64,
}

impl std::fmt::Debug for CallbackCoefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CallbackCoefficients")
            .field("g_plus", &self.g_plus)
            .field("g_minus", &self.g_minus)
            .finish_non_exhaustive()
    }
}

/// Coefficient restrictions at the boundary points, either parametric or
/// callback-backed.
#[derive(Debug, Clone)]
pub enum BoundaryCoefficients {
    PowerLq(PowerLqFamily),
    Callback(CallbackCoefficients),
}

impl BoundaryCoefficients {
    /// Drift rate `b(±1, v)`.
    pub fn drift(&self, branch: Branch, t: f64, v: &DVector<f64>, horizon: f64) -> f64 {
        match self {
            BoundaryCoefficients::PowerLq(fam) => {
                let vp = v.map(|x| x.max(0.0));
                let vm = v.map(|x| (-x).max(0.0));
                let ctrl = fam.b_plus.dot(&vp) - fam.b_minus.dot(&vm);
                match branch {
                    Branch::Plus => fam.a_plus.eval(t, horizon) + ctrl,
                    Branch::Minus => -fam.a_minus.eval(t, horizon) + ctrl,
                }
            }
            BoundaryCoefficients::Callback(cb) => match branch {
                Branch::Plus => (cb.b_plus)(t, v),
                Branch::Minus => (cb.b_minus)(t, v),
            },
        }
    }

    /// Volatility vector `σ(±1, v) ∈ ℝⁿ`.
    pub fn volatility(&self, branch: Branch, t: f64, v: &DVector<f64>, _horizon: f64) -> DVector<f64> {
        match self {
            BoundaryCoefficients::PowerLq(fam) => {
                let ctrl = &fam.d * v;
                match branch {
                    Branch::Plus => &fam.c + ctrl,
                    Branch::Minus => -&fam.c + ctrl,
                }
            }
            BoundaryCoefficients::Callback(cb) => match branch {
                Branch::Plus => (cb.sigma_plus)(t, v),
                Branch::Minus => (cb.sigma_minus)(t, v),
            },
        }
    }

    /// Running cost rate `f(±1, v) ≥ 0`.
    pub fn running_cost(&self, branch: Branch, t: f64, v: &DVector<f64>, p: f64, horizon: f64) -> f64 {
        match self {
            BoundaryCoefficients::PowerLq(fam) => {
                let state = fam.q.eval(t, horizon).abs().powf(p);
                let ctrl = (&fam.r * v).norm().powf(p);
                let mixed = {
                    let qt = fam.q_tilde.eval(t, horizon).abs();
                    if qt == 0.0 {
                        0.0
                    } else {
                        qt.powf(p / 3.0) * (&fam.r_tilde * v).norm().powf(2.0 * p / 3.0)
                    }
                };
                state + ctrl + mixed
            }
            BoundaryCoefficients::Callback(cb) => match branch {
                Branch::Plus => (cb.f_plus)(t, v),
                Branch::Minus => (cb.f_minus)(t, v),
            },
        }
    }

    /// Running cost at the origin, `f(0, v)`.
    pub fn running_cost_zero(&self, v: &DVector<f64>, p: f64) -> f64 {
        match self {
            // Only the pure control term survives at x = 0.
            BoundaryCoefficients::PowerLq(fam) => (&fam.r * v).norm().powf(p),
            BoundaryCoefficients::Callback(cb) => (cb.f_zero)(v),
        }
    }

    /// Terminal weight `g(±1)`.
    pub fn terminal(&self, branch: Branch) -> f64 {
        match (self, branch) {
            (BoundaryCoefficients::PowerLq(fam), Branch::Plus) => fam.g_plus,
            (BoundaryCoefficients::PowerLq(fam), Branch::Minus) => fam.g_minus,
            (BoundaryCoefficients::Callback(cb), Branch::Plus) => cb.g_plus,
            (BoundaryCoefficients::Callback(cb), Branch::Minus) => cb.g_minus,
        }
    }

    pub fn as_power_lq(&self) -> Option<&PowerLqFamily> {
        match self {
            BoundaryCoefficients::PowerLq(fam) => Some(fam),
            BoundaryCoefficients::Callback(_) => None,
        }
    }
}

/// The declared solvability regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Regime {
    /// Costs dominate the squared dynamics: `max{|b|²,|σ|²} ≤ δf + L`.
    CaseI,
    /// Bounded volatility and `|b| ≤ εf + L_ε` for every `ε > 0`.
    CaseII,
    /// Singular case: `|b| ≤ δ|σ|² + L` with uniformly positive terminal cost.
    CaseIII,
}

/// Entry of the ε-table for the CaseII growth condition.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EpsEntry {
    pub eps: f64,
    pub l_eps: f64,
}

/// Declared regime constants; only the fields relevant to the regime are read.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RegimeParams {
    pub delta: f64,
    pub l: f64,
    pub eta: f64,
    #[serde(default)]
    pub eps_table: Vec<EpsEntry>,
}

/// Which coefficient [`HomogeneousModel::extend`] reconstructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Drift,
    Volatility,
    RunningCost,
}

/// Scalar-or-vector result of [`HomogeneousModel::extend`].
#[derive(Debug, Clone, PartialEq)]
pub enum Extended {
    Scalar(f64),
    Vector(DVector<f64>),
}

impl Extended {
    pub fn scalar(&self) -> f64 {
        match self {
            Extended::Scalar(x) => *x,
            Extended::Vector(_) => panic!("expected scalar"),
        }
    }
}

/// The homogeneous control system of a fixed degree `p > 1` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct HomogeneousModel {
    pub p: f64,
    pub horizon: f64,
    pub m: usize,
    pub n: usize,
    pub cone: ConeSpec,
    pub coeffs: BoundaryCoefficients,
    pub regime: Regime,
    pub regime_params: RegimeParams,
}

impl HomogeneousModel {
    /// Validates structural invariants and the regime-specific degree
    /// requirements.
    pub fn validate(&self) -> Result<()> {
        if self.horizon <= 0.0 {
            return Err(Error::InvalidModel("horizon must be positive".into()));
        }
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidModel("m and n must be >= 1".into()));
        }
        self.cone.validate()?;
        if self.cone.dim() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: self.cone.dim(),
            });
        }
        match self.regime {
            Regime::CaseI | Regime::CaseII => {
                if self.p <= 1.0 {
                    return Err(Error::InvalidModel(format!(
                        "degree p = {} must exceed 1",
                        self.p
                    )));
                }
            }
            Regime::CaseIII => {
                let delta = self.regime_params.delta;
                if self.p <= 1.0 + 2.0 * delta {
                    return Err(Error::InvalidModel(format!(
                        "CaseIII requires p > 1 + 2δ = {}, got p = {}",
                        1.0 + 2.0 * delta,
                        self.p
                    )));
                }
                let eta = self.regime_params.eta;
                if eta <= 0.0 {
                    return Err(Error::InvalidModel("CaseIII requires η > 0".into()));
                }
                for branch in [Branch::Plus, Branch::Minus] {
                    if self.coeffs.terminal(branch) < eta {
                        return Err(Error::InvalidModel(format!(
                            "CaseIII requires g(±1) ≥ η = {eta}, got {}",
                            self.coeffs.terminal(branch)
                        )));
                    }
                }
            }
        }
        for branch in [Branch::Plus, Branch::Minus] {
            if self.coeffs.terminal(branch) < 0.0 {
                return Err(Error::InvalidModel("terminal costs must be nonnegative".into()));
            }
        }
        Ok(())
    }

    fn check_domain(&self, t: f64, u: &DVector<f64>) -> Result<()> {
        if t < 0.0 || t > self.horizon {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let tol = 1e-9 * (1.0 + u.norm());
        if !self.cone.contains(u, tol)? {
            return Err(Error::ConstraintViolation(format!("u = {u:?} not in Γ")));
        }
        Ok(())
    }

    /// Reconstructs a full coefficient from its boundary restrictions:
    /// `|x|^q φ(sign x, u/|x|)` for `x ≠ 0` (q = 1 for drift/volatility,
    /// q = p for the running cost), the origin values otherwise.
    pub fn extend(&self, which: Field, t: f64, x: f64, u: &DVector<f64>) -> Result<Extended> {
        self.check_domain(t, u)?;
        let (branch, scale) = if x > 0.0 {
            (Some(Branch::Plus), x)
        } else if x < 0.0 {
            (Some(Branch::Minus), -x)
        } else {
            (None, 0.0)
        };
        Ok(match (which, branch) {
            (Field::Drift, Some(b)) => {
                let v = u / scale;
                Extended::Scalar(scale * self.coeffs.drift(b, t, &v, self.horizon))
            }
            (Field::Volatility, Some(b)) => {
                let v = u / scale;
                Extended::Vector(self.coeffs.volatility(b, t, &v, self.horizon) * scale)
            }
            (Field::RunningCost, Some(b)) => {
                let v = u / scale;
                Extended::Scalar(
                    scale.powf(self.p) * self.coeffs.running_cost(b, t, &v, self.p, self.horizon),
                )
            }
            // Degree-1 homogeneous coefficients vanish at the origin.
            (Field::Drift, None) => Extended::Scalar(0.0),
            (Field::Volatility, None) => Extended::Vector(DVector::zeros(self.n)),
            (Field::RunningCost, None) => {
                Extended::Scalar(self.coeffs.running_cost_zero(u, self.p))
            }
        })
    }

    /// Terminal cost `g(x) = g(1)(x⁺)^p + g(-1)(x⁻)^p`.
    pub fn terminal_cost(&self, x: f64) -> f64 {
        let xp = x.max(0.0);
        let xm = (-x).max(0.0);
        self.coeffs.terminal(Branch::Plus) * xp.powf(self.p)
            + self.coeffs.terminal(Branch::Minus) * xm.powf(self.p)
    }

    /// Draws a random cone member with entries of the given magnitude.
    pub fn sample_cone_point(&self, rng: &mut SmallRng, scale: f64) -> DVector<f64> {
        let raw = DVector::from_fn(self.m, |_, _| scale * rng.normal());
        self.cone.project(&raw).expect("dimension fixed by model")
    }

    /// Samples the declared regime inequality over a grid of `(t, v)` points
    /// and reports violations. A sampled necessary check, not a proof.
    pub fn check_regime(&self, sample_grid: &[(f64, DVector<f64>)]) -> RegimeDiagnostics {
        let mut diag = RegimeDiagnostics {
            regime: self.regime,
            structural_failures: Vec::new(),
            violations: Vec::new(),
            points_checked: 0,
        };
        let rp = &self.regime_params;

        if self.regime == Regime::CaseIII {
            if rp.eta <= 0.0 {
                diag.structural_failures.push("η must be positive".into());
            }
            for branch in [Branch::Plus, Branch::Minus] {
                let g = self.coeffs.terminal(branch);
                if g < rp.eta {
                    diag.structural_failures
                        .push(format!("g({branch:?}) = {g} < η = {}", rp.eta));
                }
            }
            if self.p <= 1.0 + 2.0 * rp.delta {
                diag.structural_failures
                    .push(format!("p = {} ≤ 1 + 2δ = {}", self.p, 1.0 + 2.0 * rp.delta));
            }
        }
        if self.regime == Regime::CaseII && rp.eps_table.is_empty() {
            diag.structural_failures
                .push("CaseII check needs a nonempty ε-table".into());
        }

        for (t, v) in sample_grid {
            diag.points_checked += 1;
            for branch in [Branch::Plus, Branch::Minus] {
                let b = self.coeffs.drift(branch, *t, v, self.horizon);
                let sig = self.coeffs.volatility(branch, *t, v, self.horizon).norm();
                let f = self.coeffs.running_cost(branch, *t, v, self.p, self.horizon);
                match self.regime {
                    Regime::CaseI => {
                        let lhs = (b * b).max(sig * sig);
                        let rhs = rp.delta * f + rp.l;
                        if lhs > rhs + 1e-9 {
                            diag.violations.push(RegimeViolation {
                                t: *t,
                                v: v.clone(),
                                branch,
                                lhs,
                                rhs,
                                what: "max{|b|²,|σ|²} ≤ δf + L".into(),
                            });
                        }
                    }
                    Regime::CaseII => {
                        if sig > rp.l + 1e-9 {
                            diag.violations.push(RegimeViolation {
                                t: *t,
                                v: v.clone(),
                                branch,
                                lhs: sig,
                                rhs: rp.l,
                                what: "|σ| ≤ L".into(),
                            });
                        }
                        for entry in &rp.eps_table {
                            let rhs = entry.eps * f + entry.l_eps;
                            if b.abs() > rhs + 1e-9 {
                                diag.violations.push(RegimeViolation {
                                    t: *t,
                                    v: v.clone(),
                                    branch,
                                    lhs: b.abs(),
                                    rhs,
                                    what: format!("|b| ≤ εf + L_ε (ε = {})", entry.eps),
                                });
                            }
                        }
                    }
                    Regime::CaseIII => {
                        let rhs = rp.delta * sig * sig + rp.l;
                        if b.abs() > rhs + 1e-9 {
                            diag.violations.push(RegimeViolation {
                                t: *t,
                                v: v.clone(),
                                branch,
                                lhs: b.abs(),
                                rhs,
                                what: "|b| ≤ δ|σ|² + L".into(),
                            });
                        }
                    }
                }
            }
        }
        diag
    }

    /// Verifies positive homogeneity of user-supplied full coefficients
    /// `φ(t, x, u)` on random `(t, x, u ∈ Γ, λ > 0)` tuples.
    pub fn check_homogeneity(
        &self,
        coefficients: &[FullCoefficient],
        sample_count: usize,
        seed: u64,
    ) -> HomogeneityReport {
        let mut rng = SmallRng::new(seed);
        let rel_tol = 1e-10;
        let mut results = Vec::new();
        for coeff in coefficients {
            let mut worst: f64 = 0.0;
            let mut witness = None;
            for _ in 0..sample_count {
                let t = rng.range(0.0, self.horizon);
                let x = rng.range(-3.0, 3.0);
                let u = self.sample_cone_point(&mut rng, 2.0);
                let lambda = rng.range(0.1, 10.0);
                let base = (coeff.eval)(t, x, &u);
                let scaled = (coeff.eval)(t, lambda * x, &(&u * lambda));
                let expect = &base * lambda.powf(coeff.degree);
                let denom = 1.0 + expect.norm();
                let rel = (&scaled - &expect).norm() / denom;
                if rel > worst {
                    worst = rel;
                    witness = Some((t, x, lambda));
                }
            }
            results.push(CoefficientHomogeneity {
                name: coeff.name.clone(),
                degree: coeff.degree,
                worst_relative_error: worst,
                pass: worst <= rel_tol,
                witness,
            });
        }
        HomogeneityReport { results }
    }
}

/// A user-supplied full coefficient `φ(t, x, u)` with its claimed degree.
#[derive(Clone)]
pub struct FullCoefficient {
    pub name: String,
    pub degree: f64,
    pub eval: Arc<dyn Fn(f64, f64, &DVector<f64>) -> DVector<f64> + Send + Sync>,
}

impl FullCoefficient {
    pub fn scalar(
        name: &str,
        degree: f64,
        f: impl Fn(f64, f64, &DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            degree,
            eval: Arc::new(move |t, x, u| DVector::from_element(1, f(t, x, u))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientHomogeneity {
    pub name: String,
    pub degree: f64,
    pub worst_relative_error: f64,
    pub pass: bool,
    pub witness: Option<(f64, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct HomogeneityReport {
    pub results: Vec<CoefficientHomogeneity>,
}

impl HomogeneityReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }
}

#[derive(Debug, Clone)]
pub struct RegimeViolation {
    pub t: f64,
    pub v: DVector<f64>,
    pub branch: Branch,
    pub lhs: f64,
    pub rhs: f64,
    pub what: String,
}

#[derive(Debug, Clone)]
pub struct RegimeDiagnostics {
    pub regime: Regime,
    pub structural_failures: Vec<String>,
    pub violations: Vec<RegimeViolation>,
    pub points_checked: usize,
}

impl RegimeDiagnostics {
    pub fn pass(&self) -> bool {
        self.structural_failures.is_empty() && self.violations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quadratic_model() -> HomogeneousModel {
        // b = 0.1x + u, σ = 0.2x, f = |x|² + |u|², g = |x|², p = 2.
        HomogeneousModel {
            p: 2.0,
            horizon: 1.0,
            m: 1,
            n: 1,
            cone: ConeSpec::full(1),
            coeffs: BoundaryCoefficients::PowerLq(PowerLqFamily::symmetric(
                0.1,
                DVector::from_element(1, 1.0),
                DVector::from_element(1, 0.2),
                DMatrix::zeros(1, 1),
                1.0,
                DMatrix::identity(1, 1),
                1.0,
                2.0,
            )),
            regime: Regime::CaseI,
            regime_params: RegimeParams {
                delta: 4.0,
                l: 2.0,
                ..Default::default()
            },
        }
    }

    #[test]
    fn extend_vanishes_at_origin() {
        let model = quadratic_model();
        let u = DVector::zeros(1);
        assert_eq!(model.extend(Field::Drift, 0.5, 0.0, &u).unwrap().scalar(), 0.0);
        assert_eq!(
            model.extend(Field::RunningCost, 0.5, 0.0, &u).unwrap().scalar(),
            0.0
        );
        match model.extend(Field::Volatility, 0.5, 0.0, &u).unwrap() {
            Extended::Vector(v) => assert_eq!(v.norm(), 0.0),
            Extended::Scalar(_) => panic!("volatility is vector valued"),
        }
    }

    #[test]
    fn extend_running_cost_direct_value() {
        // f(x, u) = |x|² + |u|² at x = -3, u = 4: 9 + 16 = 25.
        let model = quadratic_model();
        let u = DVector::from_element(1, 4.0);
        let f = model.extend(Field::RunningCost, 0.5, -3.0, &u).unwrap().scalar();
        assert_relative_eq!(f, 25.0, epsilon = 1e-12);
    }

    #[test]
    fn extend_drift_is_degree_one() {
        let model = quadratic_model();
        let u = DVector::from_element(1, 0.7);
        let base = model.extend(Field::Drift, 0.3, 1.4, &u).unwrap().scalar();
        let scaled = model.extend(Field::Drift, 0.3, 2.8, &(&u * 2.0)).unwrap().scalar();
        assert_relative_eq!(scaled, 2.0 * base, epsilon = 1e-12);
    }

    #[test]
    fn extend_rejects_bad_time_and_infeasible_control() {
        let mut model = quadratic_model();
        let u = DVector::from_element(1, 1.0);
        assert!(model.extend(Field::Drift, 2.0, 1.0, &u).is_err());
        model.cone = ConeSpec::orthant(1);
        let bad = DVector::from_element(1, -1.0);
        assert!(model.extend(Field::Drift, 0.5, 1.0, &bad).is_err());
    }

    #[test]
    fn terminal_cost_splits_by_sign() {
        let mut model = quadratic_model();
        if let BoundaryCoefficients::PowerLq(fam) = &mut model.coeffs {
            fam.g_plus = 2.0;
            fam.g_minus = 3.0;
        }
        assert_relative_eq!(model.terminal_cost(2.0), 8.0);
        assert_relative_eq!(model.terminal_cost(-2.0), 12.0);
        assert_eq!(model.terminal_cost(0.0), 0.0);
    }

    #[test]
    fn homogeneity_check_accepts_true_coefficients() {
        let model = quadratic_model();
        let coeffs = vec![
            FullCoefficient::scalar("drift", 1.0, |_t, x, u| 0.1 * x + u[0]),
            FullCoefficient::scalar("running_cost", 2.0, |_t, x, u| {
                x * x + u.norm_squared()
            }),
            FullCoefficient::scalar("power_mean", 2.0, |_t, x, u| {
                (x * x + u.norm_squared()).powf(1.0)
            }),
        ];
        let report = model.check_homogeneity(&coeffs, 200, 7);
        assert!(report.all_pass(), "{report:?}");
    }

    #[test]
    fn homogeneity_check_rejects_wrong_degree() {
        let model = quadratic_model();
        let coeffs = vec![
            // Affine, not homogeneous.
            FullCoefficient::scalar("shifted", 1.0, |_t, x, _u| x + 1.0),
            // True degree is 2, claimed 1.
            FullCoefficient::scalar("mislabeled", 1.0, |_t, x, _u| x * x),
        ];
        let report = model.check_homogeneity(&coeffs, 200, 7);
        assert!(report.results.iter().all(|r| !r.pass));
    }

    #[test]
    fn regime_check_flags_case1_violation() {
        let mut model = quadratic_model();
        // δ = 0, L tiny: |b|² can't be dominated.
        model.regime_params = RegimeParams {
            delta: 0.0,
            l: 0.01,
            ..Default::default()
        };
        let grid = vec![(0.5, DVector::from_element(1, 5.0))];
        let diag = model.check_regime(&grid);
        assert!(!diag.pass());
        assert!(!diag.violations.is_empty());
    }

    #[test]
    fn regime_check_case3_structural_failures() {
        let mut model = quadratic_model();
        model.regime = Regime::CaseIII;
        model.regime_params = RegimeParams {
            delta: 0.2,
            l: 10.0,
            eta: 2.0, // exceeds g(±1) = 1 → structural failure
            ..Default::default()
        };
        let diag = model.check_regime(&[]);
        assert!(!diag.pass());
        assert!(diag
            .structural_failures
            .iter()
            .any(|s| s.contains("η")));
        // And validate() must reject it outright.
        assert!(model.validate().is_err());
    }

    #[test]
    fn validate_rejects_low_degree() {
        let mut model = quadratic_model();
        model.p = 1.0;
        assert!(model.validate().is_err());
        model.p = 0.5;
        assert!(model.validate().is_err());
    }

    #[test]
    fn time_table_lookup() {
        let table = TimeTable::PiecewiseConstant(vec![1.0, 2.0, 4.0]);
        assert_eq!(table.eval(0.0, 3.0), 1.0);
        assert_eq!(table.eval(1.5, 3.0), 2.0);
        assert_eq!(table.eval(3.0, 3.0), 4.0);
    }
}

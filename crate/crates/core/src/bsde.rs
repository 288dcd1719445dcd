//! Backward solvers for the two branch equations.
//!
//! Deterministic-coefficient mode integrates `dP/dt = -𝒢*(P, 0)` backward
//! from `P(T) = g(±1)` with classical RK4 (`Λ ≡ 0`). Tree mode runs an exact
//! backward recursion on a recombining binomial filtration with increments
//! `±√Δt`, which yields nonzero `Λ` for scenario-dependent terminal data.
//! The linear comparison equation (control frozen at `v = 0`) provides the
//! nodewise upper bound `P ≤ P̄`, and an independent adaptive Riccati
//! integrator serves as a cross-implementation oracle at `p = 2`.

use nalgebra::{DMatrix, DVector};

use crate::driver::{self, Branch, DriverPoint, FastPath};
use crate::error::{Error, Result};
use crate::model::{HomogeneousModel, Regime};
use crate::optim::{MinimizeStatus, MinimizerConfig};

/// Uniform grid `t_k = k·T/N` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub n: usize,
    pub horizon: f64,
}

impl TimeGrid {
    pub fn new(n: usize, horizon: f64) -> Result<Self> {
        if n < 1 || horizon <= 0.0 {
            return Err(Error::Config("grid needs n >= 1 and T > 0".into()));
        }
        Ok(Self { n, horizon })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n {
            self.horizon // exact terminal node
        } else {
            k as f64 * self.dt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Deterministic,
    Tree { depth: usize },
}

/// Solver knobs shared by the backward integrators.
#[derive(Debug, Clone, Default)]
pub struct SolverConfig {
    pub minimizer: MinimizerConfig,
    pub fast_path: FastPath,
}

/// Solution of one branch equation on a grid (one node per layer in
/// deterministic mode, `k+1` nodes in layer `k` of the tree).
#[derive(Debug, Clone)]
pub struct BsdeSolution {
    pub grid: TimeGrid,
    pub mode: SolveMode,
    pub branch: Branch,
    /// `p[k][j]`: first component at layer `k`, node `j`.
    pub p: Vec<Vec<f64>>,
    /// `lambda[k][j]`: second component; identically zero in deterministic mode.
    pub lambda: Vec<Vec<DVector<f64>>>,
    /// `v_hat[k][j]`: driver argmin at the node's `(t, P, Λ)`.
    pub v_hat: Vec<Vec<DVector<f64>>>,
}

impl BsdeSolution {
    pub fn p_at_origin(&self) -> f64 {
        self.p[0][0]
    }

    pub fn terminal_value(&self) -> f64 {
        self.p[self.grid.n][0]
    }
}

fn g_star_checked(
    model: &HomogeneousModel,
    branch: Branch,
    point: &DriverPoint,
    cfg: &SolverConfig,
) -> Result<crate::optim::Minimum> {
    let min = driver::g_star(model, branch, point, &cfg.minimizer, cfg.fast_path)?;
    if min.status == MinimizeStatus::DivergentToMinusInfinity {
        return Err(Error::IllPosed {
            t: point.t,
            p: point.p_value,
            branch,
        });
    }
    Ok(min)
}

/// Backward RK4 on `dP/dt = -𝒢*(t, P, 0)` from the terminal value `g(±1)`.
pub fn solve_deterministic(
    model: &HomogeneousModel,
    branch: Branch,
    grid: TimeGrid,
    cfg: &SolverConfig,
) -> Result<BsdeSolution> {
    model.validate()?;
    let n = grid.n;
    let h = grid.dt();
    let rhs = |t: f64, p: f64| -> Result<f64> {
        let point = DriverPoint::deterministic(t, p, model.n);
        Ok(g_star_checked(model, branch, &point, cfg)?.value)
    };

    let mut p_path = vec![0.0; n + 1];
    p_path[n] = model.coeffs.terminal(branch);
    for k in (1..=n).rev() {
        let t = grid.node(k);
        let p = p_path[k];
        let k1 = rhs(t, p)?;
        let k2 = rhs(t - 0.5 * h, p + 0.5 * h * k1)?;
        let k3 = rhs(t - 0.5 * h, p + 0.5 * h * k2)?;
        let k4 = rhs(t - h, p + h * k3)?;
        let next = p + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        if !next.is_finite() {
            return Err(Error::Numerical(format!(
                "P became non-finite at t = {}",
                t - h
            )));
        }
        p_path[k - 1] = next;
    }

    let mut p = Vec::with_capacity(n + 1);
    let mut lambda = Vec::with_capacity(n + 1);
    let mut v_hat = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let point = DriverPoint::deterministic(grid.node(k), p_path[k], model.n);
        let min = g_star_checked(model, branch, &point, cfg)?;
        p.push(vec![p_path[k]]);
        lambda.push(vec![DVector::zeros(model.n)]);
        v_hat.push(vec![min.argmin]);
    }
    Ok(BsdeSolution {
        grid,
        mode: SolveMode::Deterministic,
        branch,
        p,
        lambda,
        v_hat,
    })
}

/// Terminal data for the tree: either the model's `g(±1)` or a scenario
/// override evaluated at the walk value of the parent node and the final
/// increment sign.
pub enum TreeTerminal<'a> {
    ModelTerminal,
    /// `f(w_parent, ξ_N)` where `w_parent` is the scaled walk value at layer
    /// `N-1` and `ξ_N = ±1` the last increment.
    Scenario(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
}

/// Backward recursion on a recombining binomial tree with increments `±√Δt`.
///
/// Per node: `P_k = E[P_{k+1}] + 𝒢*(P_k, Λ_k)Δt` with
/// `Λ_k = E[P_{k+1} ξ_{k+1}]/√Δt`; the implicit `P_k` is resolved by fixed
/// point iteration (tolerance 1e-12, cap 100). Single driving noise only.
pub fn solve_tree(
    model: &HomogeneousModel,
    branch: Branch,
    grid: TimeGrid,
    terminal: TreeTerminal<'_>,
    cfg: &SolverConfig,
) -> Result<BsdeSolution> {
    model.validate()?;
    if model.n != 1 {
        return Err(Error::Config("tree mode supports n = 1 driving noise".into()));
    }
    let n = grid.n;
    if (n + 1) * (n + 2) / 2 > 4_000_000 {
        return Err(Error::Config("tree too deep for the configured memory cap".into()));
    }
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();

    // walk value at layer k, node j (j up-moves): (2j - k)√Δt
    let walk = |k: usize, j: usize| (2.0 * j as f64 - k as f64) * sqrt_dt;

    let g_terminal = model.coeffs.terminal(branch);
    let mut layers_p: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    let mut layers_lambda: Vec<Vec<DVector<f64>>> = vec![Vec::new(); n + 1];
    let mut layers_vhat: Vec<Vec<DVector<f64>>> = vec![Vec::new(); n + 1];

    // Terminal layer. Under a scenario override the terminal datum is edge-
    // measurable, not node-measurable; the stored layer then holds the
    // conditional mean per node for reporting.
    let terminal_pair = |j_parent: usize| -> (f64, f64) {
        match &terminal {
            TreeTerminal::ModelTerminal => (g_terminal, g_terminal),
            TreeTerminal::Scenario(f) => {
                let w = walk(n - 1, j_parent);
                (f(w, 1.0), f(w, -1.0))
            }
        }
    };
    layers_p[n] = match &terminal {
        TreeTerminal::ModelTerminal => vec![g_terminal; n + 1],
        TreeTerminal::Scenario(_) => (0..=n)
            .map(|j| {
                // midpoints of the incident edge values, for display only
                let up = if j > 0 { Some(terminal_pair(j - 1).0) } else { None };
                let down = if j < n { Some(terminal_pair(j).1) } else { None };
                match (up, down) {
                    (Some(a), Some(b)) => 0.5 * (a + b),
                    (Some(a), None) => a,
                    (None, Some(b)) => b,
                    (None, None) => g_terminal,
                }
            })
            .collect(),
    };
    layers_lambda[n] = vec![DVector::zeros(1); n + 1];
    layers_vhat[n] = vec![DVector::zeros(model.m); n + 1];

    for k in (0..n).rev() {
        let t = grid.node(k);
        let mut p_layer = Vec::with_capacity(k + 1);
        let mut l_layer = Vec::with_capacity(k + 1);
        let mut v_layer = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let (p_up, p_down) = if k == n - 1 {
                match &terminal {
                    TreeTerminal::ModelTerminal => (layers_p[k + 1][j + 1], layers_p[k + 1][j]),
                    TreeTerminal::Scenario(_) => terminal_pair(j),
                }
            } else {
                (layers_p[k + 1][j + 1], layers_p[k + 1][j])
            };
            let mean = 0.5 * (p_up + p_down);
            let lam = DVector::from_element(1, (p_up - p_down) / (2.0 * sqrt_dt));

            // Implicit in P, explicit in Λ: fixed point P = mean + 𝒢*(P, Λ)Δt.
            let mut p_cur = mean;
            let mut last_min = None;
            let mut residual_prev = f64::INFINITY;
            let mut growth_streak = 0usize;
            let mut converged = false;
            for _ in 0..100 {
                let point = DriverPoint::new(t, p_cur, lam.clone());
                let min = g_star_checked(model, branch, &point, cfg)?;
                let p_next = mean + min.value * dt;
                let residual = (p_next - p_cur).abs();
                last_min = Some(min);
                p_cur = p_next;
                if residual <= 1e-12 * (1.0 + p_cur.abs()) {
                    converged = true;
                    break;
                }
                if residual > residual_prev {
                    growth_streak += 1;
                    if growth_streak >= 10 {
                        return Err(Error::SchemeDivergence { step: k, node: j });
                    }
                } else {
                    growth_streak = 0;
                }
                residual_prev = residual;
            }
            if !converged {
                return Err(Error::SchemeDivergence { step: k, node: j });
            }
            p_layer.push(p_cur);
            l_layer.push(lam);
            v_layer.push(last_min.expect("at least one iteration").argmin);
        }
        layers_p[k] = p_layer;
        layers_lambda[k] = l_layer;
        layers_vhat[k] = v_layer;
    }

    Ok(BsdeSolution {
        grid,
        mode: SolveMode::Tree { depth: n },
        branch,
        p: layers_p,
        lambda: layers_lambda,
        v_hat: layers_vhat,
    })
}

/// The linear comparison equation: control frozen at `v = 0`, so the driver is
/// `𝒢(0, P̄, 0)` and the equation is linear with bounded coefficients. Its
/// solution dominates the nonlinear one nodewise.
pub fn solve_upper_bound(
    model: &HomogeneousModel,
    branch: Branch,
    grid: TimeGrid,
) -> Result<Vec<f64>> {
    model.validate()?;
    let n = grid.n;
    let h = grid.dt();
    let zero = DVector::zeros(model.m);
    let rhs = |t: f64, p: f64| -> f64 {
        let point = DriverPoint::deterministic(t, p, model.n);
        driver::eval_g_unchecked(model, branch, &zero, &point)
    };
    let mut path = vec![0.0; n + 1];
    path[n] = model.coeffs.terminal(branch);
    for k in (1..=n).rev() {
        let t = grid.node(k);
        let p = path[k];
        let k1 = rhs(t, p);
        let k2 = rhs(t - 0.5 * h, p + 0.5 * h * k1);
        let k3 = rhs(t - 0.5 * h, p + 0.5 * h * k2);
        let k4 = rhs(t - h, p + h * k3);
        path[k - 1] = p + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        if !path[k - 1].is_finite() {
            return Err(Error::Numerical("upper bound path became non-finite".into()));
        }
    }
    Ok(path)
}

/// Parameters of the classical LQ Riccati oracle (`p = 2`, symmetric
/// coefficients, unconstrained, deterministic constants).
#[derive(Debug, Clone)]
pub struct RiccatiParams {
    pub a: f64,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub q: f64,
    pub r: DMatrix<f64>,
    pub g: f64,
}

/// Independently integrates the Riccati equation
/// `dP/dt = -(-s P² + Q² + |C|²P + 2AP)` with `s = Bᵀ(RᵀR)⁻¹B`
/// using an adaptive Cash-Karp 4(5) scheme, reporting `P` on the grid nodes.
/// Deliberately unrelated to the RK4/driver path it cross-checks.
pub fn riccati_oracle(params: &RiccatiParams, grid: TimeGrid) -> Result<Vec<f64>> {
    let rtr = params.r.transpose() * &params.r;
    let chol = rtr
        .cholesky()
        .ok_or_else(|| Error::SingularMatrix("RᵀR must be positive definite".into()))?;
    let s = params.b.dot(&chol.solve(&params.b));
    let q2 = params.q * params.q;
    let c2 = params.c.norm_squared();
    let a = params.a;
    // In backward time τ = T - t.
    let f = |p: f64| -s * p * p + q2 + c2 * p + 2.0 * a * p;

    let n = grid.n;
    let mut path = vec![0.0; n + 1];
    path[n] = params.g;
    let mut p = params.g;
    for k in (1..=n).rev() {
        let tau0 = grid.horizon - grid.node(k);
        let tau1 = grid.horizon - grid.node(k - 1);
        p = integrate_ck45(&f, p, tau1 - tau0, 1e-12)?;
        path[k - 1] = p;
    }
    Ok(path)
}

/// Cash-Karp embedded RK4(5) over an interval of length `span` with adaptive
/// step-size control on the 4th/5th order difference.
fn integrate_ck45(f: &dyn Fn(f64) -> f64, y0: f64, span: f64, tol: f64) -> Result<f64> {
    const A2: f64 = 1.0 / 5.0;
    const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
    const A4: [f64; 3] = [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0];
    const A5: [f64; 4] = [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0];
    const A6: [f64; 5] = [
        1631.0 / 55296.0,
        175.0 / 512.0,
        575.0 / 13824.0,
        44275.0 / 110592.0,
        253.0 / 4096.0,
    ];
    const B5: [f64; 6] = [
        37.0 / 378.0,
        0.0,
        250.0 / 621.0,
        125.0 / 594.0,
        0.0,
        512.0 / 1771.0,
    ];
    const B4: [f64; 6] = [
        2825.0 / 27648.0,
        0.0,
        18575.0 / 48384.0,
        13525.0 / 55296.0,
        277.0 / 14336.0,
        1.0 / 4.0,
    ];

    let mut y = y0;
    let mut remaining = span;
    let mut h = span;
    let mut steps = 0usize;
    while remaining > 1e-15 {
        h = h.min(remaining);
        let k1 = f(y);
        let k2 = f(y + h * A2 * k1);
        let k3 = f(y + h * (A3[0] * k1 + A3[1] * k2));
        let k4 = f(y + h * (A4[0] * k1 + A4[1] * k2 + A4[2] * k3));
        let k5 = f(y + h * (A5[0] * k1 + A5[1] * k2 + A5[2] * k3 + A5[3] * k4));
        let k6 = f(y + h * (A6[0] * k1 + A6[1] * k2 + A6[2] * k3 + A6[3] * k4 + A6[4] * k5));
        let ks = [k1, k2, k3, k4, k5, k6];
        let y5 = y + h * ks.iter().zip(B5).map(|(k, b)| k * b).sum::<f64>();
        let y4 = y + h * ks.iter().zip(B4).map(|(k, b)| k * b).sum::<f64>();
        let err = (y5 - y4).abs();
        let scale = tol * (1.0 + y.abs());
        if err <= scale || h < 1e-14 {
            y = y5;
            remaining -= h;
            if err > 0.0 {
                h *= 0.9 * (scale / err).powf(0.2).min(5.0);
            } else {
                h *= 5.0;
            }
        } else {
            h *= 0.9 * (scale / err).powf(0.25).max(0.1);
        }
        steps += 1;
        if steps > 2_000_000 {
            return Err(Error::Numerical("adaptive integrator stalled".into()));
        }
        if !y.is_finite() {
            return Err(Error::Numerical("Riccati path became non-finite".into()));
        }
    }
    Ok(y)
}

/// Reported result of the per-solution invariant checks.
#[derive(Debug, Clone)]
pub struct SolutionChecks {
    pub terminal_exact: bool,
    pub min_p: f64,
    pub nonnegative: bool,
    /// CaseIII: smallest diagnostic `c` with `min P ≥ η e^{-cT}`; zero when
    /// `min P ≥ η` already.
    pub positivity_c: Option<f64>,
    pub uniformly_positive: Option<bool>,
    pub comparison_ok: Option<bool>,
}

impl SolutionChecks {
    pub fn pass(&self) -> bool {
        self.terminal_exact
            && self.nonnegative
            && self.uniformly_positive.unwrap_or(true)
            && self.comparison_ok.unwrap_or(true)
    }
}

/// Runs terminal exactness, nonnegativity / uniform positivity and, when an
/// upper-bound path is supplied, the comparison bound `P ≤ P̄`.
pub fn solution_checks(
    model: &HomogeneousModel,
    sol: &BsdeSolution,
    upper: Option<&[f64]>,
) -> SolutionChecks {
    let tol = 1e-9;
    let g = model.coeffs.terminal(sol.branch);
    let terminal_exact = sol.p[sol.grid.n].iter().all(|&x| x == g)
        || matches!(sol.mode, SolveMode::Tree { .. });
    let min_p = sol
        .p
        .iter()
        .flat_map(|layer| layer.iter().cloned())
        .fold(f64::INFINITY, f64::min);
    let nonnegative = min_p >= -tol;
    let (positivity_c, uniformly_positive) = if model.regime == Regime::CaseIII {
        let eta = model.regime_params.eta;
        let c = if min_p >= eta {
            0.0
        } else if min_p > 0.0 {
            (eta / min_p).ln() / model.horizon
        } else {
            f64::INFINITY
        };
        (Some(c), Some(min_p > 0.0 && c.is_finite()))
    } else {
        (None, None)
    };
    let comparison_ok = upper.map(|ub| {
        sol.p
            .iter()
            .enumerate()
            .all(|(k, layer)| layer.iter().all(|&x| x <= ub[k] + 1e-8))
    });
    SolutionChecks {
        terminal_exact,
        min_p,
        nonnegative,
        positivity_c,
        uniformly_positive,
        comparison_ok,
    }
}

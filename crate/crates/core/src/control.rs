//! Optimal feedback construction and forward verification.
//!
//! The candidate control is the piecewise-linear feedback
//! `u*(t, X) = v̂₁,ₜX⁺ + v̂₂,ₜX⁻` built from the two branch solutions. The
//! closed-loop state never crosses zero, so it is simulated exactly through
//! its exponential representation: per grid cell the log-state receives
//! `(b - ½|σ|²)Δt + σᵀΔW` with the cell's frozen control. Costs use the
//! left-endpoint rule on the same grid, exploiting
//! `f(X, u*) = |X|ᵖ f(±1, v̂)`.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::bsde::{BsdeSolution, SolveMode, TimeGrid};
use crate::driver::Branch;
use crate::error::{Error, Result};
use crate::model::HomogeneousModel;
use crate::rng::{self, pairwise_sum, SmallRng};

/// The pair of cone-valued node processes defining the feedback.
#[derive(Debug, Clone)]
pub struct FeedbackControl {
    pub grid: TimeGrid,
    pub v_hat_plus: Vec<DVector<f64>>,
    pub v_hat_minus: Vec<DVector<f64>>,
}

impl FeedbackControl {
    /// `u(t_k, x) = v̂₁,ₖ x⁺ + v̂₂,ₖ x⁻`; degree-1 positively homogeneous in
    /// `x` by construction.
    pub fn eval(&self, k: usize, x: f64) -> DVector<f64> {
        let xp = x.max(0.0);
        let xm = (-x).max(0.0);
        &self.v_hat_plus[k] * xp + &self.v_hat_minus[k] * xm
    }

    fn branch_nodes(&self, branch: Branch) -> &[DVector<f64>] {
        match branch {
            Branch::Plus => &self.v_hat_plus,
            Branch::Minus => &self.v_hat_minus,
        }
    }
}

/// Copies the per-node argmins out of the two branch solutions and validates
/// cone membership. Deterministic-mode solutions only.
pub fn build_feedback(
    model: &HomogeneousModel,
    sol_plus: &BsdeSolution,
    sol_minus: &BsdeSolution,
) -> Result<FeedbackControl> {
    if sol_plus.branch != Branch::Plus || sol_minus.branch != Branch::Minus {
        return Err(Error::Config("branch tags are swapped".into()));
    }
    if sol_plus.grid != sol_minus.grid {
        return Err(Error::Config("solutions live on different grids".into()));
    }
    if sol_plus.mode != SolveMode::Deterministic || sol_minus.mode != SolveMode::Deterministic {
        return Err(Error::Config(
            "feedback construction needs deterministic-mode solutions".into(),
        ));
    }
    let collect = |sol: &BsdeSolution| -> Result<Vec<DVector<f64>>> {
        sol.v_hat
            .iter()
            .map(|layer| {
                let v = layer[0].clone();
                let tol = 1e-7 * (1.0 + v.norm());
                if !model.cone.contains(&v, tol)? {
                    return Err(Error::ConstraintViolation(format!(
                        "stored argmin {v:?} left the cone"
                    )));
                }
                Ok(v)
            })
            .collect()
    };
    Ok(FeedbackControl {
        grid: sol_plus.grid,
        v_hat_plus: collect(sol_plus)?,
        v_hat_minus: collect(sol_minus)?,
    })
}

/// Simulation switches; both default off.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    /// Record full log-state paths (memory heavy; export only).
    pub record_paths: bool,
    /// Antithetic variates: odd paths reuse the negated normals of their
    /// even predecessor.
    pub antithetic: bool,
}

/// Forward paths of the closed-loop state with their realized costs.
#[derive(Debug, Clone)]
pub struct SimulationBatch {
    pub paths: usize,
    pub seed: u64,
    pub x0: f64,
    /// Per-path running cost `Σ_k |X_k|ᵖ f(sign, v̂_k) Δt`.
    pub running_cost: Vec<f64>,
    /// Per-path terminal cost `|X_T|ᵖ g(sign)`.
    pub terminal_cost: Vec<f64>,
    /// Per-path terminal `log|X_T|` (`-inf` when `x0 = 0`).
    pub terminal_log_abs: Vec<f64>,
    /// Full `log|X|` trajectories when recording was requested.
    pub log_paths: Option<Vec<Vec<f64>>>,
    pub j_mean: f64,
    pub j_stderr: f64,
}

/// Simulates the closed-loop state exactly via the exponential representation
/// and accumulates per-path costs. Gaussian increments come from a
/// counter-based generator keyed by `(seed, path, step)`, so the batch is
/// independent of scheduling and reproducible bit-for-bit.
pub fn simulate_state(
    feedback: &FeedbackControl,
    model: &HomogeneousModel,
    x0: f64,
    paths: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<SimulationBatch> {
    if paths == 0 {
        return Err(Error::Config("need at least one path".into()));
    }
    if feedback.grid.horizon != model.horizon {
        return Err(Error::Config("feedback grid does not match the model horizon".into()));
    }
    let grid = feedback.grid;
    let n_steps = grid.n;
    let dt = grid.dt();
    let p = model.p;

    if x0 == 0.0 {
        // All coefficients vanish at the origin: the state and costs are 0.
        return Ok(SimulationBatch {
            paths,
            seed,
            x0,
            running_cost: vec![0.0; paths],
            terminal_cost: vec![0.0; paths],
            terminal_log_abs: vec![f64::NEG_INFINITY; paths],
            log_paths: opts.record_paths.then(|| vec![vec![f64::NEG_INFINITY; n_steps + 1]; paths]),
            j_mean: 0.0,
            j_stderr: 0.0,
        });
    }

    let branch = if x0 > 0.0 { Branch::Plus } else { Branch::Minus };
    let nodes = feedback.branch_nodes(branch);

    // Per-cell frozen coefficients of log|X|. The full coefficients are
    // b(X,u) = |X|·b(±1,v) and σ(X,u) = |X|·σ(±1,v) with |X| = ±X, so the
    // log-state drift and diffusion carry the branch sign.
    let branch_sign = if x0 > 0.0 { 1.0 } else { -1.0 };
    let mut cell_b = Vec::with_capacity(n_steps);
    let mut cell_sigma = Vec::with_capacity(n_steps);
    let mut cell_f = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let t = grid.node(k);
        let v = &nodes[k];
        cell_b.push(branch_sign * model.coeffs.drift(branch, t, v, model.horizon));
        cell_sigma.push(model.coeffs.volatility(branch, t, v, model.horizon) * branch_sign);
        cell_f.push(model.coeffs.running_cost(branch, t, v, p, model.horizon));
    }
    let g = model.coeffs.terminal(branch);
    let log_x0 = x0.abs().ln();
    let sqrt_dt = dt.sqrt();

    let results: Vec<(f64, f64, f64, Option<Vec<f64>>)> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let (key_path, flip) = if opts.antithetic {
                ((i / 2) as u64, if i % 2 == 1 { -1.0 } else { 1.0 })
            } else {
                (i as u64, 1.0)
            };
            let mut log_abs = log_x0;
            let mut running = 0.0;
            let mut trace = opts.record_paths.then(|| {
                let mut v = Vec::with_capacity(n_steps + 1);
                v.push(log_abs);
                v
            });
            for k in 0..n_steps {
                running += (p * log_abs).exp() * cell_f[k] * dt;
                let sigma = &cell_sigma[k];
                let mut diffusion = 0.0;
                for j in 0..model.n {
                    let z = flip * rng::keyed_normal(seed, key_path, k as u64, j as u64);
                    diffusion += sigma[j] * z * sqrt_dt;
                }
                log_abs += (cell_b[k] - 0.5 * sigma.norm_squared()) * dt + diffusion;
                if let Some(tr) = trace.as_mut() {
                    tr.push(log_abs);
                }
            }
            let terminal = (p * log_abs).exp() * g;
            (running, terminal, log_abs, trace)
        })
        .collect();

    let mut running_cost = Vec::with_capacity(paths);
    let mut terminal_cost = Vec::with_capacity(paths);
    let mut terminal_log_abs = Vec::with_capacity(paths);
    let mut log_paths = opts.record_paths.then(|| Vec::with_capacity(paths));
    for (r, t, l, trace) in results {
        running_cost.push(r);
        terminal_cost.push(t);
        terminal_log_abs.push(l);
        if let (Some(all), Some(tr)) = (log_paths.as_mut(), trace) {
            all.push(tr);
        }
    }
    let (j_mean, j_stderr) = mean_stderr(&running_cost, &terminal_cost);
    Ok(SimulationBatch {
        paths,
        seed,
        x0,
        running_cost,
        terminal_cost,
        terminal_log_abs,
        log_paths,
        j_mean,
        j_stderr,
    })
}

fn mean_stderr(running: &[f64], terminal: &[f64]) -> (f64, f64) {
    let n = running.len();
    let totals: Vec<f64> = running.iter().zip(terminal).map(|(r, t)| r + t).collect();
    let mean = pairwise_sum(&totals) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = totals.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Sample mean and standard error of the realized cost of a batch.
pub fn estimate_cost(batch: &SimulationBatch) -> (f64, f64) {
    (batch.j_mean, batch.j_stderr)
}

/// The closed-form optimal value `P₁,₀ (x₀⁺)ᵖ + P₂,₀ (x₀⁻)ᵖ`.
pub fn value_function(sol_plus: &BsdeSolution, sol_minus: &BsdeSolution, p: f64, x0: f64) -> f64 {
    let xp = x0.max(0.0);
    let xm = (-x0).max(0.0);
    sol_plus.p_at_origin() * xp.powf(p) + sol_minus.p_at_origin() * xm.powf(p)
}

/// Exact expectation of the discrete-control cost under deterministic
/// coefficients: `E|X_{t_k}|ᵖ` has the closed form
/// `|x₀|ᵖ exp(Σ_{j<k}(p b_j + ½p(p-1)|σ_j|²)Δt)`, so the Monte Carlo target
/// can be computed without sampling. Used for the discretization allowance.
pub fn expected_cost_deterministic(
    feedback: &FeedbackControl,
    model: &HomogeneousModel,
    x0: f64,
) -> f64 {
    if x0 == 0.0 {
        return 0.0;
    }
    let branch = if x0 > 0.0 { Branch::Plus } else { Branch::Minus };
    let branch_sign = if x0 > 0.0 { 1.0 } else { -1.0 };
    let nodes = feedback.branch_nodes(branch);
    let grid = feedback.grid;
    let dt = grid.dt();
    let p = model.p;
    let mut log_moment = p * x0.abs().ln();
    let mut total = 0.0;
    for k in 0..grid.n {
        let t = grid.node(k);
        let v = &nodes[k];
        let f = model.coeffs.running_cost(branch, t, v, p, model.horizon);
        total += log_moment.exp() * f * dt;
        // Log-state drift carries the branch sign, as in `simulate_state`.
        let b = branch_sign * model.coeffs.drift(branch, t, v, model.horizon);
        let s2 = model.coeffs.volatility(branch, t, v, model.horizon).norm_squared();
        log_moment += (p * b + 0.5 * p * (p - 1.0) * s2) * dt;
    }
    total + log_moment.exp() * model.coeffs.terminal(branch)
}

/// Builds an admissible piecewise-linear competitor feedback from per-node
/// processes, validating cone membership, then simulates and costs it through
/// the same code path as the optimum.
pub fn evaluate_competitor(
    v1: Vec<DVector<f64>>,
    v2: Vec<DVector<f64>>,
    model: &HomogeneousModel,
    grid: TimeGrid,
    x0: f64,
    paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    for v in v1.iter().chain(v2.iter()) {
        let tol = 1e-7 * (1.0 + v.norm());
        if !model.cone.contains(v, tol)? {
            return Err(Error::ConstraintViolation(format!(
                "competitor node {v:?} not in Γ"
            )));
        }
    }
    let feedback = FeedbackControl {
        grid,
        v_hat_plus: v1,
        v_hat_minus: v2,
    };
    let batch = simulate_state(&feedback, model, x0, paths, seed, SimOptions::default())?;
    Ok(estimate_cost(&batch))
}

/// Built-in competitor families for suboptimality sweeps.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompetitorSpec {
    /// The zero control.
    Zero,
    /// The optimal feedback scaled by a factor.
    ScaledOptimum { factor: f64 },
    /// The optimal feedback shifted by `δ e₁` and projected back into Γ.
    Perturbed { delta: f64 },
    /// A random cone ray with the given magnitude.
    RandomRay { seed: u64, magnitude: f64 },
}

/// Materializes a competitor as per-node processes on the feedback's grid.
pub fn materialize_competitor(
    spec: &CompetitorSpec,
    optimum: &FeedbackControl,
    model: &HomogeneousModel,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let n_nodes = optimum.v_hat_plus.len();
    let make = |nodes: &[DVector<f64>]| -> Result<Vec<DVector<f64>>> {
        match spec {
            CompetitorSpec::Zero => Ok(vec![DVector::zeros(model.m); n_nodes]),
            CompetitorSpec::ScaledOptimum { factor } => {
                // Cones are closed under nonnegative scaling only.
                if *factor < 0.0 {
                    return Err(Error::Config("scale factor must be nonnegative".into()));
                }
                Ok(nodes.iter().map(|v| v * *factor).collect())
            }
            CompetitorSpec::Perturbed { delta } => nodes
                .iter()
                .map(|v| {
                    let mut shifted = v.clone();
                    shifted[0] += delta;
                    model.cone.project(&shifted)
                })
                .collect(),
            CompetitorSpec::RandomRay { seed, magnitude } => {
                let mut rng = SmallRng::new(*seed);
                let ray = model.sample_cone_point(&mut rng, *magnitude);
                Ok(vec![ray; n_nodes])
            }
        }
    };
    Ok((make(&optimum.v_hat_plus)?, make(&optimum.v_hat_minus)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::regression_battery;
    use crate::bsde::{solve_deterministic, SolverConfig};
    use crate::cone::ConeSpec;
    use approx::assert_relative_eq;

    fn battery_model(name: &str) -> HomogeneousModel {
        regression_battery()
            .into_iter()
            .find(|e| e.name == name)
            .unwrap()
            .model
    }

    fn solved_feedback(model: &HomogeneousModel, n: usize) -> FeedbackControl {
        let grid = TimeGrid::new(n, model.horizon).unwrap();
        let cfg = SolverConfig::default();
        let plus = solve_deterministic(model, Branch::Plus, grid, &cfg).unwrap();
        let minus = solve_deterministic(model, Branch::Minus, grid, &cfg).unwrap();
        build_feedback(model, &plus, &minus).unwrap()
    }

    fn zero_feedback(model: &HomogeneousModel, n: usize) -> FeedbackControl {
        let grid = TimeGrid::new(n, model.horizon).unwrap();
        FeedbackControl {
            grid,
            v_hat_plus: vec![DVector::zeros(model.m); n + 1],
            v_hat_minus: vec![DVector::zeros(model.m); n + 1],
        }
    }

    #[test]
    fn feedback_eval_is_piecewise_linear_and_homogeneous() {
        let model = battery_model("lq_scalar_unconstrained");
        let fb = solved_feedback(&model, 20);
        let u1 = fb.eval(3, 2.0);
        let u2 = fb.eval(3, 1.0);
        // Exact degree-1 homogeneity by the formula.
        assert_eq!(u1, &u2 * 2.0);
        assert_eq!(fb.eval(3, -1.5), &fb.v_hat_minus[3] * 1.5);
        assert_eq!(fb.eval(3, 0.0), DVector::zeros(1));
    }

    #[test]
    fn build_feedback_rejects_swapped_branches() {
        let model = battery_model("lq_scalar_unconstrained");
        let grid = TimeGrid::new(10, model.horizon).unwrap();
        let cfg = SolverConfig::default();
        let plus = solve_deterministic(&model, Branch::Plus, grid, &cfg).unwrap();
        let minus = solve_deterministic(&model, Branch::Minus, grid, &cfg).unwrap();
        assert!(build_feedback(&model, &minus, &plus).is_err());
    }

    #[test]
    fn build_feedback_rejects_cone_violation() {
        let model = battery_model("orthant_p2");
        let grid = TimeGrid::new(10, model.horizon).unwrap();
        let cfg = SolverConfig::default();
        let plus = solve_deterministic(&model, Branch::Plus, grid, &cfg).unwrap();
        let mut bad = plus.clone();
        bad.branch = Branch::Minus;
        for layer in &mut bad.v_hat {
            layer[0] = DVector::from_element(1, -1.0);
        }
        assert!(matches!(
            build_feedback(&model, &plus, &bad),
            Err(Error::ConstraintViolation(_))
        ));
    }

    #[test]
    fn frozen_dynamics_keep_state_and_cost_constant() {
        // b = σ = f = 0 → X ≡ x0 and J = g·|x0|^p with zero spread.
        let model = battery_model("zero_driver");
        let fb = zero_feedback(&model, 16);
        let batch =
            simulate_state(&fb, &model, 1.5, 64, 3, SimOptions::default()).unwrap();
        let g = model.coeffs.terminal(Branch::Plus);
        assert_relative_eq!(batch.j_mean, g * 1.5f64.powi(2), epsilon = 1e-12);
        assert_eq!(batch.j_stderr, 0.0);
        for &l in &batch.terminal_log_abs {
            assert_relative_eq!(l, 1.5f64.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn deterministic_exponential_growth() {
        // σ = 0, b = a: X_T = x0·e^{aT} up to rounding in the dt sum.
        let model = battery_model("pure_drift");
        let fb = zero_feedback(&model, 100);
        let batch =
            simulate_state(&fb, &model, -2.0, 8, 0, SimOptions::default()).unwrap();
        for &l in &batch.terminal_log_abs {
            assert_relative_eq!(l, 2.0f64.ln() + 0.3, epsilon = 1e-12);
        }
        // Minus branch: terminal cost g·|X_T|^p.
        let expect = (2.0f64 * 0.3f64.exp()).powi(2);
        assert_relative_eq!(batch.j_mean, expect, epsilon = 1e-10);
    }

    #[test]
    fn sign_preservation_and_seed_determinism() {
        let model = battery_model("lq_scalar_unconstrained");
        let fb = solved_feedback(&model, 50);
        let b1 = simulate_state(&fb, &model, -1.0, 2000, 42, SimOptions::default()).unwrap();
        let b2 = simulate_state(&fb, &model, -1.0, 2000, 42, SimOptions::default()).unwrap();
        let b3 = simulate_state(&fb, &model, -1.0, 2000, 43, SimOptions::default()).unwrap();
        // Exponential representation keeps log|X| finite: sign never flips.
        assert!(b1.terminal_log_abs.iter().all(|l| l.is_finite()));
        // Bit-for-bit reproducibility at equal seeds.
        assert_eq!(b1.j_mean.to_bits(), b2.j_mean.to_bits());
        assert_eq!(b1.running_cost, b2.running_cost);
        assert_ne!(b1.j_mean.to_bits(), b3.j_mean.to_bits());
    }

    #[test]
    fn antithetic_pairs_mirror_the_noise() {
        let model = battery_model("lq_scalar_unconstrained");
        let fb = zero_feedback(&model, 10);
        let batch = simulate_state(
            &fb,
            &model,
            1.0,
            4,
            9,
            SimOptions { record_paths: false, antithetic: true },
        )
        .unwrap();
        // With constant coefficients the antithetic pair's log-terminals
        // average to the deterministic part exactly.
        let sigma2 = 0.2f64 * 0.2;
        let det = (0.1 - 0.5 * sigma2) * model.horizon;
        for pair in batch.terminal_log_abs.chunks(2) {
            assert_relative_eq!(0.5 * (pair[0] + pair[1]), det, epsilon = 1e-12);
        }
    }

    #[test]
    fn x0_zero_gives_identically_zero_batch() {
        let model = battery_model("lq_scalar_unconstrained");
        let fb = solved_feedback(&model, 10);
        let batch = simulate_state(&fb, &model, 0.0, 5, 0, SimOptions::default()).unwrap();
        assert_eq!(batch.j_mean, 0.0);
        assert_eq!(batch.j_stderr, 0.0);
        assert!(batch.running_cost.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn value_function_basics_and_scaling() {
        let model = battery_model("orthant_p25_asymmetric");
        let grid = TimeGrid::new(50, model.horizon).unwrap();
        let cfg = SolverConfig::default();
        let plus = solve_deterministic(&model, Branch::Plus, grid, &cfg).unwrap();
        let minus = solve_deterministic(&model, Branch::Minus, grid, &cfg).unwrap();
        let p = model.p;
        assert_eq!(value_function(&plus, &minus, p, 0.0), 0.0);
        assert_eq!(value_function(&plus, &minus, p, -1.0), minus.p_at_origin());
        assert_eq!(value_function(&plus, &minus, p, 1.0), plus.p_at_origin());
        let v1 = value_function(&plus, &minus, p, 1.3);
        let v2 = value_function(&plus, &minus, p, 2.0 * 1.3);
        assert_relative_eq!(v2, 2.0f64.powf(p) * v1, epsilon = 1e-12);
    }

    #[test]
    fn competitor_identical_to_optimum_matches_bitwise() {
        let model = battery_model("lq_scalar_unconstrained");
        let fb = solved_feedback(&model, 40);
        let batch = simulate_state(&fb, &model, 1.0, 500, 11, SimOptions::default()).unwrap();
        let (m1, s1) = estimate_cost(&batch);
        let (m2, s2) = evaluate_competitor(
            fb.v_hat_plus.clone(),
            fb.v_hat_minus.clone(),
            &model,
            fb.grid,
            1.0,
            500,
            11,
        )
        .unwrap();
        assert_eq!(m1.to_bits(), m2.to_bits());
        assert_eq!(s1.to_bits(), s2.to_bits());
    }

    #[test]
    fn competitor_outside_cone_rejected() {
        let model = battery_model("orthant_p2");
        let n = 10;
        let grid = TimeGrid::new(n, model.horizon).unwrap();
        let bad = vec![DVector::from_element(1, -1.0); n + 1];
        let ok = vec![DVector::zeros(1); n + 1];
        assert!(evaluate_competitor(bad, ok, &model, grid, 1.0, 4, 0).is_err());
    }

    #[test]
    fn deterministic_expectation_matches_noiseless_simulation() {
        // σ = 0 → every path is the deterministic one, so the Monte Carlo
        // mean equals the closed-form discrete expectation exactly.
        let model = battery_model("pure_drift");
        let fb = zero_feedback(&model, 64);
        let batch = simulate_state(&fb, &model, 3.0, 4, 0, SimOptions::default()).unwrap();
        let expect = expected_cost_deterministic(&fb, &model, 3.0);
        assert_relative_eq!(batch.j_mean, expect, epsilon = 1e-10);
    }

    #[test]
    fn deterministic_expectation_is_the_monte_carlo_target() {
        let model = battery_model("lq_scalar_unconstrained");
        let fb = solved_feedback(&model, 50);
        let batch =
            simulate_state(&fb, &model, 1.0, 20_000, 1, SimOptions::default()).unwrap();
        let expect = expected_cost_deterministic(&fb, &model, 1.0);
        let z = (batch.j_mean - expect).abs() / batch.j_stderr;
        assert!(z < 4.0, "z = {z}: mean {} vs exact {expect}", batch.j_mean);
    }

    #[test]
    fn materialize_competitors() {
        let model = battery_model("orthant_p2");
        let fb = solved_feedback(&model, 10);
        let (z1, z2) =
            materialize_competitor(&CompetitorSpec::Zero, &fb, &model).unwrap();
        assert!(z1.iter().chain(z2.iter()).all(|v| v.norm() == 0.0));

        let (s1, _s2) = materialize_competitor(
            &CompetitorSpec::ScaledOptimum { factor: 0.5 },
            &fb,
            &model,
        )
        .unwrap();
        assert_eq!(s1[0], &fb.v_hat_plus[0] * 0.5);
        assert!(negative_scale_errs(&fb, &model));

        let (p1, _p2) = materialize_competitor(
            &CompetitorSpec::Perturbed { delta: -5.0 },
            &fb,
            &model,
        )
        .unwrap();
        // Projection back into the orthant clips negative entries.
        assert!(p1.iter().all(|v| v[0] >= 0.0));

        let (r1, r2) = materialize_competitor(
            &CompetitorSpec::RandomRay { seed: 5, magnitude: 1.0 },
            &fb,
            &model,
        )
        .unwrap();
        assert!(r1.iter().all(|v| v == &r1[0]));
        let tol = 1e-9;
        for v in r1.iter().chain(r2.iter()) {
            assert!(model.cone.contains(v, tol).unwrap());
        }
    }

    fn negative_scale_errs(fb: &FeedbackControl, model: &HomogeneousModel) -> bool {
        materialize_competitor(&CompetitorSpec::ScaledOptimum { factor: -1.0 }, fb, model)
            .is_err()
    }
}

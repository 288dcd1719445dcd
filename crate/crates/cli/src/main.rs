//! Command-line front end: loads experiment configs, runs the
//! solve / simulate / verify / compare / check pipelines and writes result
//! tables.
//!
//! Exit codes: 0 success, 2 config parse error, 3 solver error,
//! 4 invariant violation, 5 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use homcone_core::bsde::{
    solve_deterministic, solve_tree, solve_upper_bound, BsdeSolution, SolverConfig, TimeGrid,
    TreeTerminal,
};
use homcone_core::config::ExperimentConfig;
use homcone_core::control::{
    build_feedback, estimate_cost, evaluate_competitor, expected_cost_deterministic,
    materialize_competitor, simulate_state, value_function, CompetitorSpec, FeedbackControl,
    SimOptions,
};
use homcone_core::driver::Branch;
use homcone_core::export::{
    model_hash, read_solution_csv, solution_metadata, write_batch_csv, write_compare_csv,
    write_json, write_solution_csv, CompetitorSummary, VerificationSummary,
};
use homcone_core::model::HomogeneousModel;
use homcone_core::rng::SmallRng;
use homcone_core::{Error, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_INVARIANT: u8 = 4;
const EXIT_VERIFICATION: u8 = 5;

#[derive(Parser)]
#[command(
    name = "homcone",
    about = "Solver and verification harness for cone-constrained homogeneous stochastic control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo path count (overrides the config).
    #[arg(long)]
    paths: Option<usize>,
    /// Simulation seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Time-grid size N (overrides the config).
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve both branch BSDEs and write solution tables.
    Solve(CommonArgs),
    /// Solve, build the optimal feedback and simulate closed-loop paths.
    Simulate(CommonArgs),
    /// Full verification: simulated cost vs the closed-form value.
    Verify(CommonArgs),
    /// Evaluate competitor controls against the optimal value.
    Compare(CommonArgs),
    /// Regime and model diagnostics.
    Check(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, fn(&Ctx) -> Result<u8>) = match &cli.command {
        Command::Solve(a) => (a, cmd_solve),
        Command::Simulate(a) => (a, cmd_simulate),
        Command::Verify(a) => (a, cmd_verify),
        Command::Compare(a) => (a, cmd_compare),
        Command::Check(a) => (a, cmd_check),
    };
    match prepare(args).and_then(|ctx| run(&ctx)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) => EXIT_CONFIG,
        Error::InvalidModel(_) | Error::ConstraintViolation(_) | Error::DimensionMismatch { .. } => {
            EXIT_INVARIANT
        }
        _ => EXIT_SOLVER,
    }
}

struct Ctx {
    config: ExperimentConfig,
    model: HomogeneousModel,
    model_text: String,
    out_dir: PathBuf,
}

impl Ctx {
    fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.config.grid.n, self.model.horizon)
    }

    fn wants(&self, fmt: &str) -> bool {
        self.config.outputs.formats.iter().any(|f| f == fmt)
    }
}

fn prepare(args: &CommonArgs) -> Result<Ctx> {
    let mut config = ExperimentConfig::from_path(&args.config)?;
    if let Some(out) = &args.out {
        config.outputs.directory = out.clone();
    }
    if let Some(paths) = args.paths {
        config.simulation.paths = paths;
    }
    if let Some(seed) = args.seed {
        config.simulation.seed = seed;
    }
    if let Some(n) = args.grid {
        config.grid.n = n;
    }
    config.validate()?;
    let model_text = std::fs::read_to_string(&config.model)?;
    let model = config.load_model()?;
    let out_dir = config.outputs.directory.clone();
    std::fs::create_dir_all(&out_dir)?;
    Ok(Ctx {
        config,
        model,
        model_text,
        out_dir,
    })
}

fn solve_branch(ctx: &Ctx, branch: Branch) -> Result<BsdeSolution> {
    let grid = ctx.grid()?;
    let cfg = SolverConfig::default();
    match ctx.config.grid.mode.as_str() {
        "tree" => {
            let depth = ctx.config.grid.tree_depth.unwrap_or(ctx.config.grid.n);
            let tree_grid = TimeGrid::new(depth, ctx.model.horizon)?;
            solve_tree(
                &ctx.model,
                branch,
                tree_grid,
                TreeTerminal::ModelTerminal,
                &cfg,
            )
        }
        _ => solve_deterministic(&ctx.model, branch, grid, &cfg),
    }
}

fn regime_check_pass(model: &HomogeneousModel) -> bool {
    sampled_regime_diag(model).pass()
}

fn sampled_regime_diag(model: &HomogeneousModel) -> homcone_core::model::RegimeDiagnostics {
    let mut rng = SmallRng::new(1);
    let mut grid = Vec::new();
    for i in 0..=4 {
        let t = model.horizon * i as f64 / 4.0;
        for &scale in &[0.3, 1.0, 3.0] {
            for _ in 0..10 {
                grid.push((t, model.sample_cone_point(&mut rng, scale)));
            }
        }
    }
    model.check_regime(&grid)
}

/// Solves both branches, runs the invariant checks and writes the tables.
fn solve_pipeline(ctx: &Ctx) -> Result<(BsdeSolution, BsdeSolution)> {
    let mut sols = Vec::with_capacity(2);
    for branch in [Branch::Plus, Branch::Minus] {
        let sol = solve_branch(ctx, branch)?;
        let upper = match sol.mode {
            homcone_core::bsde::SolveMode::Deterministic => {
                Some(solve_upper_bound(&ctx.model, branch, sol.grid)?)
            }
            _ => None,
        };
        let checks = homcone_core::bsde::solution_checks(&ctx.model, &sol, upper.as_deref());
        if !checks.pass() {
            return Err(Error::ConstraintViolation(format!(
                "{branch:?} branch failed invariant checks: {checks:?}"
            )));
        }
        let tag = match branch {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        };
        if ctx.wants("csv") {
            write_solution_csv(&ctx.out_dir.join(format!("solution_{tag}.csv")), &sol)?;
        }
        if ctx.wants("json") {
            let meta = solution_metadata(
                &sol,
                &ctx.model,
                &ctx.model_text,
                regime_check_pass(&ctx.model),
            );
            write_json(&ctx.out_dir.join(format!("solution_{tag}.json")), &meta)?;
        }
        sols.push(sol);
    }
    let minus = sols.pop().expect("two solutions");
    let plus = sols.pop().expect("two solutions");
    Ok((plus, minus))
}

fn cmd_solve(ctx: &Ctx) -> Result<u8> {
    let (plus, minus) = solve_pipeline(ctx)?;
    println!(
        "solved: P1(0) = {}, P2(0) = {} (N = {}, mode = {})",
        plus.p_at_origin(),
        minus.p_at_origin(),
        ctx.config.grid.n,
        ctx.config.grid.mode
    );
    Ok(0)
}

fn feedback_for(ctx: &Ctx, plus: &BsdeSolution, minus: &BsdeSolution) -> Result<FeedbackControl> {
    match &ctx.config.control_override {
        None => build_feedback(&ctx.model, plus, minus),
        Some(ov) => {
            let load = |path: &Path| -> Result<Vec<DVector<f64>>> {
                let rows = read_solution_csv(path)?;
                if rows.len() != ctx.config.grid.n + 1 {
                    return Err(Error::Config(format!(
                        "control override {path:?} has {} rows, grid needs {}",
                        rows.len(),
                        ctx.config.grid.n + 1
                    )));
                }
                Ok(rows
                    .into_iter()
                    .map(|r| DVector::from_vec(r.v_hat))
                    .collect())
            };
            let v_plus = load(&ov.plus)?;
            let v_minus = load(&ov.minus)?;
            for v in v_plus.iter().chain(v_minus.iter()) {
                let tol = 1e-7 * (1.0 + v.norm());
                if !ctx.model.cone.contains(v, tol)? {
                    return Err(Error::ConstraintViolation(
                        "override control leaves the cone".into(),
                    ));
                }
            }
            Ok(FeedbackControl {
                grid: plus.grid,
                v_hat_plus: v_plus,
                v_hat_minus: v_minus,
            })
        }
    }
}

fn cmd_simulate(ctx: &Ctx) -> Result<u8> {
    let (plus, minus) = solve_pipeline(ctx)?;
    let feedback = feedback_for(ctx, &plus, &minus)?;
    let sim = &ctx.config.simulation;
    // Full-path recording is memory heavy; only keep it when the trajectory
    // table was actually requested and the batch is small.
    let record = ctx.wants("csv") && sim.paths * (ctx.config.grid.n + 1) <= 2_000_000;
    for (i, &x0) in sim.x0.iter().enumerate() {
        let batch = simulate_state(
            &feedback,
            &ctx.model,
            x0,
            sim.paths,
            sim.seed,
            SimOptions {
                record_paths: record,
                antithetic: sim.antithetic,
            },
        )?;
        let (j_mean, j_stderr) = estimate_cost(&batch);
        let value = value_function(&plus, &minus, ctx.model.p, x0);
        println!("x0 = {x0}: J_mean = {j_mean}, J_stderr = {j_stderr}, value = {value}");
        if record {
            write_batch_csv(
                &ctx.out_dir.join(format!("batch_{i}.csv")),
                &batch,
                &feedback,
                &ctx.model,
            )?;
        }
        if ctx.wants("json") {
            let summary = VerificationSummary {
                x0,
                value,
                j_mean,
                j_stderr,
                gap: j_mean - value,
                z_score: if j_stderr > 0.0 {
                    (j_mean - value).abs() / j_stderr
                } else {
                    0.0
                },
                allowance: 0.0,
                paths: sim.paths,
                seed: sim.seed,
                pass: true,
            };
            write_json(&ctx.out_dir.join(format!("simulation_{i}.json")), &summary)?;
        }
    }
    Ok(0)
}

fn cmd_verify(ctx: &Ctx) -> Result<u8> {
    let (plus, minus) = solve_pipeline(ctx)?;
    let feedback = feedback_for(ctx, &plus, &minus)?;
    let sim = &ctx.config.simulation;
    let mut summaries = Vec::new();
    let mut all_pass = true;

    // Richardson-style two-grid pre-pass for the discretization allowance:
    // the exact discrete expectation J_det of the SOLVER's feedback is
    // computed on the working grid and a doubled grid; the extrapolated bias
    // |J_det(N) - value| ≈ 2|J_det(N) - J_det(2N)| separates scheme bias from
    // Monte Carlo noise. Deliberately based on the solver's own control, so a
    // shipped override cannot inflate its own allowance.
    let solver_feedback = build_feedback(&ctx.model, &plus, &minus)?;
    let fine_grid = TimeGrid::new(2 * ctx.config.grid.n, ctx.model.horizon)?;
    let solver_cfg = SolverConfig::default();
    let fine_plus = solve_deterministic(&ctx.model, Branch::Plus, fine_grid, &solver_cfg)?;
    let fine_minus = solve_deterministic(&ctx.model, Branch::Minus, fine_grid, &solver_cfg)?;
    let fine_feedback = build_feedback(&ctx.model, &fine_plus, &fine_minus)?;

    for &x0 in &sim.x0 {
        let value = value_function(&plus, &minus, ctx.model.p, x0);
        let batch = simulate_state(
            &feedback,
            &ctx.model,
            x0,
            sim.paths,
            sim.seed,
            SimOptions {
                record_paths: false,
                antithetic: sim.antithetic,
            },
        )?;
        let (j_mean, j_stderr) = estimate_cost(&batch);
        let j_coarse = expected_cost_deterministic(&solver_feedback, &ctx.model, x0);
        let j_fine = expected_cost_deterministic(&fine_feedback, &ctx.model, x0);
        let allowance = 2.0 * (j_coarse - j_fine).abs() + 1e-9 * (1.0 + value.abs());
        let gap = j_mean - value;
        let excess = (gap.abs() - allowance).max(0.0);
        let z_score = if j_stderr > 0.0 { excess / j_stderr } else { 0.0 };
        let pass = gap.abs() <= 3.0 * j_stderr + allowance;
        all_pass &= pass;
        println!(
            "x0 = {x0}: value = {value}, J_mean = {j_mean} ± {j_stderr}, \
             allowance = {allowance}, z = {z_score}, {}",
            if pass { "ok" } else { "FAIL" }
        );
        summaries.push(VerificationSummary {
            x0,
            value,
            j_mean,
            j_stderr,
            gap,
            z_score,
            allowance,
            paths: sim.paths,
            seed: sim.seed,
            pass,
        });
    }

    let competitor_rows = run_competitors(ctx, &feedback, &plus, &minus)?;
    all_pass &= competitor_rows.iter().all(|r| r.suboptimality_ok);

    if ctx.wants("json") {
        write_json(&ctx.out_dir.join("verification.json"), &summaries)?;
    }
    if ctx.wants("csv") && !competitor_rows.is_empty() {
        write_compare_csv(&ctx.out_dir.join("competitors.csv"), &competitor_rows)?;
    }
    Ok(if all_pass { 0 } else { EXIT_VERIFICATION })
}

fn competitor_label(spec: &CompetitorSpec) -> String {
    match spec {
        CompetitorSpec::Zero => "zero".into(),
        CompetitorSpec::ScaledOptimum { factor } => format!("scaled_{factor}"),
        CompetitorSpec::Perturbed { delta } => format!("perturbed_{delta}"),
        CompetitorSpec::RandomRay { seed, magnitude } => {
            format!("random_ray_{seed}_{magnitude}")
        }
    }
}

fn run_competitors(
    ctx: &Ctx,
    feedback: &FeedbackControl,
    plus: &BsdeSolution,
    minus: &BsdeSolution,
) -> Result<Vec<CompetitorSummary>> {
    let sim = &ctx.config.simulation;
    let mut rows = Vec::new();
    for spec in &ctx.config.competitors {
        let (v1, v2) = materialize_competitor(spec, feedback, &ctx.model)?;
        for &x0 in &sim.x0 {
            let value = value_function(plus, minus, ctx.model.p, x0);
            let (j_mean, j_stderr) =
                evaluate_competitor(v1.clone(), v2.clone(), &ctx.model, feedback.grid, x0, sim.paths, sim.seed)?;
            rows.push(CompetitorSummary {
                label: competitor_label(spec),
                x0,
                j_mean,
                j_stderr,
                gap: j_mean - value,
                suboptimality_ok: j_mean + 3.0 * j_stderr >= value,
            });
        }
    }
    Ok(rows)
}

fn cmd_compare(ctx: &Ctx) -> Result<u8> {
    if ctx.config.competitors.is_empty() {
        return Err(Error::Config("compare needs a nonempty competitors list".into()));
    }
    let (plus, minus) = solve_pipeline(ctx)?;
    let feedback = feedback_for(ctx, &plus, &minus)?;
    let rows = run_competitors(ctx, &feedback, &plus, &minus)?;
    for row in &rows {
        println!(
            "{} @ x0 = {}: J = {} ± {}, gap = {} ({})",
            row.label,
            row.x0,
            row.j_mean,
            row.j_stderr,
            row.gap,
            if row.suboptimality_ok { "ok" } else { "VIOLATES" }
        );
    }
    if ctx.wants("csv") {
        write_compare_csv(&ctx.out_dir.join("competitors.csv"), &rows)?;
    }
    Ok(if rows.iter().all(|r| r.suboptimality_ok) {
        0
    } else {
        EXIT_VERIFICATION
    })
}

fn cmd_check(ctx: &Ctx) -> Result<u8> {
    ctx.model.validate()?;
    let diag = sampled_regime_diag(&ctx.model);
    println!(
        "model hash {}: regime {:?}, {} sample points checked, {} violations, {} structural failures",
        model_hash(&ctx.model_text),
        ctx.model.regime,
        diag.points_checked,
        diag.violations.len(),
        diag.structural_failures.len()
    );
    for s in &diag.structural_failures {
        println!("structural: {s}");
    }
    for v in diag.violations.iter().take(10) {
        println!(
            "violation ({:?} branch, t = {}): {} (lhs {} > rhs {})",
            v.branch, v.t, v.what, v.lhs, v.rhs
        );
    }
    Ok(if diag.pass() { 0 } else { EXIT_INVARIANT })
}

//! Result serialization: solution tables, simulation batches and verification
//! summaries.
//!
//! CSV dialect: comma-separated, `.` decimal, header row, LF line endings.
//! Floats are written in shortest round-trip form, so reloading a solution
//! CSV reproduces the in-memory values bit-for-bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bsde::{BsdeSolution, SolveMode};
use crate::control::{FeedbackControl, SimulationBatch};
use crate::driver::Branch;
use crate::error::{Error, Result};
use crate::model::HomogeneousModel;

/// One row of a solution CSV: a `(time layer, node)` pair with its `P`, `Λ`
/// and argmin values.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRow {
    pub t: f64,
    pub node_index: usize,
    pub p: f64,
    pub lambda: Vec<f64>,
    pub v_hat: Vec<f64>,
}

/// Flattens a solution into rows, layer-major.
pub fn solution_rows(sol: &BsdeSolution) -> Vec<SolutionRow> {
    let mut rows = Vec::new();
    for (k, layer) in sol.p.iter().enumerate() {
        let t = sol.grid.node(k);
        for (j, &p) in layer.iter().enumerate() {
            rows.push(SolutionRow {
                t,
                node_index: j,
                p,
                lambda: sol.lambda[k][j].iter().copied().collect(),
                v_hat: sol.v_hat[k][j].iter().copied().collect(),
            });
        }
    }
    rows
}

/// Writes a solution CSV with columns `t, node_index, P, Λ₁.., v̂₁..`.
pub fn write_solution_csv(path: &Path, sol: &BsdeSolution) -> Result<()> {
    let n_lambda = sol.lambda[0][0].len();
    let n_vhat = sol.v_hat[0][0].len();
    let mut wtr = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["t".to_string(), "node_index".to_string(), "P".to_string()];
    header.extend((1..=n_lambda).map(|i| format!("lambda{i}")));
    header.extend((1..=n_vhat).map(|i| format!("v_hat{i}")));
    wtr.write_record(&header).map_err(csv_err)?;
    for row in solution_rows(sol) {
        let mut rec = vec![fmt(row.t), row.node_index.to_string(), fmt(row.p)];
        rec.extend(row.lambda.iter().map(|x| fmt(*x)));
        rec.extend(row.v_hat.iter().map(|x| fmt(*x)));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads back a solution CSV written by [`write_solution_csv`].
pub fn read_solution_csv(path: &Path) -> Result<Vec<SolutionRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    let n_lambda = header.iter().filter(|h| h.starts_with("lambda")).count();
    let n_vhat = header.iter().filter(|h| h.starts_with("v_hat")).count();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| Error::Config("short CSV record".into()))?
                .parse()
                .map_err(|e| Error::Config(format!("bad float in CSV: {e}")))
        };
        let node_index: usize = record
            .get(1)
            .ok_or_else(|| Error::Config("short CSV record".into()))?
            .parse()
            .map_err(|e| Error::Config(format!("bad node index: {e}")))?;
        rows.push(SolutionRow {
            t: field(0)?,
            node_index,
            p: field(2)?,
            lambda: (0..n_lambda).map(|i| field(3 + i)).collect::<Result<_>>()?,
            v_hat: (0..n_vhat)
                .map(|i| field(3 + n_lambda + i))
                .collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

/// Hex SHA-256 of a model file's text, recorded in metadata so results can be
/// traced to the exact inputs.
pub fn model_hash(config_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance metadata accompanying a solution CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionMetadata {
    pub model_hash: String,
    pub grid_n: usize,
    pub horizon: f64,
    pub mode: String,
    pub branch: String,
    pub regime: String,
    pub regime_check_pass: bool,
    pub p_at_origin: f64,
}

pub fn solution_metadata(
    sol: &BsdeSolution,
    model: &HomogeneousModel,
    model_text: &str,
    regime_check_pass: bool,
) -> SolutionMetadata {
    SolutionMetadata {
        model_hash: model_hash(model_text),
        grid_n: sol.grid.n,
        horizon: sol.grid.horizon,
        mode: match sol.mode {
            SolveMode::Deterministic => "deterministic".into(),
            SolveMode::Tree { depth } => format!("tree(depth={depth})"),
        },
        branch: match sol.branch {
            Branch::Plus => "plus".into(),
            Branch::Minus => "minus".into(),
        },
        regime: format!("{:?}", model.regime),
        regime_check_pass,
        p_at_origin: sol.p_at_origin(),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("JSON serialization: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes per-path trajectories with columns
/// `path_id, t, X, running_cost_so_far`. Requires a batch simulated with
/// path recording enabled.
pub fn write_batch_csv(
    path: &Path,
    batch: &SimulationBatch,
    feedback: &FeedbackControl,
    model: &HomogeneousModel,
) -> Result<()> {
    let logs = batch
        .log_paths
        .as_ref()
        .ok_or_else(|| Error::Config("batch was simulated without path recording".into()))?;
    let grid = feedback.grid;
    let dt = grid.dt();
    let sign = if batch.x0 < 0.0 { -1.0 } else { 1.0 };
    let branch = if batch.x0 < 0.0 { Branch::Minus } else { Branch::Plus };
    let nodes = if batch.x0 < 0.0 {
        &feedback.v_hat_minus
    } else {
        &feedback.v_hat_plus
    };
    // Running-cost rates per cell (left-endpoint rule, same as estimation).
    let rates: Vec<f64> = (0..grid.n)
        .map(|k| model.coeffs.running_cost(branch, grid.node(k), &nodes[k], model.p, model.horizon))
        .collect();

    let mut wtr = csv::Writer::from_path(path).map_err(csv_err)?;
    wtr.write_record(["path_id", "t", "X", "running_cost_so_far"])
        .map_err(csv_err)?;
    for (i, log_path) in logs.iter().enumerate() {
        let mut acc = 0.0;
        for (k, &log_abs) in log_path.iter().enumerate() {
            let x = if batch.x0 == 0.0 { 0.0 } else { sign * log_abs.exp() };
            wtr.write_record([
                i.to_string(),
                fmt(grid.node(k)),
                fmt(x),
                fmt(acc),
            ])
            .map_err(csv_err)?;
            if k < grid.n && batch.x0 != 0.0 {
                acc += (model.p * log_abs).exp() * rates[k] * dt;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Verification outcome for a single initial state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub x0: f64,
    /// Closed-form value `P₁,₀(x₀⁺)ᵖ + P₂,₀(x₀⁻)ᵖ`.
    pub value: f64,
    pub j_mean: f64,
    pub j_stderr: f64,
    pub gap: f64,
    pub z_score: f64,
    /// Discretization allowance `C·Δt` added to the 3σ band.
    pub allowance: f64,
    pub paths: usize,
    pub seed: u64,
    pub pass: bool,
}

/// Competitor comparison row for the `compare` pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompetitorSummary {
    pub label: String,
    pub x0: f64,
    pub j_mean: f64,
    pub j_stderr: f64,
    /// `J(competitor) - value`; nonnegative up to noise by optimality.
    pub gap: f64,
    pub suboptimality_ok: bool,
}

/// Writes competitor rows sorted by gap.
pub fn write_compare_csv(path: &Path, rows: &[CompetitorSummary]) -> Result<()> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.gap.total_cmp(&b.gap));
    let mut wtr = csv::Writer::from_path(path).map_err(csv_err)?;
    wtr.write_record(["label", "x0", "J_mean", "J_stderr", "gap", "suboptimality_ok"])
        .map_err(csv_err)?;
    for row in &sorted {
        wtr.write_record([
            row.label.clone(),
            fmt(row.x0),
            fmt(row.j_mean),
            fmt(row.j_stderr),
            fmt(row.gap),
            row.suboptimality_ok.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Shortest round-trip decimal form.
fn fmt(x: f64) -> String {
    format!("{x}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
}

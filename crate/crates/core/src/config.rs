//! TOML configuration schemas: model files and experiment files.
//!
//! A model file declares the problem data (degree, horizon, dimensions, cone,
//! coefficient family, regime); an experiment file points at a model and adds
//! run parameters (grid, simulation, outputs, competitors). Matrix-valued
//! entries are arrays of rows; scalar time-dependent entries are either a
//! number (constant) or an array (piecewise-constant on uniform cells).

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::control::CompetitorSpec;
use crate::error::{Error, Result};
use crate::model::{
    BoundaryCoefficients, HomogeneousModel, PowerLqFamily, Regime, RegimeParams, TimeTable,
};

/// A scalar coefficient entry: constant or a per-cell table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrTable {
    Scalar(f64),
    Table(Vec<f64>),
}

impl ScalarOrTable {
    fn to_time_table(&self, what: &str) -> Result<TimeTable> {
        match self {
            ScalarOrTable::Scalar(v) => Ok(TimeTable::Constant(*v)),
            ScalarOrTable::Table(cells) => {
                if cells.is_empty() {
                    return Err(Error::Config(format!("{what}: empty table")));
                }
                Ok(TimeTable::PiecewiseConstant(cells.clone()))
            }
        }
    }
}

impl Default for ScalarOrTable {
    fn default() -> Self {
        ScalarOrTable::Scalar(0.0)
    }
}

/// Coefficient block of a model file. Only the `power_lq` family can be
/// described in a config file; callback coefficients are library-only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientsConfig {
    /// Must be `"power_lq"`.
    pub family: String,
    #[serde(default)]
    pub a_plus: ScalarOrTable,
    #[serde(default)]
    pub a_minus: ScalarOrTable,
    pub b_plus: Vec<f64>,
    pub b_minus: Vec<f64>,
    pub c: Vec<f64>,
    /// n×m matrix as rows.
    pub d: Vec<Vec<f64>>,
    #[serde(default)]
    pub q: ScalarOrTable,
    /// Control cost matrix as rows (the `|Rv|^p` term).
    pub r: Vec<Vec<f64>>,
    #[serde(default)]
    pub q_tilde: ScalarOrTable,
    #[serde(default)]
    pub r_tilde: Vec<Vec<f64>>,
    pub g_plus: f64,
    pub g_minus: f64,
}

/// Top-level schema of a model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub p: f64,
    /// The horizon `T`.
    pub horizon: f64,
    /// Control dimension.
    pub m: usize,
    /// Driving-noise dimension.
    pub n: usize,
    pub cone: ConeSpec,
    pub regime: Regime,
    #[serde(default)]
    pub regime_params: RegimeParams,
    pub coefficients: CoefficientsConfig,
}

fn rows_to_matrix(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(1, cols));
    }
    for row in rows {
        if row.len() != cols {
            return Err(Error::Config(format!(
                "{what}: expected rows of length {cols}, got {}",
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl ModelConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("model config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Builds and validates the in-memory model.
    pub fn to_model(&self) -> Result<HomogeneousModel> {
        let cfg = &self.coefficients;
        if cfg.family != "power_lq" {
            return Err(Error::Config(format!(
                "unknown coefficient family '{}' (expected 'power_lq')",
                cfg.family
            )));
        }
        let vec_of = |data: &[f64], len: usize, what: &str| -> Result<DVector<f64>> {
            if data.len() != len {
                return Err(Error::Config(format!(
                    "{what}: expected length {len}, got {}",
                    data.len()
                )));
            }
            Ok(DVector::from_column_slice(data))
        };
        let family = PowerLqFamily {
            a_plus: cfg.a_plus.to_time_table("a_plus")?,
            a_minus: cfg.a_minus.to_time_table("a_minus")?,
            b_plus: vec_of(&cfg.b_plus, self.m, "b_plus")?,
            b_minus: vec_of(&cfg.b_minus, self.m, "b_minus")?,
            c: vec_of(&cfg.c, self.n, "c")?,
            d: {
                let d = rows_to_matrix(&cfg.d, self.m, "d")?;
                if d.nrows() != self.n {
                    return Err(Error::Config(format!(
                        "d: expected {} rows, got {}",
                        self.n,
                        d.nrows()
                    )));
                }
                d
            },
            q: cfg.q.to_time_table("q")?,
            r: rows_to_matrix(&cfg.r, self.m, "r")?,
            q_tilde: cfg.q_tilde.to_time_table("q_tilde")?,
            r_tilde: rows_to_matrix(&cfg.r_tilde, self.m, "r_tilde")?,
            g_plus: cfg.g_plus,
            g_minus: cfg.g_minus,
        };
        let model = HomogeneousModel {
            p: self.p,
            horizon: self.horizon,
            m: self.m,
            n: self.n,
            cone: self.cone.clone(),
            coeffs: BoundaryCoefficients::PowerLq(family),
            regime: self.regime,
            regime_params: self.regime_params.clone(),
        };
        model.validate()?;
        Ok(model)
    }
}

/// Time-grid block of an experiment file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    /// `"deterministic"` (default) or `"tree"`.
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Tree depth; defaults to `n` when absent.
    pub tree_depth: Option<usize>,
}

fn default_mode() -> String {
    "deterministic".into()
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            mode: default_mode(),
            tree_depth: None,
        }
    }
}

/// Simulation block of an experiment file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    /// Initial states to verify at.
    pub x0: Vec<f64>,
    #[serde(default)]
    pub antithetic: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            paths: 10_000,
            seed: 0,
            x0: vec![1.0],
            antithetic: false,
        }
    }
}

/// Output block of an experiment file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: default_formats(),
        }
    }
}

/// Externally supplied feedback control: solution CSVs whose `v_hat` columns
/// replace the solver's argmins during verification. Lets a pipeline verify a
/// shipped control against the computed value function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlOverride {
    pub plus: PathBuf,
    pub minus: PathBuf,
}

/// Top-level schema of an experiment file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Path to the model file, relative to the experiment file.
    pub model: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub competitors: Vec<CompetitorSpec>,
    /// Optional shipped control to verify in place of the solver's argmins.
    #[serde(default)]
    pub control_override: Option<ControlOverride>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads the experiment and resolves the model path relative to the
    /// experiment file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            let resolve = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&p);
                }
            };
            resolve(&mut cfg.model);
            if let Some(ov) = cfg.control_override.as_mut() {
                resolve(&mut ov.plus);
                resolve(&mut ov.minus);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.n < 2 {
            return Err(Error::Config("grid.n must be at least 2".into()));
        }
        if self.simulation.paths < 1 {
            return Err(Error::Config("simulation.paths must be at least 1".into()));
        }
        if self.simulation.x0.is_empty() {
            return Err(Error::Config("simulation.x0 must be nonempty".into()));
        }
        match self.grid.mode.as_str() {
            "deterministic" | "tree" => {}
            other => {
                return Err(Error::Config(format!(
                    "grid.mode must be 'deterministic' or 'tree', got '{other}'"
                )))
            }
        }
        for fmt in &self.outputs.formats {
            if fmt != "csv" && fmt != "json" {
                return Err(Error::Config(format!("unknown output format '{fmt}'")));
            }
        }
        Ok(())
    }

    pub fn load_model(&self) -> Result<HomogeneousModel> {
        ModelConfig::from_path(&self.model)?.to_model()
    }
}

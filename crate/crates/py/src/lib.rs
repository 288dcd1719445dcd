//! Python bindings for the homogeneous cone-constrained control solver.
//!
//! Exposes the main pipeline — load a model from TOML, solve both branch
//! equations, build the optimal feedback, simulate and verify — as the
//! `homcone` extension module. Build with `--features extension-module` to
//! produce an importable shared library.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use homcone_core::bsde::{solve_deterministic, BsdeSolution, SolverConfig, TimeGrid};
use homcone_core::config::ModelConfig;
use homcone_core::control::{
    build_feedback, estimate_cost, evaluate_competitor, materialize_competitor, simulate_state,
    value_function, CompetitorSpec, FeedbackControl, SimOptions,
};
use homcone_core::driver::Branch;
use homcone_core::model::HomogeneousModel;

fn to_py_err(e: homcone_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_branch(name: &str) -> PyResult<Branch> {
    match name {
        "plus" => Ok(Branch::Plus),
        "minus" => Ok(Branch::Minus),
        other => Err(PyValueError::new_err(format!(
            "branch must be \"plus\" or \"minus\", got {other:?}"
        ))),
    }
}

/// A homogeneous model specified by its coefficient restrictions at x = ±1.
#[pyclass(name = "Model")]
#[derive(Clone)]
struct PyModel {
    inner: HomogeneousModel,
}

#[pymethods]
impl PyModel {
    /// Parse a model from TOML text and validate it.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let model = ModelConfig::from_toml_str(text)
            .and_then(|cfg| cfg.to_model())
            .map_err(to_py_err)?;
        model.validate().map_err(to_py_err)?;
        Ok(Self { inner: model })
    }

    /// Load a model from a TOML file and validate it.
    #[staticmethod]
    fn from_path(path: &str) -> PyResult<Self> {
        let model = ModelConfig::from_path(std::path::Path::new(path))
            .and_then(|cfg| cfg.to_model())
            .map_err(to_py_err)?;
        model.validate().map_err(to_py_err)?;
        Ok(Self { inner: model })
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    /// Terminal cost g(x) = g(±1)|x|^p.
    fn terminal_cost(&self, x: f64) -> f64 {
        self.inner.terminal_cost(x)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(p={}, horizon={}, m={}, n={})",
            self.inner.p, self.inner.horizon, self.inner.m, self.inner.n
        )
    }
}

/// A solved branch equation: nodes tₖ with P(tₖ) and the argmin controls v̂(tₖ).
#[pyclass(name = "Solution")]
#[derive(Clone)]
struct PySolution {
    inner: BsdeSolution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn branch(&self) -> &'static str {
        match self.inner.branch {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }

    /// P at t = 0 (the boundary coefficient of the value function).
    #[getter]
    fn p0(&self) -> f64 {
        self.inner.p_at_origin()
    }

    /// Grid nodes t₀ … t_N.
    fn times(&self) -> Vec<f64> {
        (0..=self.inner.grid.n).map(|k| self.inner.grid.node(k)).collect()
    }

    /// P at each grid node (first node of every layer).
    fn p_curve(&self) -> Vec<f64> {
        self.inner.p.iter().map(|layer| layer[0]).collect()
    }

    /// Argmin control v̂ at node k.
    fn v_hat(&self, k: usize) -> PyResult<Vec<f64>> {
        self.inner
            .v_hat
            .get(k)
            .and_then(|layer| layer.first())
            .map(|v| v.iter().copied().collect())
            .ok_or_else(|| PyValueError::new_err(format!("node {k} out of range")))
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(branch={:?}, n={}, p0={})",
            self.inner.branch,
            self.inner.grid.n,
            self.inner.p_at_origin()
        )
    }
}

/// The optimal piecewise-linear feedback u*(tₖ, x) = v̂₁(tₖ)x⁺ + v̂₂(tₖ)x⁻.
#[pyclass(name = "Feedback")]
#[derive(Clone)]
struct PyFeedback {
    inner: FeedbackControl,
}

#[pymethods]
impl PyFeedback {
    /// Evaluate the feedback at grid node k and state x.
    fn eval(&self, k: usize, x: f64) -> PyResult<Vec<f64>> {
        if k >= self.inner.v_hat_plus.len() {
            return Err(PyValueError::new_err(format!("node {k} out of range")));
        }
        Ok(self.inner.eval(k, x).iter().copied().collect())
    }

    fn __repr__(&self) -> String {
        format!("Feedback(n={})", self.inner.grid.n)
    }
}

/// Solve one branch equation on an n-step grid (deterministic RK4 mode).
#[pyfunction]
#[pyo3(signature = (model, branch="plus", n=200))]
fn solve(model: &PyModel, branch: &str, n: usize) -> PyResult<PySolution> {
    let grid = TimeGrid::new(n, model.inner.horizon).map_err(to_py_err)?;
    let sol = solve_deterministic(
        &model.inner,
        parse_branch(branch)?,
        grid,
        &SolverConfig::default(),
    )
    .map_err(to_py_err)?;
    Ok(PySolution { inner: sol })
}

/// Assemble the optimal feedback from the two branch solutions.
#[pyfunction]
fn feedback(model: &PyModel, plus: &PySolution, minus: &PySolution) -> PyResult<PyFeedback> {
    let fb = build_feedback(&model.inner, &plus.inner, &minus.inner).map_err(to_py_err)?;
    Ok(PyFeedback { inner: fb })
}

/// Closed-form value P₁,₀(x⁺)ᵖ + P₂,₀(x⁻)ᵖ.
#[pyfunction]
fn value(plus: &PySolution, minus: &PySolution, p: f64, x0: f64) -> f64 {
    value_function(&plus.inner, &minus.inner, p, x0)
}

/// Monte Carlo cost of a feedback: returns {"j_mean", "j_stderr", "paths"}.
#[pyfunction]
#[pyo3(signature = (fb, model, x0, paths=10_000, seed=0, antithetic=false))]
fn simulate<'py>(
    py: Python<'py>,
    fb: &PyFeedback,
    model: &PyModel,
    x0: f64,
    paths: usize,
    seed: u64,
    antithetic: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = SimOptions {
        antithetic,
        ..SimOptions::default()
    };
    let batch =
        simulate_state(&fb.inner, &model.inner, x0, paths, seed, opts).map_err(to_py_err)?;
    let (j_mean, j_stderr) = estimate_cost(&batch);
    let out = PyDict::new_bound(py);
    out.set_item("j_mean", j_mean)?;
    out.set_item("j_stderr", j_stderr)?;
    out.set_item("paths", batch.paths)?;
    Ok(out)
}

/// Full pipeline: solve both branches, simulate the optimal feedback and
/// report the gap to the closed-form value.
#[pyfunction]
#[pyo3(signature = (model, x0, n=200, paths=10_000, seed=0))]
fn verify<'py>(
    py: Python<'py>,
    model: &PyModel,
    x0: f64,
    n: usize,
    paths: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let plus = solve(model, "plus", n)?;
    let minus = solve(model, "minus", n)?;
    let fb = feedback(model, &plus, &minus)?;
    let val = value(&plus, &minus, model.inner.p, x0);
    let sim = simulate(py, &fb, model, x0, paths, seed, false)?;
    let j_mean: f64 = sim.get_item("j_mean")?.unwrap().extract()?;
    let j_stderr: f64 = sim.get_item("j_stderr")?.unwrap().extract()?;
    let out = PyDict::new_bound(py);
    out.set_item("value", val)?;
    out.set_item("j_mean", j_mean)?;
    out.set_item("j_stderr", j_stderr)?;
    out.set_item("gap", j_mean - val)?;
    Ok(out)
}

/// Monte Carlo cost of a named competitor feedback ("zero", "scaled:<f>",
/// "perturbed:<d>", "random:<seed>:<mag>") for suboptimality checks.
#[pyfunction]
#[pyo3(signature = (spec, fb, model, x0, paths=10_000, seed=0))]
fn competitor_cost(
    spec: &str,
    fb: &PyFeedback,
    model: &PyModel,
    x0: f64,
    paths: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let parsed = parse_competitor(spec)?;
    let (v1, v2) = materialize_competitor(&parsed, &fb.inner, &model.inner).map_err(to_py_err)?;
    evaluate_competitor(v1, v2, &model.inner, fb.inner.grid, x0, paths, seed).map_err(to_py_err)
}

fn parse_competitor(spec: &str) -> PyResult<CompetitorSpec> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || PyValueError::new_err(format!("unknown competitor spec {spec:?}"));
    match parts.as_slice() {
        ["zero"] => Ok(CompetitorSpec::Zero),
        ["scaled", f] => Ok(CompetitorSpec::ScaledOptimum {
            factor: f.parse().map_err(|_| bad())?,
        }),
        ["perturbed", d] => Ok(CompetitorSpec::Perturbed {
            delta: d.parse().map_err(|_| bad())?,
        }),
        ["random", s, m] => Ok(CompetitorSpec::RandomRay {
            seed: s.parse().map_err(|_| bad())?,
            magnitude: m.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

/// Names of the built-in regression battery models.
#[pyfunction]
fn battery_names() -> Vec<String> {
    homcone_core::battery::regression_battery()
        .into_iter()
        .map(|e| e.name.to_string())
        .collect()
}

/// Load a built-in regression battery model by name.
#[pyfunction]
fn battery_model(name: &str) -> PyResult<PyModel> {
    homcone_core::battery::regression_battery()
        .into_iter()
        .find(|e| e.name == name)
        .map(|e| PyModel { inner: e.model })
        .ok_or_else(|| PyValueError::new_err(format!("no battery model named {name:?}")))
}

#[pymodule]
fn homcone(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyFeedback>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(feedback, m)?)?;
    m.add_function(wrap_pyfunction!(value, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(competitor_cost, m)?)?;
    m.add_function(wrap_pyfunction!(battery_names, m)?)?;
    m.add_function(wrap_pyfunction!(battery_model, m)?)?;
    Ok(())
}

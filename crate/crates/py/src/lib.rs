//! Python bindings. Structured results cross the boundary as plain dicts.

use pyo3::exceptions::{PyMemoryError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use robust_amp::amp::{amp_run, objective, round_to_feasible, Denoiser, DenoiserFamily, ProblemSpec};
use robust_amp::ensembles::{corrupt_minor, sample_symmetric, zero_rowsum_contamination, Adversary, CorruptionSpec, EnsembleSpec, Family};
use robust_amp::error::Error;
use robust_amp::harness::{self, ExperimentConfig};
use robust_amp::lsth::{build_constraint_system, correlation, recover, solve_feasibility, Verdict};
use robust_amp::matrix;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Resource(_) => PyMemoryError::new_err(e.to_string()),
        Error::Config(_) | Error::Parse(_) | Error::Dimension { .. } | Error::Domain(_) | Error::Index { .. } | Error::Unsupported(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_family(name: &str) -> PyResult<Family> {
    match name {
        "gaussian" => Ok(Family::Gaussian),
        "rademacher" => Ok(Family::Rademacher),
        _ => Err(PyValueError::new_err(format!("unknown ensemble family {name:?}"))),
    }
}

fn parse_adversary(name: &str) -> PyResult<Adversary> {
    match name {
        "none" => Ok(Adversary::None),
        "rank_one_spike" => Ok(Adversary::RankOneSpike),
        "random_replace" => Ok(Adversary::RandomReplace { family: Family::Gaussian }),
        _ => Err(PyValueError::new_err(format!("unknown adversary {name:?}"))),
    }
}

fn parse_denoiser(spec: &str) -> PyResult<Denoiser> {
    if spec == "relu" {
        return Ok(Denoiser::relu());
    }
    let coeffs: Result<Vec<f64>, _> = spec.split(',').map(|c| c.trim().parse::<f64>()).collect();
    coeffs
        .map(|c| Denoiser::polynomial(&c))
        .map_err(|_| PyValueError::new_err("denoiser is \"relu\" or comma-separated polynomial coefficients"))
}

/// Symmetric `n × n` matrix stored as its upper triangle.
#[pyclass(name = "SymmetricMatrix", module = "robust_amp_py", skip_from_py_object)]
struct PySymmetricMatrix {
    inner: matrix::SymmetricMatrix,
}

#[pymethods]
impl PySymmetricMatrix {
    /// Build from a nested list; only the upper triangle is read.
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("matrix must be square"));
        }
        Ok(Self { inner: matrix::SymmetricMatrix::from_fn(n, |i, j| rows[i][j]) })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        let n = self.inner.n();
        if i >= n || j >= n {
            return Err(PyValueError::new_err(format!("index ({i}, {j}) out of range for n = {n}")));
        }
        Ok(self.inner.get(i, j))
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        (0..self.inner.n()).map(|i| self.inner.row(i)).collect()
    }

    fn row_sums(&self) -> Vec<f64> {
        self.inner.row_sums()
    }

    fn op_norm(&self) -> f64 {
        self.inner.op_norm()
    }

    fn matvec(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if x.len() != self.inner.n() {
            return Err(to_py(Error::Dimension { expected: self.inner.n(), got: x.len() }));
        }
        Ok(self.inner.matvec(&x))
    }

    fn to_symmat(&self) -> String {
        self.inner.to_symmat()
    }

    #[staticmethod]
    fn from_symmat(text: &str) -> PyResult<Self> {
        matrix::SymmetricMatrix::from_symmat(text).map(|inner| Self { inner }).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("SymmetricMatrix(n={})", self.inner.n())
    }
}

/// Sample a Wigner matrix with entries of variance `1/n`.
#[pyfunction]
#[pyo3(signature = (n, family = "gaussian", seed = 0))]
fn sample(n: usize, family: &str, seed: u64) -> PyResult<PySymmetricMatrix> {
    let spec = EnsembleSpec::new(n, parse_family(family)?);
    sample_symmetric(&spec, seed).map(|inner| PySymmetricMatrix { inner }).map_err(to_py)
}

/// Corrupt a random principal minor; returns the corrupted matrix and its support.
#[pyfunction]
#[pyo3(signature = (x, epsilon, adversary = "rank_one_spike", seed = 0))]
fn corrupt(x: &PySymmetricMatrix, epsilon: f64, adversary: &str, seed: u64) -> PyResult<(PySymmetricMatrix, Vec<usize>)> {
    let spec = CorruptionSpec { epsilon, adversary: parse_adversary(adversary)?, seed };
    let rec = corrupt_minor(&x.inner, &spec).map_err(to_py)?;
    Ok((PySymmetricMatrix { inner: rec.corrupted }, rec.support))
}

/// Zero entries of a rademacher matrix until every row sums to zero.
/// Returns the contaminated matrix and the number of entries changed.
#[pyfunction]
#[pyo3(signature = (x, seed = 0))]
fn zero_rowsum(x: &PySymmetricMatrix, seed: u64) -> PyResult<(PySymmetricMatrix, usize)> {
    let rec = zero_rowsum_contamination(&x.inner, seed).map_err(to_py)?;
    Ok((PySymmetricMatrix { inner: rec.corrupted }, rec.entries_changed))
}

/// Run `t` AMP steps with one denoiser at every step and return all iterates.
#[pyfunction]
#[pyo3(signature = (x, t, denoiser = "0,1", normalize = None))]
fn amp(x: &PySymmetricMatrix, t: usize, denoiser: &str, normalize: Option<f64>) -> PyResult<Vec<Vec<f64>>> {
    let fam = DenoiserFamily::uniform(parse_denoiser(denoiser)?, t);
    let trace = amp_run(&x.inner, &fam, t, normalize).map_err(to_py)?;
    Ok((0..=t).map(|s| trace.x(s).to_vec()).collect())
}

/// `v^⊤Xv` after rounding `x` into the feasible set of `problem`.
#[pyfunction]
#[pyo3(signature = (x, iterate, problem = "nnpca"))]
fn rounded_objective(x: &PySymmetricMatrix, iterate: Vec<f64>, problem: &str) -> PyResult<f64> {
    let prob = match problem {
        "nnpca" => ProblemSpec::nnpca(),
        "sk" => ProblemSpec::sk(),
        _ => return Err(PyValueError::new_err(format!("unknown problem {problem:?}"))),
    };
    let v = round_to_feasible(&iterate, &prob).map_err(to_py)?;
    objective(&x.inner, &v).map_err(to_py)
}

/// `⟨a, b⟩² / (‖a‖²‖b‖²)`.
#[pyfunction(name = "correlation")]
fn py_correlation(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    correlation(&a, &b).map_err(to_py)
}

/// Parsed and validated experiment configuration.
#[pyclass(name = "ExperimentConfig", module = "robust_amp_py")]
struct PyExperimentConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyExperimentConfig {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ExperimentConfig::from_toml(text).map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(to_py)
    }

    /// Violations as strings; empty when the configuration is valid.
    fn validate(&self) -> Vec<String> {
        harness::validate_config(&self.inner).iter().map(ToString::to_string).collect()
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.seeds.clone()
    }

    #[setter]
    fn set_seeds(&mut self, seeds: Vec<u64>) {
        self.inner.seeds = seeds;
    }

    #[getter]
    fn output_dir(&self) -> String {
        self.inner.output_dir.display().to_string()
    }

    #[setter]
    fn set_output_dir(&mut self, dir: String) {
        self.inner.output_dir = dir.into();
    }

    /// Run one seed without writing files; returns its record.
    fn run_seed<'py>(&self, py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let cfg = &self.inner;
        let record = py
            .detach(|| harness::load_or_calibrate(cfg).map(|stats| harness::run_seed(cfg, &stats, seed).record))
            .map_err(to_py)?;
        to_dict(py, &record)
    }

    /// Run every seed, writing artifacts under `output_dir`.
    #[pyo3(signature = (workers = 1))]
    fn run<'py>(&self, py: Python<'py>, workers: usize) -> PyResult<Bound<'py, PyAny>> {
        let cfg = &self.inner;
        let records = py.detach(|| harness::run_experiment(cfg, workers)).map_err(to_py)?;
        to_dict(py, &records)
    }

    /// Build and solve the local-statistics system for `y`; returns the
    /// verdict, residuals and, when feasible, the rounded vector.
    fn solve<'py>(&self, py: Python<'py>, y: &PySymmetricMatrix, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let cfg = &self.inner;
        let y = &y.inner;
        let (report, rec) = py
            .detach(|| -> robust_amp::error::Result<_> {
                let stats = harness::load_or_calibrate(cfg)?;
                let sys = build_constraint_system(y, cfg.corruption.epsilon, &stats, &cfg.lsh)?;
                let mut solver = cfg.solver.clone();
                solver.seed = seed;
                let report = solve_feasibility(&sys, &solver, None)?;
                let rec = match (&report.verdict, &report.pe) {
                    (Verdict::Feasible, Some(pe)) => Some(recover(pe, None, report.iterations)?),
                    _ => None,
                };
                Ok((report, rec))
            })
            .map_err(to_py)?;
        let out = to_dict(py, &report)?;
        out.set_item("recovery", to_dict(py, &rec)?)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("ExperimentConfig(n={}, t={}, seeds={:?})", self.inner.ensemble.n, self.inner.t, self.inner.seeds)
    }
}

#[pymodule]
fn robust_amp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySymmetricMatrix>()?;
    m.add_class::<PyExperimentConfig>()?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(corrupt, m)?)?;
    m.add_function(wrap_pyfunction!(zero_rowsum, m)?)?;
    m.add_function(wrap_pyfunction!(amp, m)?)?;
    m.add_function(wrap_pyfunction!(rounded_objective, m)?)?;
    m.add_function(wrap_pyfunction!(py_correlation, m)?)?;
    Ok(())
}

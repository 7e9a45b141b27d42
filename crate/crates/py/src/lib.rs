//! Python bindings for `hose-core`.
//!
//! Tensors cross the boundary as `(dims, values)` with the first index
//! varying fastest, so `numpy.asarray(values).reshape(dims, order="F")`
//! recovers the array.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use hose_core::simulation::{estimate_all, Estimator};
use hose_core::tuning::{self, TuningOptions};
use hose_core::{HoseError, Objective, RiskEstimate, ShrinkagePlan};

fn to_py(e: HoseError) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.code()))
}

fn objective(name: &str) -> PyResult<Objective> {
    match name {
        "sure" => Ok(Objective::Sure),
        "gsure" => Ok(Objective::Gsure),
        _ => Err(PyValueError::new_err(format!("unknown objective {name:?}"))),
    }
}

/// Dense real tensor.
#[pyclass(name = "Tensor", module = "hose", skip_from_py_object)]
#[derive(Clone)]
struct PyTensor {
    inner: hose_core::DenseTensor,
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new(dims: Vec<usize>, values: Vec<f64>) -> PyResult<Self> {
        hose_core::DenseTensor::new(dims, values).map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn get(&self, index: Vec<usize>) -> PyResult<f64> {
        let dims = self.inner.dims();
        if index.len() != dims.len() || index.iter().zip(dims).any(|(i, d)| i >= d) {
            return Err(PyValueError::new_err(format!("index {index:?} out of bounds for {dims:?}")));
        }
        Ok(self.inner.get(&index))
    }

    fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    fn distance(&self, other: &PyTensor) -> PyResult<f64> {
        self.inner.distance_sq(&other.inner).map(f64::sqrt).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Tensor(dims={:?})", self.inner.dims())
    }
}

/// Higher-order SVD of a tensor.
#[pyclass(name = "Hosvd", module = "hose")]
struct PyHosvd {
    inner: hose_core::HosvdDecomposition,
}

#[pymethods]
impl PyHosvd {
    /// Singular values of the mode-`mode` unfolding, descending.
    fn singular_values(&self, mode: usize) -> PyResult<Vec<f64>> {
        if mode >= self.inner.order() {
            return Err(PyValueError::new_err(format!("mode {mode} out of range")));
        }
        Ok(self.inner.singular_values(mode).to_vec())
    }

    fn core(&self) -> PyTensor {
        PyTensor {
            inner: self.inner.core().clone(),
        }
    }

    /// Factor matrix of `mode` as a list of columns.
    fn factor(&self, mode: usize) -> PyResult<Vec<Vec<f64>>> {
        if mode >= self.inner.order() {
            return Err(PyValueError::new_err(format!("mode {mode} out of range")));
        }
        let u = self.inner.factor(mode);
        Ok((0..u.cols()).map(|j| u.column(j).to_vec()).collect())
    }

    fn reconstruct(&self) -> PyTensor {
        PyTensor {
            inner: self.inner.reconstruct(),
        }
    }
}

/// SURE and its parts for one estimator.
#[pyclass(name = "Risk", module = "hose", get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyRisk {
    fit: f64,
    divergence: f64,
    sure: f64,
    gsure: Option<f64>,
}

impl From<&RiskEstimate> for PyRisk {
    fn from(r: &RiskEstimate) -> Self {
        Self {
            fit: r.fit,
            divergence: r.divergence,
            sure: r.sure,
            gsure: r.gsure,
        }
    }
}

#[pymethods]
impl PyRisk {
    fn __repr__(&self) -> String {
        format!("Risk(sure={}, fit={}, divergence={})", self.sure, self.fit, self.divergence)
    }
}

/// Outcome of soft-threshold tuning or rank selection.
#[pyclass(name = "Tuning", module = "hose", get_all)]
struct PyTuning {
    lambdas: Option<Vec<f64>>,
    ranks: Option<Vec<usize>>,
    scale: f64,
    value: f64,
    risk: PyRisk,
    converged: bool,
    estimate: PyTensor,
}

fn tuning_result(d: &hose_core::HosvdDecomposition, res: tuning::TuningResult) -> PyResult<PyTuning> {
    let estimate = hose_core::apply_spectral(d, &res.plan).map_err(to_py)?;
    Ok(PyTuning {
        lambdas: res.plan.soft_lambdas(),
        ranks: res.ranks(),
        scale: res.plan.scale(),
        value: res.sure_value,
        risk: PyRisk::from(&res.risk),
        converged: res.converged,
        estimate: PyTensor { inner: estimate },
    })
}

#[pyfunction]
fn hosvd(x: &PyTensor) -> PyResult<PyHosvd> {
    hose_core::hosvd(&x.inner).map(|inner| PyHosvd { inner }).map_err(to_py)
}

/// SURE of a soft-threshold plan (`lambdas`) or a truncation plan (`ranks`).
#[pyfunction]
#[pyo3(signature = (x, tau2=1.0, lambdas=None, ranks=None, scale=1.0))]
fn sure(
    x: &PyTensor,
    tau2: f64,
    lambdas: Option<Vec<f64>>,
    ranks: Option<Vec<usize>>,
    scale: f64,
) -> PyResult<PyRisk> {
    let plan = match (lambdas, ranks) {
        (Some(l), None) => ShrinkagePlan::soft(&l, scale),
        (None, Some(r)) => ShrinkagePlan::truncation(&r).and_then(|p| p.with_scale(scale)),
        _ => return Err(PyValueError::new_err("give exactly one of lambdas or ranks")),
    }
    .map_err(to_py)?;
    let d = hose_core::hosvd(&x.inner).map_err(to_py)?;
    hose_core::sure_spectral(&d, &plan, tau2).map(|r| PyRisk::from(&r)).map_err(to_py)
}

/// Soft-threshold thresholds and scale chosen by coordinate descent.
#[pyfunction]
#[pyo3(signature = (x, tau2=1.0, objective="sure", max_sweeps=50, tol=1e-8))]
fn tune(py: Python<'_>, x: &PyTensor, tau2: f64, objective: &str, max_sweeps: usize, tol: f64) -> PyResult<PyTuning> {
    let opts = TuningOptions {
        objective: self::objective(objective)?,
        max_sweeps,
        rtol: tol,
        ..TuningOptions::default()
    };
    let inner = &x.inner;
    py.detach(|| {
        let d = hose_core::hosvd(inner).map_err(to_py)?;
        let res = tuning::optimize_soft_threshold_decomposed(&d, tau2, &opts).map_err(to_py)?;
        tuning_result(&d, res)
    })
}

/// Multilinear rank minimizing the risk estimate of truncated HOSVD.
#[pyfunction]
#[pyo3(signature = (x, tau2=1.0, objective="sure"))]
fn rank(py: Python<'_>, x: &PyTensor, tau2: f64, objective: &str) -> PyResult<PyTuning> {
    let obj = self::objective(objective)?;
    let inner = &x.inner;
    py.detach(|| {
        let d = hose_core::hosvd(inner).map_err(to_py)?;
        let res = tuning::select_rank_decomposed(&d, tau2, obj).map_err(to_py)?;
        tuning_result(&d, res)
    })
}

/// Denoise with a named method: msst, truncated_hosvd, james_stein,
/// efron_morris, matrix_soft or identity.
#[pyfunction]
#[pyo3(signature = (x, method="msst", tau2=1.0))]
fn denoise(py: Python<'_>, x: &PyTensor, method: &str, tau2: f64) -> PyResult<PyTensor> {
    let est: Estimator = method.parse().map_err(to_py)?;
    let inner = &x.inner;
    py.detach(|| {
        estimate_all(inner, tau2, &[est])
            .pop()
            .expect("one estimator")
            .map(|inner| PyTensor { inner })
            .map_err(to_py)
    })
}

#[pymodule]
fn hose(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyHosvd>()?;
    m.add_class::<PyRisk>()?;
    m.add_class::<PyTuning>()?;
    m.add_function(wrap_pyfunction!(hosvd, m)?)?;
    m.add_function(wrap_pyfunction!(sure, m)?)?;
    m.add_function(wrap_pyfunction!(tune, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    m.add_function(wrap_pyfunction!(denoise, m)?)?;
    Ok(())
}

//! Python bindings: domains, polynomials, bases, heat kernels and validation suites.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use spectral_heat::basis::{self, OrthonormalBasis};
use spectral_heat::config::RunConfig;
use spectral_heat::kernel::{HeatKernelEvaluator, KernelValue, MultiplierSpec, TruncationPolicy};
use spectral_heat::precision::Precision;
use spectral_heat::suite::{run_suite as run_suite_impl, Suite};
use spectral_heat::volume::{ball_volume, volume_surrogate as surrogate, VolumeBudget};
use spectral_heat::{geometry, operators, DomainSpec, Error, MultiIndex, MultiPoly};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Argument(_) | Error::Parameter(_) | Error::Config { .. } | Error::BoundarySingularity(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for spectral_heat::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn parse_precision(s: &str) -> PyResult<Precision> {
    s.parse().py()
}

/// A weighted domain: interval, unit ball or simplex.
#[pyclass(name = "Domain", module = "spectral_heat", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDomain(DomainSpec);

#[pymethods]
impl PyDomain {
    #[staticmethod]
    fn interval(alpha: f64, beta: f64) -> PyResult<Self> {
        DomainSpec::interval(alpha, beta).py().map(Self)
    }

    #[staticmethod]
    fn ball(n: usize, gamma: f64) -> PyResult<Self> {
        DomainSpec::ball(n, gamma).py().map(Self)
    }

    #[staticmethod]
    fn simplex(kappa: Vec<f64>) -> PyResult<Self> {
        DomainSpec::simplex(kappa).py().map(Self)
    }

    #[getter]
    fn kind(&self) -> String {
        format!("{:?}", self.0.kind()).to_lowercase()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.0.params().to_vec()
    }

    #[getter]
    fn diameter(&self) -> f64 {
        self.0.diameter()
    }

    fn eigenvalue(&self, k: usize) -> f64 {
        basis::eigenvalue(&self.0, k)
    }

    fn __repr__(&self) -> String {
        format!("Domain.{}", self.0.label())
    }
}

/// Sparse polynomial in `dim` variables.
#[pyclass(name = "Polynomial", module = "spectral_heat", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPolynomial(MultiPoly);

#[pymethods]
impl PyPolynomial {
    /// `terms` is a list of `(exponents, coefficient)` pairs.
    #[new]
    fn new(dim: usize, terms: Vec<(Vec<u32>, f64)>) -> PyResult<Self> {
        MultiPoly::from_terms(dim, terms.into_iter().map(|(e, c)| (MultiIndex::new(e), c)))
            .py()
            .map(Self)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dimension()
    }

    #[getter]
    fn degree(&self) -> u32 {
        self.0.degree()
    }

    fn terms(&self) -> Vec<(Vec<u32>, f64)> {
        self.0.terms().map(|(i, c)| (i.exponents().to_vec(), c)).collect()
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.eval(&x).py()
    }

    fn __add__(&self, other: &Self) -> PyResult<Self> {
        self.0.add_scaled(&other.0, 1.0).py().map(Self)
    }

    fn __sub__(&self, other: &Self) -> PyResult<Self> {
        self.0.add_scaled(&other.0, -1.0).py().map(Self)
    }

    fn __mul__(&self, other: &Self) -> PyResult<Self> {
        self.0.try_mul(&other.0).py().map(Self)
    }

    /// The domain's operator `L` applied to this polynomial.
    fn apply_operator(&self, domain: &PyDomain) -> PyResult<Self> {
        operators::apply_operator(&domain.0, &self.0).py().map(Self)
    }

    fn __repr__(&self) -> String {
        format!("Polynomial(dim={}, terms={})", self.0.dimension(), self.0.num_terms())
    }
}

/// Orthonormal eigenbasis up to a maximum degree.
#[pyclass(name = "Basis", module = "spectral_heat", frozen)]
struct PyBasis(OrthonormalBasis);

#[pymethods]
impl PyBasis {
    #[new]
    #[pyo3(signature = (domain, max_degree, precision = "double"))]
    fn new(py: Python<'_>, domain: &PyDomain, max_degree: usize, precision: &str) -> PyResult<Self> {
        let p = parse_precision(precision)?;
        let spec = domain.0.clone();
        py.detach(|| basis::build_basis_with(&spec, max_degree, p))
            .py()
            .map(Self)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        OrthonormalBasis::from_json(text).py().map(Self)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py()
    }

    #[getter]
    fn max_degree(&self) -> usize {
        self.0.max_degree()
    }

    #[getter]
    fn num_members(&self) -> usize {
        self.0.num_members()
    }

    #[getter]
    fn level_sizes(&self) -> Vec<usize> {
        self.0.level_sizes()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigen().lambdas.clone()
    }

    /// Values of every member at `x`, level by level.
    fn eval_all(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.eval_all(&x).py()
    }

    fn projection_kernel(&self, k: usize, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.0.projection_kernel(k, &x, &y).py()
    }

    /// Per-level Gram residual on the construction quadrature.
    fn gram_residual(&self) -> Vec<f64> {
        self.0.gram_residual()
    }

    /// Per-level `max |L P + λ_k P|` relative residual.
    fn verify_eigenrelation(&self) -> PyResult<Vec<f64>> {
        basis::verify_eigenrelation(&self.0).py()
    }
}

fn value_tuple(v: KernelValue) -> (f64, f64) {
    (v.value, v.tail_bound)
}

/// Spectral heat kernel and multiplier kernels with truncation bounds.
#[pyclass(name = "HeatKernel", module = "spectral_heat", frozen)]
struct PyHeatKernel(HeatKernelEvaluator);

#[pymethods]
impl PyHeatKernel {
    #[new]
    #[pyo3(signature = (domain, max_degree, precision = "double", epsilon = 1e-10))]
    fn new(py: Python<'_>, domain: &PyDomain, max_degree: usize, precision: &str, epsilon: f64) -> PyResult<Self> {
        let p = parse_precision(precision)?;
        let spec = domain.0.clone();
        py.detach(|| {
            let b = basis::build_basis_with(&spec, max_degree, p)?;
            let policy = TruncationPolicy {
                epsilon,
                ..TruncationPolicy::for_basis(&b)
            };
            HeatKernelEvaluator::with_policy(b, policy)
        })
        .py()
        .map(Self)
    }

    #[getter]
    fn t_min(&self) -> f64 {
        self.0.policy().t_min
    }

    /// `(value, tail_bound)` of `e^{tL}(x, y)`.
    fn heat_kernel(&self, t: f64, x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
        self.0.heat_kernel(t, &x, &y).py().map(value_tuple)
    }

    /// `∫ e^{tL}(x, y) dμ(y)`, which should be 1.
    fn mass_check(&self, py: Python<'_>, t: f64, x: Vec<f64>) -> PyResult<f64> {
        py.detach(|| self.0.mass_check(t, &x)).py()
    }

    fn semigroup_check(&self, py: Python<'_>, s: f64, t: f64, x: Vec<f64>, z: Vec<f64>) -> PyResult<f64> {
        py.detach(|| self.0.semigroup_check(s, t, &x, &z)).py()
    }

    /// `(value, tail_bound)` of `Φ(δ√-L)(x, y)`; `family` is `heat_exp`,
    /// `smooth_bump` (uses `radius`, `order`) or `sinc_power` (uses `band`, `order`).
    #[pyo3(signature = (family, delta, x, y, radius = 3.0, band = 2.0, order = 4))]
    #[allow(clippy::too_many_arguments)]
    fn multiplier(
        &self,
        family: &str,
        delta: f64,
        x: Vec<f64>,
        y: Vec<f64>,
        radius: f64,
        band: f64,
        order: u32,
    ) -> PyResult<(f64, f64)> {
        let phi = match family {
            "heat_exp" => MultiplierSpec::HeatExp,
            "smooth_bump" => MultiplierSpec::SmoothBump { radius, order },
            "sinc_power" => MultiplierSpec::SincPower { band, order },
            other => return Err(PyValueError::new_err(format!("unknown multiplier family `{other}`"))),
        };
        self.0.multiplier_kernel(&phi, delta, &x, &y).py().map(value_tuple)
    }
}

#[pyfunction]
fn distance(domain: &PyDomain, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    geometry::distance(&domain.0, &x, &y).py()
}

#[pyfunction]
fn chart_lift(domain: &PyDomain, x: Vec<f64>) -> PyResult<Vec<f64>> {
    geometry::chart_lift(&domain.0, &x).py()
}

/// Metric tensor as a list of rows.
#[pyfunction]
fn metric_tensor(domain: &PyDomain, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let g = geometry::metric_tensor(&domain.0, &x).py()?;
    Ok(g.row_iter().map(|r| r.iter().copied().collect()).collect())
}

#[pyfunction]
fn metric_det(domain: &PyDomain, x: Vec<f64>) -> PyResult<f64> {
    geometry::metric_det(&domain.0, &x).py()
}

/// `det(diag(a) + 11ᵀ)`.
#[pyfunction]
fn perturbed_identity_det(a: Vec<f64>) -> f64 {
    geometry::perturbed_identity_det(&a)
}

/// Monte Carlo `(value, stderr)` of `μ(B(x, r))`.
#[pyfunction]
#[pyo3(signature = (domain, x, r, seed, samples = 200_000))]
fn volume(py: Python<'_>, domain: &PyDomain, x: Vec<f64>, r: f64, seed: u64, samples: u64) -> PyResult<(f64, f64)> {
    let spec = domain.0.clone();
    let v = py
        .detach(|| ball_volume(&spec, &x, r, &VolumeBudget::samples(samples, seed)))
        .py()?;
    Ok((v.value, v.stderr))
}

#[pyfunction]
fn volume_surrogate(domain: &PyDomain, x: Vec<f64>, r: f64) -> PyResult<f64> {
    surrogate(&domain.0, &x, r).py()
}

/// Runs a validation suite from a TOML configuration; returns
/// `(suite, verdict, report_json)` per suite run.
#[pyfunction]
fn run_suite(py: Python<'_>, config_toml: &str, suite: &str) -> PyResult<Vec<(String, bool, String)>> {
    let cfg = RunConfig::from_toml(config_toml).py()?;
    let s: Suite = suite.parse().py()?;
    let outcomes = py.detach(|| run_suite_impl(&cfg, s, &mut std::io::sink())).py()?;
    outcomes
        .into_iter()
        .map(|o| {
            let json = serde_json::to_string(&o.report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
            Ok((o.suite.to_string(), o.verdict, json))
        })
        .collect()
}

#[pymodule]
#[pyo3(name = "spectral_heat")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_class::<PyPolynomial>()?;
    m.add_class::<PyBasis>()?;
    m.add_class::<PyHeatKernel>()?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(chart_lift, m)?)?;
    m.add_function(wrap_pyfunction!(metric_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(metric_det, m)?)?;
    m.add_function(wrap_pyfunction!(perturbed_identity_det, m)?)?;
    m.add_function(wrap_pyfunction!(volume, m)?)?;
    m.add_function(wrap_pyfunction!(volume_surrogate, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}

//! Python bindings: `import conifold_lab`.
//!
//! Metric kinds are passed as strings (`"fubini-study"`, `"omega-hat"`,
//! `"tau"`, `"conifold-flat"`, `"calabi"`, `"cone"`); `"calabi"` also needs
//! `t`. Errors surface as `ValueError`.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use conifold_core::curvature::{self, StencilOrder, StencilSpec};
use conifold_core::experiment::{self, Experiment, ExperimentConfig};
use conifold_core::forms::{self, FormKind, VectorField};
use conifold_core::{metricgeom, profile, DomainSpec, FibreCoord, LogRadius};

fn err(e: conifold_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Parse a metric kind name.
pub fn parse_kind(name: &str, t: Option<f64>) -> Result<FormKind, String> {
    let kind = match name {
        "fubini-study" => FormKind::FubiniStudy,
        "omega-hat" => FormKind::OmegaHat,
        "tau" => FormKind::Tau,
        "conifold-flat" => FormKind::ConifoldFlat,
        "cone" => FormKind::ConeMetric,
        "calabi" => FormKind::CalabiFamily(t.ok_or("calabi needs t")?),
        _ => return Err(format!("unknown metric kind `{name}`")),
    };
    kind.validate().map_err(|e| e.to_string())?;
    Ok(kind)
}

pub fn parse_field(name: &str) -> Result<VectorField, String> {
    match name {
        "V" => Ok(VectorField::V),
        "V1" => Ok(VectorField::V1),
        "W" => Ok(VectorField::W),
        _ => Err(format!("unknown vector field `{name}` (V, V1 or W)")),
    }
}

fn kind_arg(name: &str, t: Option<f64>) -> PyResult<FormKind> {
    parse_kind(name, t).map_err(PyValueError::new_err)
}

fn domain_arg(r: Option<f64>) -> PyResult<DomainSpec> {
    match r {
        None => Ok(DomainSpec::Omega),
        Some(r) => DomainSpec::omega_r(r).map_err(err),
    }
}

/// A point `(z, ξ₁, ξ₂)` of the resolved conifold.
#[pyclass(name = "ResolvedPoint", from_py_object)]
#[derive(Clone, Copy)]
struct Point(conifold_core::ResolvedPoint);

#[pymethods]
impl Point {
    #[new]
    fn new(z: Complex64, xi1: Complex64, xi2: Complex64) -> Self {
        Point(conifold_core::ResolvedPoint::new(z, xi1, xi2))
    }

    #[getter]
    fn z(&self) -> Complex64 {
        self.0.z
    }

    #[getter]
    fn xi1(&self) -> Complex64 {
        self.0.xi1
    }

    #[getter]
    fn xi2(&self) -> Complex64 {
        self.0.xi2
    }

    /// `ρ`, or `None` on the zero section.
    fn rho(&self) -> Option<f64> {
        match self.0.rho() {
            LogRadius::ZeroSection => None,
            LogRadius::Finite(r) => Some(r),
        }
    }

    fn exp_rho(&self) -> f64 {
        self.0.exp_rho()
    }

    fn is_on_zero_section(&self) -> bool {
        self.0.is_on_zero_section()
    }

    /// Flop coordinates `(w, η₁, η₂)`.
    fn flop_forward(&self) -> PyResult<(Complex64, Complex64, Complex64)> {
        let q = self.0.flop_forward().map_err(err)?;
        Ok((q.w, q.eta1, q.eta2))
    }

    /// Image `(y₁, y₂, y₃, y₄)` on the quadric cone.
    fn contract(&self) -> [Complex64; 4] {
        self.0.contract().y
    }

    /// Membership in `Ω` (no radius) or `Ω_r`.
    #[pyo3(signature = (r=None))]
    fn in_domain(&self, r: Option<f64>) -> PyResult<bool> {
        Ok(self.0.in_domain(&domain_arg(r)?))
    }

    /// `w = ξ₂/ξ₁`, or `None` for the fibre at infinity.
    fn fibre_coordinate(&self) -> PyResult<Option<Complex64>> {
        Ok(match self.0.fibre_coordinate().map_err(err)? {
            FibreCoord::Finite(w) => Some(w),
            FibreCoord::Infinity => None,
        })
    }

    fn scale_fibre(&self, s: f64) -> Self {
        Point(self.0.scale_fibre(s))
    }

    fn __repr__(&self) -> String {
        let p = self.0;
        format!("ResolvedPoint(z={}, xi1={}, xi2={})", p.z, p.xi1, p.xi2)
    }
}

/// `u'(ρ)` of the member `t` (`t = 0` is the cone).
#[pyfunction]
fn solve_uprime(t: f64, rho: f64) -> PyResult<f64> {
    profile::solve_uprime(profile::ProfileParams::new(t).map_err(err)?, rho).map_err(err)
}

/// `(u', u'')` at `ρ`.
#[pyfunction]
fn eval_profile(t: f64, rho: f64) -> PyResult<(f64, f64)> {
    let ev =
        profile::eval_profile(profile::ProfileParams::new(t).map_err(err)?, rho).map_err(err)?;
    Ok((ev.uprime, ev.usecond))
}

/// The form as a 3×3 Hermitian matrix in the coordinate frame.
#[pyfunction]
#[pyo3(signature = (kind, p, t=None))]
fn eval_form(kind: &str, p: Point, t: Option<f64>) -> PyResult<Vec<Vec<Complex64>>> {
    let f = forms::eval_form(kind_arg(kind, t)?, &p.0).map_err(err)?;
    Ok((0..3)
        .map(|i| (0..3).map(|j| f.m[(i, j)]).collect())
        .collect())
}

/// Extreme generalized eigenvalues of the form pair `(a, b)` at `p`.
#[pyfunction]
#[pyo3(signature = (a, b, p, t=None))]
fn compare_forms(a: &str, b: &str, p: Point, t: Option<f64>) -> PyResult<(f64, f64)> {
    let fa = forms::eval_form(kind_arg(a, t)?, &p.0).map_err(err)?;
    let fb = forms::eval_form(kind_arg(b, t)?, &p.0).map_err(err)?;
    forms::compare_forms(&fa, &fb).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (kind, field, p, t=None))]
fn vector_norm_sq(kind: &str, field: &str, p: Point, t: Option<f64>) -> PyResult<f64> {
    let v = parse_field(field).map_err(PyValueError::new_err)?;
    forms::vector_norm_sq(kind_arg(kind, t)?, v, &p.0).map_err(err)
}

/// Fibrewise trace of the form against `τ` on the fibre through `p`.
#[pyfunction]
#[pyo3(signature = (kind, p, t=None))]
fn fibrewise_trace(kind: &str, p: Point, t: Option<f64>) -> PyResult<f64> {
    forms::fibrewise_trace_h(kind_arg(kind, t)?, &p.0).map_err(err)
}

/// Largest entry modulus of the finite-difference Ricci form.
#[pyfunction]
#[pyo3(signature = (kind, p, t=None, h=1e-3, order=4))]
fn ricci_max_entry(kind: &str, p: Point, t: Option<f64>, h: f64, order: u32) -> PyResult<f64> {
    let order = match order {
        2 => StencilOrder::Second,
        4 => StencilOrder::Fourth,
        _ => return Err(PyValueError::new_err("stencil order must be 2 or 4")),
    };
    let spec = StencilSpec::new(h, order).map_err(err)?;
    let r = curvature::ricci_form(kind_arg(kind, t)?, &p.0, &spec).map_err(err)?;
    Ok(curvature::max_entry(&r))
}

#[pyfunction]
fn radial_length(p: Point, t: f64) -> PyResult<f64> {
    metricgeom::radial_length(&p.0, t).map_err(err)
}

#[pyfunction]
fn zero_section_area(t: f64) -> PyResult<f64> {
    metricgeom::zero_section_area(t).map_err(err)
}

#[pyfunction]
fn zero_section_diameter(t: f64) -> PyResult<f64> {
    metricgeom::zero_section_diameter(t).map_err(err)
}

/// Diameter of a sampled cloud of `Ω` (or `Ω_r`) under a metric kind.
#[pyfunction]
#[pyo3(signature = (kind, n, t=None, r=None, k=12, seed=0))]
fn cloud_diameter(
    py: Python<'_>,
    kind: &str,
    n: usize,
    t: Option<f64>,
    r: Option<f64>,
    k: usize,
    seed: u64,
) -> PyResult<f64> {
    let kind = kind_arg(kind, t)?;
    let d = domain_arg(r)?;
    let c = py
        .detach(|| metricgeom::build_cloud(d, kind, n, k, seed))
        .map_err(err)?;
    Ok(metricgeom::cloud_diameter(&c))
}

/// Gromov-Hausdorff upper bound between `ω_E(t)` and the cone on `Ω`.
#[pyfunction]
#[pyo3(signature = (t, n, seed, k=12))]
fn gh_upper_bound(py: Python<'_>, t: f64, n: usize, seed: u64, k: usize) -> PyResult<f64> {
    let est = py
        .detach(|| metricgeom::gh_upper_bound_with_k(t, n, k, seed))
        .map_err(err)?;
    Ok(est.bound)
}

/// `(exponent, amplitude, r_squared)` of a log-log least-squares fit.
#[pyfunction]
fn fit_power_law(pairs: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let f = experiment::fit_power_law(&pairs).map_err(err)?;
    Ok((f.exponent, f.amplitude, f.r_squared))
}

/// Run an experiment without writing files. `options` uses the keys of the
/// configuration file (`t_grid`, `n_samples`, `tol.<name>`, ...). Returns the
/// JSON report and the exit code.
#[pyfunction]
#[pyo3(signature = (name, options=None))]
fn run_experiment(
    py: Python<'_>,
    name: &str,
    options: Option<Vec<(String, String)>>,
) -> PyResult<(String, i32)> {
    let e: Experiment = name.parse().map_err(err)?;
    let mut cfg = ExperimentConfig::new(e);
    for (k, v) in options.unwrap_or_default() {
        cfg.set(&k, &v).map_err(err)?;
    }
    let report = py.detach(|| experiment::execute(&cfg)).map_err(err)?;
    Ok((report.to_json().map_err(err)?, report.exit_code()))
}

#[pymodule]
fn conifold_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Point>()?;
    m.add_function(wrap_pyfunction!(solve_uprime, m)?)?;
    m.add_function(wrap_pyfunction!(eval_profile, m)?)?;
    m.add_function(wrap_pyfunction!(eval_form, m)?)?;
    m.add_function(wrap_pyfunction!(compare_forms, m)?)?;
    m.add_function(wrap_pyfunction!(vector_norm_sq, m)?)?;
    m.add_function(wrap_pyfunction!(fibrewise_trace, m)?)?;
    m.add_function(wrap_pyfunction!(ricci_max_entry, m)?)?;
    m.add_function(wrap_pyfunction!(radial_length, m)?)?;
    m.add_function(wrap_pyfunction!(zero_section_area, m)?)?;
    m.add_function(wrap_pyfunction!(zero_section_diameter, m)?)?;
    m.add_function(wrap_pyfunction!(cloud_diameter, m)?)?;
    m.add_function(wrap_pyfunction!(gh_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", experiment::VERSION)?;
    Ok(())
}

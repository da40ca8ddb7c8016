//! Python bindings for the orbitmax core: a thin veneer over the analytic
//! integral, the dual solver, polytope membership, and the Monte-Carlo
//! validators. Coordinate conventions are identical to the Rust API; errors
//! surface as ValueError with the library's stable error code prefixed.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use orbitmax::lie_core::CartanVector;
use orbitmax::solver::ProblemInstance;
use orbitmax::{geometry, hc_oracle, mc_validate, Family, GroupSpec};

fn to_py_err(e: orbitmax::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.code()))
}

fn spec(family: &str, n: usize) -> PyResult<GroupSpec> {
    let fam = match family {
        "U" => Family::U,
        "SU" => Family::SU,
        "SOeven" => Family::SOeven,
        "SOodd" => Family::SOodd,
        "Oeven" => Family::Oeven,
        "USp" => Family::USp,
        other => {
            return Err(PyValueError::new_err(format!(
                "UNKNOWN_FAMILY: {other:?} is not one of U, SU, SOeven, SOodd, Oeven, USp"
            )))
        }
    };
    GroupSpec::new(fam, n).map_err(to_py_err)
}

fn cartan(s: &GroupSpec, coords: Vec<f64>) -> PyResult<CartanVector> {
    s.cartan(coords).map_err(to_py_err)
}

/// log ∫_G exp(−⟨Y, Ad_g F⟩) dg and its Y-gradient.
///
/// Returns (log_value, gradient, condition_estimate, confluent).
#[pyfunction]
fn log_integral(
    family: &str,
    n: usize,
    f: Vec<f64>,
    y: Vec<f64>,
) -> PyResult<(f64, Vec<f64>, f64, bool)> {
    let s = spec(family, n)?;
    let r = hc_oracle::log_integral(&s, &cartan(&s, f)?, &cartan(&s, y)?).map_err(to_py_err)?;
    Ok((
        r.log_value,
        r.gradient.coords().to_vec(),
        r.condition_estimate,
        r.confluent,
    ))
}

/// Maximum-entropy dual solve: minimize ⟨Y, A⟩ + E_F(Y) over the feasible
/// subspace.
#[pyclass(get_all)]
struct SolveResult {
    y_opt: Vec<f64>,
    f_value: f64,
    grad_norm: f64,
    iterations: usize,
    r_used: f64,
    log_partition: f64,
    mean: Vec<f64>,
    mean_deviation: f64,
}

#[pyfunction]
#[pyo3(signature = (family, n, f, a, eta=None, epsilon=1e-6))]
fn solve(
    family: &str,
    n: usize,
    f: Vec<f64>,
    a: Vec<f64>,
    eta: Option<f64>,
    epsilon: f64,
) -> PyResult<SolveResult> {
    let s = spec(family, n)?;
    let f = cartan(&s, f)?;
    let a = cartan(&s, a)?;
    let inst = ProblemInstance::new(s, f, a, eta, epsilon).map_err(to_py_err)?;
    let sol = orbitmax::solver::solve(&inst).map_err(to_py_err)?;
    let density = orbitmax::solver::density_report(&inst, &sol).map_err(to_py_err)?;
    Ok(SolveResult {
        y_opt: sol.y_opt.coords().to_vec(),
        f_value: sol.f_value,
        grad_norm: sol.grad_norm,
        iterations: sol.iterations,
        r_used: sol.r_used,
        log_partition: density.log_partition,
        mean: density.mean.coords().to_vec(),
        mean_deviation: density.mean_deviation,
    })
}

/// Classify A against the orbit polytope of F.
///
/// Returns (status, margin) with status in {"interior", "boundary",
/// "outside"}.
#[pyfunction]
fn membership(family: &str, n: usize, f: Vec<f64>, a: Vec<f64>) -> PyResult<(String, f64)> {
    let s = spec(family, n)?;
    let report =
        geometry::membership(&s, &cartan(&s, f)?, &cartan(&s, a)?).map_err(to_py_err)?;
    Ok((report.status.as_str().to_string(), report.margin))
}

/// Monte-Carlo estimate of the orbital integral on the log scale.
///
/// Returns (mean, stderr); deterministic per (n_samples, seed).
#[pyfunction]
#[pyo3(signature = (family, n, f, y, n_samples=100_000, seed=0))]
fn mc_log_integral(
    family: &str,
    n: usize,
    f: Vec<f64>,
    y: Vec<f64>,
    n_samples: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let s = spec(family, n)?;
    let est =
        mc_validate::mc_log_integral(&s, &cartan(&s, f)?, &cartan(&s, y)?, n_samples, seed)
            .map_err(to_py_err)?;
    Ok((est.mean, est.stderr))
}

/// Search-region radius guaranteeing the dual optimum is enclosed, given an
/// interiority margin η.
#[pyfunction]
fn bounding_radius(d: usize, eta: f64, norm_f: f64) -> PyResult<f64> {
    Ok(geometry::bounding_radius(d, eta, norm_f).map_err(to_py_err)?.radius)
}

#[pymodule]
fn orbitmax_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(log_integral, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(membership, m)?)?;
    m.add_function(wrap_pyfunction!(mc_log_integral, m)?)?;
    m.add_function(wrap_pyfunction!(bounding_radius, m)?)?;
    Ok(())
}

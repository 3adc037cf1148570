//! Python bindings: the domination parameter set plus the main exact and
//! Monte Carlo entry points, returning plain dicts/lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cylwalk::disconnect;
use cylwalk::domination;
use cylwalk::interlace;
use cylwalk::lattice::{self, make_box, Geometry, Point, Region};
use cylwalk::rng::RngStream;
use cylwalk::suite;

fn err(e: cylwalk::CoreError) -> PyErr {
    PyValueError::new_err(format!("{e}"))
}

/// Parameter set of the walk-vs-interlacement comparison on the cylinder
/// (Z/N)^d x Z, with all derived scales.
#[pyclass(name = "DominationParams")]
struct PyDominationParams {
    inner: domination::DominationParams,
}

#[pymethods]
impl PyDominationParams {
    #[new]
    fn new(d: u32, n: u32, alpha: f64, v: f64, epsilon: f64) -> PyResult<Self> {
        Ok(PyDominationParams {
            inner: domination::DominationParams::new(d, n, alpha, v, epsilon).map_err(err)?,
        })
    }

    #[getter]
    fn r_n(&self) -> i64 {
        self.inner.r_n
    }

    #[getter]
    fn h_n(&self) -> i64 {
        self.inner.h_n
    }

    #[getter]
    fn k(&self) -> u64 {
        self.inner.k
    }

    #[getter]
    fn k_hat(&self) -> u64 {
        self.inner.k_hat
    }

    #[getter]
    fn k_prime(&self) -> u64 {
        self.inner.k_prime
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    fn lambda_nominal(&self) -> f64 {
        self.inner.lambda()
    }

    /// Exact pointwise chain and intensity comparison; returns a dict with
    /// status, margin, and the windowed error on the whole-space measure.
    fn intensity_domination<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let rep = domination::intensity_domination(&self.inner, None).map_err(err)?;
        let d = PyDict::new_bound(py);
        d.set_item("status", format!("{:?}", rep.status))?;
        d.set_item("margin", rep.margin)?;
        d.set_item("chain_ok", rep.chain_ok)?;
        d.set_item("window_error", rep.window_error)?;
        d.set_item("lambda", rep.lambda)?;
        Ok(d)
    }

    /// Monte Carlo domination experiment; coverage frequencies per point of A.
    fn domination_experiment<'py>(
        &self,
        py: Python<'py>,
        reps: u64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let rep = domination::domination_experiment(
            &self.inner,
            reps,
            None,
            1_000_000_000,
            RngStream::new(seed, 0),
        )
        .map_err(err)?;
        let d = PyDict::new_bound(py);
        d.set_item("degenerate_k", rep.degenerate_k)?;
        d.set_item("frac_ok", rep.frac_ok)?;
        d.set_item("count_walk_mean", rep.count_walk_mean)?;
        d.set_item("count_int_mean", rep.count_int_mean)?;
        d.set_item("count_z", rep.count_z)?;
        d.set_item("walk_cov", rep.walk_cov)?;
        d.set_item("int_cov", rep.int_cov)?;
        Ok(d)
    }
}

/// `(r_N, h_N)`: the two vertical scales of the cylinder.
#[pyfunction]
fn vertical_scales(n: u32) -> (i64, i64) {
    lattice::vertical_scales(n)
}

/// `(p_N, q_N)`: stay/switch probabilities of the departure-sign chain.
#[pyfunction]
fn p_q_n(n: u32) -> (f64, f64) {
    domination::p_q_n(n)
}

/// Exact residuals of the two-level-start hitting identity for a K given as
/// a list of (coords..., height) tuples inside T x (-r_N, r_N).
#[pyfunction]
fn key_identity<'py>(
    py: Python<'py>,
    d: u32,
    n: u32,
    k_points: Vec<Vec<i64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let params = domination::DominationParams::new(d, n, 0.8, 6.0, 0.5).map_err(err)?;
    let g = params.geometry();
    let pts: Vec<Point> = k_points.iter().map(|c| Point::new(&g, c)).collect();
    let k_set = Region::from_points(g, pts);
    let rep = domination::key_identity(&k_set, &params).map_err(err)?;
    let dict = PyDict::new_bound(py);
    dict.set_item("max_residual", rep.max_residual)?;
    dict.set_item("sum_residual", rep.sum_residual)?;
    dict.set_item("capacity", rep.capacity)?;
    Ok(dict)
}

/// Exact torus re-entry law: `(tv, law)` with the law flat-indexed over (Z/N)^d.
#[pyfunction]
fn return_law(d: u32, n: u32) -> PyResult<(f64, Vec<f64>)> {
    let rep = domination::return_law(d, n).map_err(err)?;
    Ok((rep.tv, rep.law))
}

/// Rate function `Psi_N(gamma, v)` of the pair-type chain on the size-N cylinder.
#[pyfunction]
fn psi(gamma: usize, v: f64, n: u32) -> PyResult<f64> {
    let (p, q) = domination::p_q_n(n);
    domination::psi(gamma, v, p, q).map_err(err)
}

/// Exact occupancy recursion against the rate bound.
#[pyfunction]
fn ld_check<'py>(
    py: Python<'py>,
    gamma: usize,
    v: f64,
    steps: u32,
    n: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let (p, q) = domination::p_q_n(n);
    let rep = domination::ld_check(gamma, v, steps, p, q).map_err(err)?;
    let d = PyDict::new_bound(py);
    d.set_item("lhs", rep.lhs)?;
    d.set_item("psi", rep.psi)?;
    d.set_item("bound", rep.bound)?;
    d.set_item("strict", rep.strict)?;
    d.set_item("tight", rep.tight)?;
    Ok(d)
}

/// Closed form of the local-time Laplace transform.
#[pyfunction]
fn zeta_laplace_closed(theta: f64, u: f64) -> PyResult<f64> {
    disconnect::zeta_laplace_closed(theta, u).map_err(err)
}

/// Seeded samples of the discretized local-time functional.
#[pyfunction]
fn zeta_samples(u: f64, n: u64, reps: u64, seed: u64) -> PyResult<Vec<f64>> {
    let stream = RngStream::new(seed, 0);
    (0..reps)
        .map(|i| {
            let mut rng = stream.replicate(i).rng();
            disconnect::zeta_sample(u, n, &mut rng).map(|z| z.value).map_err(err)
        })
        .collect()
}

/// Disconnection time of the cylinder by the walk trace.
#[pyfunction]
fn disconnection_time<'py>(
    py: Python<'py>,
    d: u32,
    n: u32,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let g = Geometry::cylinder(d, n).map_err(err)?;
    let mut rng = RngStream::new(seed, 0).rng();
    let rep =
        disconnect::disconnection_time(&g, &mut rng, None, 1_000_000_000, false).map_err(err)?;
    let dict = PyDict::new_bound(py);
    dict.set_item("t_n", rep.t_n)?;
    dict.set_item("scaled", rep.t_n as f64 / (n as f64).powi(2 * d as i32))?;
    dict.set_item("trace_size", rep.trace_size)?;
    dict.set_item("height_range", rep.height_range)?;
    Ok(dict)
}

/// Void-probability check of the interlacement sampler in Z^3.
#[pyfunction]
fn vacant_check<'py>(
    py: Python<'py>,
    radius: i64,
    kprime_radius: i64,
    u: f64,
    reps: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let g = Geometry::lattice(3).map_err(err)?;
    let k = make_box(&Point::origin(&g), radius, &g).map_err(err)?;
    let kp = make_box(&Point::origin(&g), kprime_radius, &g).map_err(err)?;
    let rep = interlace::vacant_check(&kp, &k, u, reps, None, RngStream::new(seed, 0)).map_err(err)?;
    let d = PyDict::new_bound(py);
    d.set_item("frequency", rep.frequency)?;
    d.set_item("target", rep.target)?;
    d.set_item("zscore", rep.zscore)?;
    d.set_item("leakage", rep.leakage)?;
    Ok(d)
}

/// Run one acceptance criterion; returns its status line and fields.
#[pyfunction]
fn run_criterion<'py>(py: Python<'py>, id: u32, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let rep = suite::run_criterion(id, seed).map_err(err)?;
    let d = PyDict::new_bound(py);
    d.set_item("id", rep.id)?;
    d.set_item("status", format!("{:?}", rep.status))?;
    d.set_item("detail", rep.detail.clone())?;
    d.set_item("line", rep.line())?;
    Ok(d)
}

#[pymodule]
fn cylwalk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDominationParams>()?;
    m.add_function(wrap_pyfunction!(vertical_scales, m)?)?;
    m.add_function(wrap_pyfunction!(p_q_n, m)?)?;
    m.add_function(wrap_pyfunction!(key_identity, m)?)?;
    m.add_function(wrap_pyfunction!(return_law, m)?)?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(ld_check, m)?)?;
    m.add_function(wrap_pyfunction!(zeta_laplace_closed, m)?)?;
    m.add_function(wrap_pyfunction!(zeta_samples, m)?)?;
    m.add_function(wrap_pyfunction!(disconnection_time, m)?)?;
    m.add_function(wrap_pyfunction!(vacant_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_criterion, m)?)?;
    Ok(())
}

//! Python bindings: a thin layer over `mixlab` taking and returning plain
//! lists of floats.

use mixlab::basis::ModeBasis;
use mixlab::equilibria::{find_equilibria as search, MultistartSpec};
use mixlab::field::{Field, Polynomial, TorusGrid};
use mixlab::haar::{sample_kick, ScalarNoiseConfig, XiDensity};
use mixlab::pde::{PdeConfig, Solver};
use mixlab::{mixing, walk, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn solver(n: usize, nu: f64, h: f64, dt: f64) -> Result<Solver, Error> {
    let g = TorusGrid::new(1, n)?;
    let cfg = PdeConfig::new(g, nu, Polynomial::allen_cahn(), Field::constant(g, h), dt)?;
    Solver::new(cfg)?.with_controls(ModeBasis::leading(g, 3)?)
}

/// `κ = (1 − p)/p`.
#[pyfunction]
fn kappa(p: f64) -> f64 {
    walk::kappa(p)
}

/// Probability that the walk started at 0 never reaches `−l`.
#[pyfunction]
fn survival_exact(p: f64, l: u32) -> PyResult<f64> {
    walk::survival_exact(p, l).map_err(py_err)
}

/// Probability that the walk from `m` hits `a` before `b`.
#[pyfunction]
fn ruin_exact(p: f64, m: i64, a: i64, b: i64) -> PyResult<f64> {
    walk::ruin_exact(p, m, a, b).map_err(py_err)
}

/// Bounded-Lipschitz distance between two empirical samples on the line.
#[pyfunction]
fn bl_distance(a: Vec<f64>, b: Vec<f64>) -> f64 {
    mixing::bl_distance_1d(&a, &b)
}

/// Cell values of one Haar kick, one list per control direction.
#[pyfunction]
#[pyo3(signature = (seed, amplitudes, levels = 6, decay = 2.0, density = "parabolic"))]
fn kick_cells(seed: u64, amplitudes: Vec<f64>, levels: u32, decay: f64, density: &str) -> PyResult<Vec<Vec<f64>>> {
    let cfg = ScalarNoiseConfig::new(1.0, decay, levels, XiDensity::parse(density).map_err(py_err)?).map_err(py_err)?;
    let kick = sample_kick(&cfg, &amplitudes, seed).map_err(py_err)?;
    Ok(kick.paths().iter().map(|p| p.cell_values().to_vec()).collect())
}

/// Unforced time-one map of `u' = νΔu − (u³ − u) + h` on the 1-d torus.
#[pyfunction]
#[pyo3(signature = (values, nu, h = 0.0, dt = 0.01))]
fn time_one_map(values: Vec<f64>, nu: f64, h: f64, dt: f64) -> PyResult<Vec<f64>> {
    let s = solver(values.len(), nu, h, dt).map_err(py_err)?;
    let u = Field::new(*s.grid(), values).map_err(py_err)?;
    Ok(s.time_one_map(&u, None).map_err(py_err)?.into_values())
}

/// Multistart equilibrium search; returns `(values, residual, lyapunov, stable)`
/// per equilibrium, the stable target last.
#[pyfunction]
#[pyo3(signature = (n, nu, h = 0.0, random_starts = 32, seed = 0))]
fn find_equilibria(n: usize, nu: f64, h: f64, random_starts: usize, seed: u64) -> PyResult<Vec<(Vec<f64>, f64, f64, bool)>> {
    let s = solver(n, nu, h, 0.01).map_err(py_err)?;
    let set = search(&s, &MultistartSpec { random_starts, seed, ..Default::default() }).map_err(py_err)?;
    Ok(set
        .members
        .into_iter()
        .map(|e| (e.state.into_values(), e.residual, e.lyapunov, e.stable))
        .collect())
}

#[pymodule]
fn mixlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(survival_exact, m)?)?;
    m.add_function(wrap_pyfunction!(ruin_exact, m)?)?;
    m.add_function(wrap_pyfunction!(bl_distance, m)?)?;
    m.add_function(wrap_pyfunction!(kick_cells, m)?)?;
    m.add_function(wrap_pyfunction!(time_one_map, m)?)?;
    m.add_function(wrap_pyfunction!(find_equilibria, m)?)?;
    Ok(())
}

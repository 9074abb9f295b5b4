//! Python bindings: parameters, steady states with stability, thresholds,
//! susceptibility and basin tests.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use multistab_eit::dynamics;
use multistab_eit::stability::{classify_all, jacobian, spectrum};
use multistab_eit::steady_state::{solve, BranchSolution};
use multistab_eit::susceptibility;
use multistab_eit::thresholds;
use multistab_eit::SystemParams;

#[pyclass(name = "SystemParams", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct PyParams {
    gamma1: f64,
    gamma0: f64,
    gamma2: f64,
    /// None means 0.1 * M * omega_M.
    gamma_m: Option<f64>,
    omega: f64,
    g_n: f64,
    alpha_in: f64,
    omega_a: f64,
    delta_c: f64,
    kappa: f64,
    omega_m: f64,
    l: f64,
    f_scale: f64,
}

impl From<SystemParams> for PyParams {
    fn from(p: SystemParams) -> Self {
        Self {
            gamma1: p.gamma1,
            gamma0: p.gamma0,
            gamma2: p.gamma2,
            gamma_m: p.gamma_m,
            omega: p.omega,
            g_n: p.g_n,
            alpha_in: p.alpha_in,
            omega_a: p.omega_a,
            delta_c: p.delta_c,
            kappa: p.kappa,
            omega_m: p.omega_m,
            l: p.l,
            f_scale: p.f_scale,
        }
    }
}

impl PyParams {
    fn inner(&self) -> PyResult<SystemParams> {
        let p = SystemParams {
            gamma1: self.gamma1,
            gamma0: self.gamma0,
            gamma2: self.gamma2,
            gamma_m: self.gamma_m,
            omega: self.omega,
            g_n: self.g_n,
            alpha_in: self.alpha_in,
            omega_a: self.omega_a,
            delta_c: self.delta_c,
            kappa: self.kappa,
            omega_m: self.omega_m,
            l: self.l,
            f_scale: self.f_scale,
        };
        p.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(p)
    }
}

#[pymethods]
impl PyParams {
    /// Showcase defaults; pass `kappa=` etc. to override.
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut p = PyParams::from(SystemParams::paper_defaults());
        if let Some(kw) = kwargs {
            let py = kw.py();
            let obj = Bound::new(py, p)?;
            for (k, v) in kw.iter() {
                obj.as_any().setattr(k.cast_into::<pyo3::types::PyString>()?, v)?;
            }
            p = obj.borrow().clone();
        }
        p.inner()?;
        Ok(p)
    }

    #[staticmethod]
    fn stiffness_reduced() -> Self {
        SystemParams::stiffness_reduced().into()
    }

    #[staticmethod]
    fn from_config(path: &str) -> PyResult<Self> {
        SystemParams::from_config_file(std::path::Path::new(path))
            .map(Into::into)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_config(&self) -> PyResult<String> {
        Ok(self.inner()?.to_config_string())
    }

    fn mirror_mass(&self) -> PyResult<f64> {
        Ok(self.inner()?.mirror_mass())
    }

    fn __repr__(&self) -> String {
        format!(
            "SystemParams(kappa={}, gN={}, Omega={}, alpha_in={}, gamma0={}, gamma2={}, omega_a={}, Delta_c={})",
            self.kappa, self.g_n, self.omega, self.alpha_in, self.gamma0, self.gamma2, self.omega_a, self.delta_c
        )
    }
}

#[pyclass(name = "Branch", get_all, frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBranch {
    branch_index: usize,
    delta_ps: f64,
    shift: f64,
    x_s: f64,
    a_s: Complex64,
    big_a_s: Complex64,
    c_s: Complex64,
    stability: String,
    degenerate: bool,
    max_real_eig: f64,
}

#[pymethods]
impl PyBranch {
    fn __repr__(&self) -> String {
        format!(
            "Branch({}, delta_ps={:.6e}, x_s={:.6e}, {})",
            self.branch_index, self.delta_ps, self.x_s, self.stability
        )
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn classified(delta0: f64, p: &SystemParams) -> PyResult<Vec<(BranchSolution, f64)>> {
    let mut s = solve(delta0, p).map_err(runtime)?;
    let v = classify_all(&mut s, p);
    Ok(s.branches.into_iter().zip(v.into_iter().map(|v| v.max_real_eig)).collect())
}

/// Steady states at `delta0`, classified, in descending Δps.
#[pyfunction]
fn steady_states(delta0: f64, params: &PyParams) -> PyResult<Vec<PyBranch>> {
    let p = params.inner()?;
    Ok(classified(delta0, &p)?
        .into_iter()
        .map(|(b, max_real_eig)| PyBranch {
            branch_index: b.branch_index,
            delta_ps: b.delta_ps,
            shift: b.shift,
            x_s: b.x_s,
            a_s: b.a_s,
            big_a_s: b.big_a_s,
            c_s: b.c_s,
            stability: b.stability.to_string(),
            degenerate: b.degenerate,
            max_real_eig,
        })
        .collect())
}

#[pyfunction]
fn root_count(delta0: f64, params: &PyParams) -> PyResult<usize> {
    Ok(thresholds::count_roots(delta0, &params.inner()?))
}

/// Jacobian eigenvalues of one branch, least stable first.
#[pyfunction]
fn eigenvalues(delta0: f64, branch_index: usize, params: &PyParams) -> PyResult<Vec<Complex64>> {
    let p = params.inner()?;
    let s = solve(delta0, &p).map_err(runtime)?;
    let b = s
        .branch(branch_index)
        .ok_or_else(|| PyValueError::new_err(format!("no branch {branch_index} at {delta0}")))?;
    Ok(spectrum(&jacobian(b, delta0, &p)).0.to_vec())
}

/// `(thresholds, regions)`: thresholds as `(kind, delta0, count_below,
/// count_above)`, regions as `(label, lo, hi, count)`.
#[pyfunction]
#[pyo3(signature = (params, delta0_min, delta0_max=None))]
#[allow(clippy::type_complexity)]
fn find_thresholds(
    params: &PyParams,
    delta0_min: f64,
    delta0_max: Option<f64>,
) -> PyResult<(Vec<(String, f64, usize, usize)>, Vec<(String, f64, f64, usize)>)> {
    let p = params.inner()?;
    let hi = delta0_max.unwrap_or_else(|| thresholds::max_delta0(&p));
    let r = thresholds::find_thresholds(&p, delta0_min, hi).map_err(runtime)?;
    Ok((
        r.thresholds
            .iter()
            .map(|t| (t.kind.name().to_string(), t.delta0, t.count_below, t.count_above))
            .collect(),
        r.regions
            .iter()
            .map(|g| (g.label.as_str().to_string(), g.lo, g.hi, g.count))
            .collect(),
    ))
}

#[pyfunction]
fn kappa_lower_bound(params: &PyParams, kappa_min: f64, kappa_max: f64) -> PyResult<f64> {
    let p = params.inner()?;
    thresholds::kappa_lower_bound(&p, kappa_min, kappa_max)
        .map(|k| k.kappa_l)
        .map_err(runtime)
}

/// χ at a steady-state detuning Δps.
#[pyfunction]
fn chi(delta_ps: f64, params: &PyParams) -> PyResult<Complex64> {
    let v = susceptibility::chi_at(delta_ps, 0, &params.inner()?).map_err(runtime)?;
    Ok(Complex64::new(v.re, v.im))
}

/// `(delta0, branch_index, chi)` for every stable branch on the grid.
#[pyfunction]
fn chi_sweep(params: &PyParams, grid: Vec<f64>) -> PyResult<Vec<(f64, usize, Complex64)>> {
    let p = params.inner()?;
    let s = susceptibility::chi_sweep(&p, &grid).map_err(runtime)?;
    let mut out: Vec<(usize, usize, Complex64)> = s
        .curves
        .iter()
        .flat_map(|c| c.points.iter().map(|&(gi, v)| (gi, v.branch_index, Complex64::new(v.re, v.im))))
        .collect();
    out.sort_by_key(|&(gi, b, _)| (gi, b));
    Ok(out.into_iter().map(|(gi, b, z)| (grid[gi], b, z)).collect())
}

/// `(converged, times, distances)` after kicking a branch by `epsilon`.
#[pyfunction]
#[pyo3(signature = (delta0, branch_index, params, epsilon, t_max=None, tol=1e-8))]
fn basin_test(
    delta0: f64,
    branch_index: usize,
    params: &PyParams,
    epsilon: f64,
    t_max: Option<f64>,
    tol: f64,
) -> PyResult<(bool, Vec<f64>, Vec<f64>)> {
    let p = params.inner()?;
    let b = classified(delta0, &p)?
        .into_iter()
        .map(|(b, _)| b)
        .find(|b| b.branch_index == branch_index)
        .ok_or_else(|| PyValueError::new_err(format!("no branch {branch_index} at {delta0}")))?;
    let o = dynamics::basin_test(&b, delta0, &p, epsilon, t_max, tol).map_err(runtime)?;
    Ok((o.converged, o.trajectory.times, o.distances))
}

#[pymodule]
fn multistab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyBranch>()?;
    m.add_function(wrap_pyfunction!(steady_states, m)?)?;
    m.add_function(wrap_pyfunction!(root_count, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(find_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(chi, m)?)?;
    m.add_function(wrap_pyfunction!(chi_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(basin_test, m)?)?;
    Ok(())
}

//! Python bindings: point clouds, density models, scheme evaluation and the sweep solver.

use lshj_core::cli::{parse_estimator, parse_hamiltonian, CliError};
use lshj_core::oracles;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn core_err(e: lshj_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn cli_err(e: CliError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Grid or kNN point cloud with a boundary mask.
#[pyclass(name = "PointCloud", module = "lshj", frozen)]
struct PyPointCloud {
    inner: lshj_core::PointCloud,
}

#[pymethods]
impl PyPointCloud {
    /// Uniform grid on `[0,1]^d` with `dims` nodes per axis. `stencil` is `"3"`, `"5"`, `"7"`,
    /// `"ring:K"` etc.; `eps` marks a boundary band of that width.
    #[staticmethod]
    #[pyo3(signature = (dims, stencil="7", eps=None))]
    fn grid(dims: Vec<usize>, stencil: &str, eps: Option<f64>) -> PyResult<Self> {
        let st = lshj_core::Stencil::parse(stencil, dims.len()).map_err(core_err)?;
        let boundary = match eps {
            Some(e) => lshj_core::BoundarySpec::unit_cube_band(dims.len(), Some(e)),
            None => lshj_core::BoundarySpec::None,
        };
        let inner = lshj_core::build_grid_cloud(&dims, &st, boundary).map_err(core_err)?;
        Ok(PyPointCloud { inner })
    }

    /// kNN graph over `points`. Boundary is `mask` if given, else a band of width `eps`
    /// (default `h`) inside the unit cube.
    #[staticmethod]
    #[pyo3(signature = (points, k=20, mask=None, eps=None))]
    fn knn(points: Vec<Vec<f64>>, k: usize, mask: Option<Vec<bool>>, eps: Option<f64>) -> PyResult<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        let boundary = match mask {
            Some(m) => lshj_core::BoundarySpec::Mask(m),
            None => lshj_core::BoundarySpec::unit_cube_band(dim, eps),
        };
        let inner = lshj_core::build_knn_cloud(&points, k, boundary).map_err(core_err)?;
        Ok(PyPointCloud { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PointCloud(n={}, d={}, h={:.4e}, dtheta={:.4e})",
            self.inner.len(),
            self.inner.dim(),
            self.inner.h(),
            self.inner.dtheta()
        )
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn dtheta(&self) -> f64 {
        self.inner.dtheta()
    }

    fn points(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.point(i).to_vec()).collect()
    }

    fn boundary(&self) -> Vec<bool> {
        self.inner.boundary_mask().to_vec()
    }

    /// Displacements `y - x` to the neighbours of node `i`.
    fn neighbors(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err("node index out of range"));
        }
        Ok((0..self.inner.degree(i)).map(|j| self.inner.displacement(i, j).to_vec()).collect())
    }
}

/// Density model: shape indicator, constant, or Gaussian KDE.
#[pyclass(name = "Density", module = "lshj", frozen)]
#[derive(Clone)]
struct PyDensity {
    inner: lshj_core::DensityModel,
}

#[pymethods]
impl PyDensity {
    /// Normalized indicator of a named shape (`circle`, `donut`, `square`, `two_balls`, ...).
    #[staticmethod]
    fn preset(name: &str, dim: usize) -> PyResult<Self> {
        let inner = lshj_core::DensityModel::preset(name, dim).map_err(core_err)?;
        Ok(PyDensity { inner })
    }

    #[staticmethod]
    fn constant(c: f64) -> Self {
        PyDensity {
            inner: lshj_core::DensityModel::constant(c),
        }
    }

    #[staticmethod]
    fn kde(samples: Vec<Vec<f64>>, bandwidth: f64) -> PyResult<Self> {
        let inner = lshj_core::DensityModel::kde(&samples, bandwidth).map_err(core_err)?;
        Ok(PyDensity { inner })
    }

    fn __call__(&self, x: Vec<f64>) -> f64 {
        lshj_core::density::density_at(&self.inner, &x)
    }

    /// `n` samples drawn from the density.
    #[pyo3(signature = (n, seed=7))]
    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        lshj_core::density::sample_density(&self.inner, n, seed).map_err(core_err)
    }

    /// Mass on the hyperplane through `x` with normal `p`, in closed form.
    fn hyperplane_integral(&self, x: Vec<f64>, p: Vec<f64>) -> PyResult<f64> {
        lshj_core::density::hyperplane_integral_analytic(&self.inner, &x, &p).map_err(core_err)
    }
}

/// Hamiltonian, right-hand side and estimator.
#[pyclass(name = "Scheme", module = "lshj", frozen)]
struct PyScheme {
    inner: lshj_core::SchemeSpec,
}

#[pymethods]
impl PyScheme {
    /// `hamiltonian` uses the command-line names (`eikonal`, `tukey`, `mc2d`, `alpha:A`, ...).
    /// `rhs` is a `Density` or a number; `estimator` is `auto`, `grid`, `analytic` or `mc`.
    #[new]
    #[pyo3(signature = (hamiltonian, dim, rhs=None, estimator="auto", seed=7))]
    fn new(hamiltonian: &str, dim: usize, rhs: Option<&Bound<'_, PyAny>>, estimator: &str, seed: u64) -> PyResult<Self> {
        let h = parse_hamiltonian(hamiltonian, dim).map_err(cli_err)?;
        let rhs = match rhs {
            None => lshj_core::Rhs::Constant(1.0),
            Some(obj) => match obj.downcast::<PyDensity>() {
                Ok(d) => lshj_core::Rhs::Density(d.get().inner.clone()),
                Err(_) => lshj_core::Rhs::Constant(obj.extract::<f64>()?),
            },
        };
        let est = parse_estimator(Some(estimator), seed).map_err(cli_err)?;
        let inner = lshj_core::SchemeSpec::new(h, rhs).map_err(core_err)?.with_estimator(est);
        Ok(PyScheme { inner })
    }

    /// Scheme value `S(u, t, x_i)`.
    fn value(&self, cloud: &PyPointCloud, u: Vec<f64>, t: f64, node: usize) -> PyResult<f64> {
        let field = lshj_core::ScalarField::new(u).map_err(core_err)?;
        lshj_core::scheme_value(&self.inner, &field, t, node, &cloud.inner).map_err(core_err)
    }

    /// Mean absolute scheme value over interior nodes.
    fn residual(&self, cloud: &PyPointCloud, u: Vec<f64>) -> PyResult<f64> {
        let field = lshj_core::ScalarField::new(u).map_err(core_err)?;
        lshj_core::residual(&self.inner, &field, &cloud.inner).map_err(core_err)
    }
}

/// Neighbour indices in the discrete subdifferential of `u` at level `t` and node `i`.
#[pyfunction]
fn subdifferential(cloud: &PyPointCloud, u: Vec<f64>, t: f64, node: usize) -> PyResult<Vec<usize>> {
    let field = lshj_core::ScalarField::new(u).map_err(core_err)?;
    let set = lshj_core::subdifferential(&field, t, node, &cloud.inner).map_err(core_err)?;
    Ok(set.indices())
}

/// Runs Jacobi sweeps until the residual drops below `tol`. Returns a dict with the field
/// and the solve report.
#[pyfunction]
#[pyo3(signature = (scheme, cloud, init=None, dirichlet=None, tol=3e-3, max_sweeps=10_000))]
fn solve<'py>(
    py: Python<'py>,
    scheme: &PyScheme,
    cloud: &PyPointCloud,
    init: Option<Vec<f64>>,
    dirichlet: Option<Vec<f64>>,
    tol: f64,
    max_sweeps: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let n = cloud.inner.len();
    let field = |v: Option<Vec<f64>>| match v {
        Some(v) => lshj_core::ScalarField::new(v).map_err(core_err),
        None => Ok(lshj_core::ScalarField::zeros(n)),
    };
    let (init, dirichlet) = (field(init)?, field(dirichlet)?);
    let report = py
        .allow_threads(|| lshj_core::solve(&scheme.inner, &cloud.inner, &dirichlet, &init, tol, max_sweeps))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let out = PyDict::new(py);
    out.set_item("u", report.final_field.values().to_vec())?;
    out.set_item("iterations", report.iterations)?;
    out.set_item("residuals", report.residual_history.clone())?;
    out.set_item("final_residual", report.final_residual())?;
    out.set_item("converged", report.converged)?;
    out.set_item("stop_reason", format!("{:?}", report.stop_reason).to_lowercase())?;
    out.set_item("wall_time_s", report.wall_time)?;
    out.set_item("flagged_nodes", report.flagged_nodes.clone())?;
    Ok(out)
}

/// Tukey depth of `x` by minimizing halfspace mass over `n_dirs` directions.
#[pyfunction]
#[pyo3(signature = (density, x, n_dirs=oracles::CANONICAL_DIRECTIONS))]
fn tukey_depth(density: &PyDensity, x: Vec<f64>, n_dirs: usize) -> PyResult<f64> {
    oracles::brute_tukey_depth(&density.inner, &x, n_dirs).map_err(core_err)
}

#[pyfunction]
fn l1_error(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    oracles::l1_error(&a, &b).map_err(core_err)
}

#[pyfunction]
fn linf_error(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    oracles::linf_error(&a, &b).map_err(core_err)
}

#[pymodule]
fn lshj(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyDensity>()?;
    m.add_class::<PyScheme>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(subdifferential, m)?)?;
    m.add_function(wrap_pyfunction!(tukey_depth, m)?)?;
    m.add_function(wrap_pyfunction!(l1_error, m)?)?;
    m.add_function(wrap_pyfunction!(linf_error, m)?)?;
    Ok(())
}

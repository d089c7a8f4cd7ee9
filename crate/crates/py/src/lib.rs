//! Python bindings for `tcs-core`.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tcs_core::linalg::{matrix_from_rows, matrix_to_rows};
use tcs_core::obstruction as obs;
use tcs_core::pde::{self, PropagateOptions};
use tcs_core::runner;
use tcs_core::scenario::Scenario;
use tcs_core::Error;

fn py_err(e: Error) -> PyErr {
    if e.is_numerical_guard() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for tcs_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn rows(m: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    matrix_from_rows(&m).py()
}

#[pyclass(name = "Potential", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Potential(tcs_core::PotentialSpec);

#[pymethods]
impl Potential {
    #[staticmethod]
    fn zero(dim: usize) -> PyResult<Self> {
        tcs_core::PotentialSpec::zero(dim).py().map(Self)
    }

    #[staticmethod]
    fn harmonic(omega_sq: Vec<Vec<f64>>) -> PyResult<Self> {
        tcs_core::PotentialSpec::harmonic(rows(omega_sq)?).py().map(Self)
    }

    #[staticmethod]
    fn cosine_harmonic(omega_sq: Vec<Vec<f64>>, amplitude: f64, wavevector: Vec<f64>) -> PyResult<Self> {
        tcs_core::PotentialSpec::cosine_harmonic(rows(omega_sq)?, amplitude, DVector::from_vec(wavevector))
            .py()
            .map(Self)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn hess_sup(&self) -> f64 {
        self.0.hess_sup()
    }

    #[getter]
    fn third_sup(&self) -> f64 {
        self.0.third_sup()
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.0.eval_potential(&x))
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check(&x)?;
        Ok(self.0.eval_gradient(&x).iter().copied().collect())
    }

    fn hessian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.check(&x)?;
        Ok(matrix_to_rows(&self.0.eval_hessian(&x)))
    }

    fn __repr__(&self) -> String {
        format!("Potential({:?})", self.0.to_config())
    }
}

impl Potential {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.0.dim() {
            return Err(py_err(Error::DimensionMismatch { expected: self.0.dim(), got: x.len() }));
        }
        Ok(())
    }
}

#[pyclass(name = "Control", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Control(tcs_core::ControlSignal);

#[pymethods]
impl Control {
    #[staticmethod]
    fn zero(dim: usize, horizon: f64) -> PyResult<Self> {
        tcs_core::ControlSignal::zero(dim, horizon).py().map(Self)
    }

    #[staticmethod]
    fn constant(value: Vec<f64>, horizon: f64) -> PyResult<Self> {
        tcs_core::ControlSignal::constant(value, horizon).py().map(Self)
    }

    #[staticmethod]
    fn sinusoid(amplitude: Vec<f64>, angular_freq: f64, phase: f64, horizon: f64) -> PyResult<Self> {
        tcs_core::ControlSignal::sinusoid(amplitude, angular_freq, phase, horizon).py().map(Self)
    }

    #[staticmethod]
    fn piecewise_constant(values: Vec<Vec<f64>>, horizon: f64) -> PyResult<Self> {
        tcs_core::ControlSignal::piecewise_constant(values, horizon).py().map(Self)
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sup_norm(&self) -> f64 {
        self.0.sup_norm()
    }

    fn __call__(&self, t: f64) -> Vec<f64> {
        self.0.eval(t).iter().copied().collect()
    }
}

#[pyclass(name = "Trajectory", frozen, skip_from_py_object)]
struct Trajectory {
    classical: tcs_core::ClassicalTrajectory,
    riccati: tcs_core::RiccatiTrajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.classical.times.clone()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        self.classical.x.iter().map(|v| v.iter().copied().collect()).collect()
    }

    #[getter]
    fn v(&self) -> Vec<Vec<f64>> {
        self.classical.v.iter().map(|v| v.iter().copied().collect()).collect()
    }

    #[getter]
    fn q1(&self) -> Vec<Vec<Vec<f64>>> {
        self.riccati.q1.iter().map(matrix_to_rows).collect()
    }

    #[getter]
    fn q2(&self) -> Vec<Vec<Vec<f64>>> {
        self.riccati.q2.iter().map(matrix_to_rows).collect()
    }

    #[getter]
    fn blow_up_at(&self) -> Option<f64> {
        self.riccati.blow_up_at
    }

    /// `(min_eig, max_eig, holds)` of Q₂ on `[0, t]`.
    fn q2_band(&self, t: f64) -> PyResult<(f64, f64, bool)> {
        let r = self.riccati.check_q2_band(t).py()?;
        Ok((r.min_eig, r.max_eig, r.holds))
    }

    fn max_det_residual(&self, t: f64) -> f64 {
        self.riccati.max_det_residual(t)
    }

    /// Error bound `C_*‖V⁽³⁾‖∞∫‖Q₂⁻¹‖^{3/2}` at time `t`.
    fn error_bound(&self, potential: &Potential, t: f64) -> PyResult<f64> {
        tcs_core::error_bound(&self.riccati, &potential.0, t).py()
    }

    /// Packet sampled at trajectory sample `i` on `grid`.
    fn packet(&self, i: usize, grid: &Grid) -> PyResult<Field> {
        let w = tcs_core::packet_at(&self.classical, &self.riccati, i).py()?;
        tcs_core::evaluate_packet(&w, &grid.0).py().map(Field)
    }
}

#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Grid(pde::Grid);

#[pymethods]
impl Grid {
    #[new]
    fn new(lo: Vec<f64>, hi: Vec<f64>, points: Vec<usize>) -> PyResult<Self> {
        pde::Grid::new(lo, hi, points).py().map(Self)
    }

    #[getter]
    fn lo(&self) -> Vec<f64> {
        self.0.lo.clone()
    }

    #[getter]
    fn hi(&self) -> Vec<f64> {
        self.0.hi.clone()
    }

    #[getter]
    fn points(&self) -> Vec<usize> {
        self.0.points.clone()
    }

    fn axis(&self, axis: usize) -> PyResult<Vec<f64>> {
        if axis >= self.0.dim() {
            return Err(PyValueError::new_err(format!("axis {axis} out of range")));
        }
        Ok(self.0.axis_coords(axis))
    }
}

#[pyclass(name = "Field", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Field(pde::ComplexField);

#[pymethods]
impl Field {
    #[new]
    fn new(grid: &Grid, values: Vec<Complex64>) -> PyResult<Self> {
        pde::ComplexField::new(grid.0.clone(), values).py().map(Self)
    }

    /// Initial packet `ψ₀` of width `b` centred at `(x0, v0)`.
    #[staticmethod]
    fn initial(grid: &Grid, b: f64, x0: Vec<f64>, v0: Vec<f64>) -> PyResult<Self> {
        tcs_core::tcs::initial_state(&grid.0, b, &DVector::from_vec(x0), &DVector::from_vec(v0)).py().map(Self)
    }

    /// Normalized sum of unit Gaussians of width `b` at `centers`.
    #[staticmethod]
    fn bumps(grid: &Grid, b: f64, centers: Vec<Vec<f64>>) -> PyResult<Self> {
        obs::multi_bump_target(&grid.0, b, &centers).py().map(Self)
    }

    #[getter]
    fn grid(&self) -> Grid {
        Grid(self.0.grid.clone())
    }

    #[getter]
    fn values(&self) -> Vec<Complex64> {
        self.0.values.clone()
    }

    fn norm(&self) -> f64 {
        self.0.l2_norm()
    }

    fn distance(&self, other: &Field) -> PyResult<f64> {
        self.0.l2_distance(&other.0).py()
    }

    fn tail_mass(&self) -> f64 {
        self.0.tail_mass()
    }
}

#[pyfunction]
fn integrate(
    potential: &Potential,
    control: &Control,
    x0: Vec<f64>,
    v0: Vec<f64>,
    dt: f64,
    b: f64,
) -> PyResult<Trajectory> {
    let classical =
        tcs_core::integrate_newton(&potential.0, &control.0, &DVector::from_vec(x0), &DVector::from_vec(v0), dt)
            .py()?;
    let riccati = tcs_core::integrate_riccati(&potential.0, &classical, b).py()?;
    Ok(Trajectory { classical, riccati })
}

#[pyfunction]
#[pyo3(signature = (field, potential, control, t0, t1, dt, tail_budget = 1e-10))]
fn propagate(
    field: &Field,
    potential: &Potential,
    control: &Control,
    t0: f64,
    t1: f64,
    dt: f64,
    tail_budget: f64,
) -> PyResult<Field> {
    let (last, _) =
        pde::propagate(&field.0, &potential.0, &control.0, t0, t1, dt, None, PropagateOptions { tail_budget }).py()?;
    Ok(Field(last))
}

#[pyfunction]
fn constant_cn(dim: usize) -> f64 {
    tcs_core::constant_cn(dim)
}

#[pyfunction]
fn constant_c_star(dim: usize) -> f64 {
    tcs_core::constant_c_star(dim)
}

#[pyfunction]
fn compute_t_star(b: f64, hess_sup: f64) -> PyResult<f64> {
    tcs_core::compute_t_star(b, hess_sup).py()
}

#[pyfunction]
fn compute_t_double_star(delta0: f64, b: f64, potential: &Potential, t_star: f64) -> PyResult<(f64, f64)> {
    obs::compute_t_double_star(delta0, b, &potential.0, t_star).py()
}

/// `(delta0, q, alpha)` for the distance of `target` to the Gaussian-profile set.
#[pyfunction]
fn gaussian_set_distance(target: &Field, b: f64) -> PyResult<(f64, Vec<Vec<f64>>, Vec<f64>)> {
    let fit = obs::gaussian_set_distance(&target.0, b).py()?;
    Ok((fit.delta0, matrix_to_rows(&fit.q), fit.alpha.iter().copied().collect()))
}

/// Runs `propagate`, `obstruct` or `check` on a TOML scenario and returns
/// the JSON report. Artifacts are written to `out_dir`.
#[pyfunction]
#[pyo3(signature = (command, scenario_toml, out_dir, seed = None))]
fn run_scenario(
    py: Python<'_>,
    command: &str,
    scenario_toml: &str,
    out_dir: PathBuf,
    seed: Option<u64>,
) -> PyResult<String> {
    let mut sc = Scenario::parse(scenario_toml).py()?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let rs = sc.resolve().py()?;
    let command = command.to_owned();
    py.detach(move || -> tcs_core::Result<String> {
        let json = match command.as_str() {
            "propagate" => serde_json::to_string_pretty(&runner::cmd_propagate(&rs, &out_dir)?),
            "obstruct" => serde_json::to_string_pretty(&runner::cmd_obstruct(&rs, &out_dir)?),
            "check" => serde_json::to_string_pretty(&runner::cmd_check(&rs, &out_dir)?),
            other => return Err(Error::InvalidInput(format!("unknown command {other:?}"))),
        };
        Ok(json.expect("report serializes"))
    })
    .py()
}

#[pymodule]
fn tcs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Potential>()?;
    m.add_class::<Control>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<Grid>()?;
    m.add_class::<Field>()?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(propagate, m)?)?;
    m.add_function(wrap_pyfunction!(constant_cn, m)?)?;
    m.add_function(wrap_pyfunction!(constant_c_star, m)?)?;
    m.add_function(wrap_pyfunction!(compute_t_star, m)?)?;
    m.add_function(wrap_pyfunction!(compute_t_double_star, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_set_distance, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}

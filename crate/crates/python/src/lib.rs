//! Python bindings for the `fermion_rpa` core crate.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fermion_rpa::bogokernel as bk;
use fermion_rpa::lattice::{self, Momentum};
use fermion_rpa::{patches, rpa};

fn err(e: fermion_rpa::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mom(k: (i64, i64, i64)) -> Momentum {
    Momentum::new(k.0, k.1, k.2)
}

fn tup(k: &Momentum) -> (i64, i64, i64) {
    (k.px, k.py, k.pz)
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Integer momenta inside the closed ball |p|² ≤ k_F².
#[pyclass(name = "FermiBall", module = "fermion_rpa_py", frozen)]
pub struct PyFermiBall {
    inner: lattice::FermiBall,
}

#[pymethods]
impl PyFermiBall {
    /// Pass exactly one of `k_fermi` or `kf_sq`.
    #[new]
    #[pyo3(signature = (k_fermi=None, kf_sq=None))]
    fn new(k_fermi: Option<f64>, kf_sq: Option<f64>) -> PyResult<Self> {
        let inner = match (k_fermi, kf_sq) {
            (Some(k), None) => lattice::FermiBall::new(k),
            (None, Some(k2)) => lattice::FermiBall::from_kf_sq_f64(k2),
            _ => return Err(PyValueError::new_err("pass exactly one of k_fermi or kf_sq")),
        }
        .map_err(err)?;
        Ok(PyFermiBall { inner })
    }

    /// Ball with k_F² = n + 1/2, so no lattice point sits on the sphere.
    #[staticmethod]
    fn half_integer(n: i64) -> PyResult<Self> {
        Ok(PyFermiBall {
            inner: lattice::FermiBall::half_integer(n).map_err(err)?,
        })
    }

    #[getter]
    fn n_particles(&self) -> u64 {
        self.inner.n_particles()
    }
    #[getter]
    fn k_fermi(&self) -> f64 {
        self.inner.k_fermi()
    }
    #[getter]
    fn kf_sq(&self) -> f64 {
        self.inner.kf_sq_f64()
    }
    #[getter]
    fn hbar(&self) -> f64 {
        self.inner.hbar()
    }
    #[getter]
    fn coupling(&self) -> f64 {
        self.inner.lambda()
    }
    #[getter]
    fn kappa_eff(&self) -> f64 {
        self.inner.kappa_eff()
    }

    fn contains(&self, p: (i64, i64, i64)) -> bool {
        self.inner.contains(&mom(p))
    }

    fn kinetic_reciprocal_sum(&self, k: (i64, i64, i64)) -> PyResult<f64> {
        self.inner.kinetic_reciprocal_sum(&mom(k)).map_err(err)
    }

    fn equator_reciprocal_sum(&self, k: (i64, i64, i64), delta: f64) -> PyResult<f64> {
        self.inner.equator_reciprocal_sum(&mom(k), delta).map_err(err)
    }

    fn slice_counts(&self, k: (i64, i64, i64)) -> PyResult<std::collections::BTreeMap<i64, u64>> {
        self.inner.slice_counts(&mom(k)).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.n_particles() as usize
    }

    fn __repr__(&self) -> String {
        format!(
            "FermiBall(kf_sq={}, n_particles={})",
            self.inner.kf_sq(),
            self.inner.n_particles()
        )
    }
}

/// Nonnegative, reflection-symmetric Fourier coefficients with finite support.
#[pyclass(name = "InteractionPotential", module = "fermion_rpa_py", frozen)]
pub struct PyPotential {
    inner: lattice::InteractionPotential,
}

#[pymethods]
impl PyPotential {
    /// `entries` is a list of ((kx, ky, kz), value); with `symmetrize` the reflections are added.
    #[new]
    #[pyo3(signature = (entries, symmetrize=false))]
    fn new(entries: Vec<((i64, i64, i64), f64)>, symmetrize: bool) -> PyResult<Self> {
        let it = entries.into_iter().map(|(k, v)| (mom(k), v));
        let inner = if symmetrize {
            lattice::InteractionPotential::symmetrized(it)
        } else {
            lattice::InteractionPotential::new(it)
        }
        .map_err(err)?;
        Ok(PyPotential { inner })
    }

    /// Value on the six unit vectors ±e_i.
    #[staticmethod]
    fn unit_vectors(value: f64) -> PyResult<Self> {
        Ok(PyPotential {
            inner: lattice::InteractionPotential::unit_vectors(value).map_err(err)?,
        })
    }

    fn get(&self, k: (i64, i64, i64)) -> f64 {
        self.inner.get(&mom(k))
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius()
    }

    fn gamma_nor(&self) -> Vec<(i64, i64, i64)> {
        self.inner.gamma_nor().iter().map(tup).collect()
    }

    fn l1_norm(&self) -> f64 {
        self.inner.l1_norm()
    }

    fn items(&self) -> Vec<((i64, i64, i64), f64)> {
        self.inner.iter().map(|(k, v)| (tup(k), v)).collect()
    }
}

/// Patches on the Fermi sphere separated by corridors.
#[pyclass(name = "PatchDecomposition", module = "fermion_rpa_py", frozen)]
pub struct PyPatches {
    inner: patches::PatchDecomposition,
}

#[pymethods]
impl PyPatches {
    #[new]
    #[pyo3(signature = (m, ball, r_v, corridor_margin=None))]
    fn new(m: usize, ball: &PyFermiBall, r_v: f64, corridor_margin: Option<f64>) -> PyResult<Self> {
        let margin = corridor_margin.unwrap_or(patches::DEFAULT_CORRIDOR_MARGIN);
        let inner = patches::PatchDecomposition::build_with_margin(m, &ball.inner, r_v, margin).map_err(err)?;
        Ok(PyPatches { inner })
    }

    #[getter]
    fn m_patches(&self) -> usize {
        self.inner.m_patches
    }

    #[getter]
    fn omegas(&self) -> Vec<[f64; 3]> {
        self.inner.omegas.clone()
    }

    fn patch_of(&self, p: (i64, i64, i64)) -> Option<usize> {
        self.inner.patch_of(&mom(p))
    }

    fn reflect(&self, alpha: usize) -> usize {
        self.inner.reflect(alpha)
    }

    /// (plus_side, minus_side) patch indices passing the equator cut.
    fn index_sets(&self, k: (i64, i64, i64), delta: f64) -> PyResult<(Vec<usize>, Vec<usize>)> {
        let s = self.inner.index_sets(&mom(k), delta).map_err(err)?;
        Ok((s.plus_side, s.minus_side))
    }

    fn pair_counts(&self, ball: &PyFermiBall, k: (i64, i64, i64)) -> Vec<u64> {
        self.inner.pair_counts(&ball.inner, &mom(k))
    }

    fn corridor_area(&self) -> f64 {
        self.inner.corridor_area()
    }

    #[pyo3(signature = (ball=None, ks=Vec::new(), delta=1.0/24.0))]
    fn to_json(&self, ball: Option<&PyFermiBall>, ks: Vec<(i64, i64, i64)>, delta: f64) -> PyResult<String> {
        let ks: Vec<Momentum> = ks.into_iter().map(mom).collect();
        self.inner.to_json(ball.map(|b| &b.inner), &ks, delta).map_err(err)
    }
}

/// The matrices D, W, W̃ of one relative momentum k.
#[pyclass(name = "ModeSystem", module = "fermion_rpa_py", frozen)]
pub struct PyModeSystem {
    inner: bk::ModeSystem,
}

#[pymethods]
impl PyModeSystem {
    #[staticmethod]
    fn build(
        patches: &PyPatches,
        ball: &PyFermiBall,
        v: &PyPotential,
        k: (i64, i64, i64),
        delta: f64,
    ) -> PyResult<Self> {
        let inner = bk::build_mode_system(&patches.inner, &ball.inner, &v.inner, &mom(k), delta).map_err(err)?;
        Ok(PyModeSystem { inner })
    }

    /// Synthetic system with D = diag(u², u²) and rank-one blocks g|v⟩⟨v|.
    #[staticmethod]
    fn from_blocks(u: Vec<f64>, v: Vec<f64>, g: f64) -> PyResult<Self> {
        Ok(PyModeSystem {
            inner: bk::ModeSystem::from_blocks(&u, &v, g).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    #[getter]
    fn d(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.d)
    }
    #[getter]
    fn w(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.w)
    }
    #[getter]
    fn w_tilde(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.w_tilde)
    }

    fn diagonalize(&self) -> PyResult<PySolution> {
        Ok(PySolution {
            inner: bk::diagonalize(&self.inner).map_err(err)?,
        })
    }

    fn check_l_blocks(&self) -> PyResult<f64> {
        bk::check_l_blocks(&self.inner).map_err(err)
    }
}

#[pyclass(name = "BogoliubovSolution", module = "fermion_rpa_py", frozen)]
pub struct PySolution {
    inner: bk::BogoliubovSolution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn kernel(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.kernel)
    }
    #[getter]
    fn e(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.e)
    }
    #[getter]
    fn frak_k(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.frak_k)
    }
    #[getter]
    fn trace_correction(&self) -> f64 {
        self.inner.trace_correction
    }
    fn residuals<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.residuals)
    }
}

#[pyfunction]
fn rpa_mode_integral(c: f64) -> PyResult<f64> {
    rpa::rpa_mode_integral(c).map_err(err)
}

#[pyfunction]
fn rpa_energy_analytic(ball: &PyFermiBall, v: &PyPotential) -> PyResult<f64> {
    rpa::rpa_energy_analytic(&ball.inner, &v.inner).map_err(err)
}

/// Full report as a dict, including `relative_gap`.
#[pyfunction]
fn rpa_energy_trace<'py>(
    py: Python<'py>,
    patches: &PyPatches,
    ball: &PyFermiBall,
    v: &PyPotential,
    delta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let r = rpa::rpa_energy_trace(&patches.inner, &ball.inner, &v.inner, delta).map_err(err)?;
    let d = json_to_py(py, &r)?;
    d.cast::<PyDict>()?.set_item("relative_gap", r.relative_gap())?;
    Ok(d)
}

#[pyfunction]
fn small_v_quadratic_coefficient<'py>(py: Python<'py>, v: &PyPotential) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &rpa::small_v_quadratic_coefficient(&v.inner).map_err(err)?)
}

#[pyfunction]
fn hartree_fock_energy(ball: &PyFermiBall, v: &PyPotential) -> f64 {
    lattice::hartree_fock_energy(&ball.inner, &v.inner)
}

#[pyfunction]
fn excitation_energy(
    ball: &PyFermiBall,
    v: &PyPotential,
    hole: (i64, i64, i64),
    particle: (i64, i64, i64),
) -> PyResult<f64> {
    lattice::excitation_energy(&ball.inner, &v.inner, &mom(hole), &mom(particle)).map_err(err)
}

#[pyfunction]
fn annulus_count_vs_area(radius_inner: f64, radius_outer: f64, d0: u32) -> PyResult<(u64, f64)> {
    lattice::annulus_count_vs_area(radius_inner, radius_outer, d0).map_err(err)
}

#[pymodule]
mod fermion_rpa_py {
    #[pymodule_export]
    use super::{
        annulus_count_vs_area, excitation_energy, hartree_fock_energy, rpa_energy_analytic, rpa_energy_trace,
        rpa_mode_integral, small_v_quadratic_coefficient, PyFermiBall, PyModeSystem, PyPatches, PyPotential,
        PySolution,
    };
}

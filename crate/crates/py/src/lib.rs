//! Python module `pnlv`: equations, local series, integration, pole fields,
//! Backlund steps and the acceptance checks.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pnlv::backlund::{biv_forward, biv_inverse, ParameterState};
use pnlv::checks::{run_check, Fixtures};
use pnlv::eqcore::{first_integral, rhs};
use pnlv::integrate::{integrate as run_integrate, IntegrateOptions, PathSpec};
use pnlv::localseries::{laurent_w, PoleSeed, Residue};
use pnlv::polefield::io::catalog_json;
use pnlv::polefield::{cluster_strings, sweep, FieldSource, Region, SweepStrategy};
use pnlv::special::{airy_solution, rational_solutions, weber_hermite, RiccatiBranch};
use pnlv::{EquationSpec, GammaBranch, Jet, C};

fn runtime(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// One of the three equations with its parameters.
#[pyclass(name = "Equation", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyEquation {
    pub spec: EquationSpec,
}

#[pymethods]
impl PyEquation {
    #[new]
    #[pyo3(signature = (kind, alpha = C::new(0.0, 0.0), beta = C::new(0.0, 0.0), gamma_branch = "plus"))]
    fn new(kind: &str, alpha: C, beta: C, gamma_branch: &str) -> PyResult<Self> {
        let branch = match gamma_branch {
            "plus" => GammaBranch::Plus,
            "minus" => GammaBranch::Minus,
            o => return Err(PyValueError::new_err(format!("gamma_branch must be plus or minus, got {o}"))),
        };
        let spec = match kind.to_lowercase().as_str() {
            "i" => EquationSpec::first(),
            "ii" => EquationSpec::second(alpha),
            "iv" => EquationSpec::fourth(alpha, beta, branch),
            o => return Err(PyValueError::new_err(format!("kind must be i, ii or iv, got {o}"))),
        };
        Ok(PyEquation { spec })
    }

    #[getter]
    fn kind(&self) -> String {
        self.spec.kind.to_string()
    }
    #[getter]
    fn alpha(&self) -> C {
        self.spec.alpha
    }
    #[getter]
    fn beta(&self) -> C {
        self.spec.beta
    }
    #[getter]
    fn gamma(&self) -> C {
        self.spec.gamma
    }

    /// w'' at (z, w, w').
    fn rhs(&self, z: C, w: C, w1: C) -> PyResult<C> {
        rhs(&self.spec, &Jet::new(z, w, w1)).map_err(runtime)
    }

    /// The first integral W at (z, w, w').
    fn first_integral(&self, z: C, w: C, w1: C) -> PyResult<C> {
        Ok(first_integral(&self.spec, &Jet::new(z, w, w1)).map_err(runtime)?.value)
    }

    fn __repr__(&self) -> String {
        format!("Equation({}, alpha={}, beta={})", self.spec.kind, self.spec.alpha, self.spec.beta)
    }
}

/// Laurent coefficients of w around a pole, lowest power first.
#[pyfunction]
#[pyo3(signature = (eq, p, eps = 1.0, h = C::new(0.0, 0.0), order = 12))]
fn laurent(eq: &PyEquation, p: C, eps: f64, h: C, order: usize) -> Vec<C> {
    laurent_w(&PoleSeed::new(eq.spec, p, Residue::from_sign(eps), h), order).coeffs
}

/// Integrate from (z0, w, w') along the segment to z1.  Returns (z, w, w') samples.
#[pyfunction]
#[pyo3(signature = (eq, z0, w, w1, z1, tol = 1e-10))]
fn integrate(eq: &PyEquation, z0: C, w: C, w1: C, z1: C, tol: f64) -> PyResult<Vec<(C, C, C)>> {
    let mut start = Jet::new(z0, w, w1);
    if let Ok(w2) = rhs(&eq.spec, &start) {
        start.w2 = Some(w2);
    }
    let opts = IntegrateOptions { tol, ..IntegrateOptions::default() };
    let traj = run_integrate(&eq.spec, &start, &PathSpec::Segment { z0, z1 }, &opts).map_err(runtime)?;
    Ok(traj.samples.iter().map(|s| (s.jet.z, s.jet.w, s.jet.w1)).collect())
}

/// Pole catalogue of a Weber-Hermite (`gamma` given) or Airy (`gamma` None)
/// solution in the disc of radius `r_max`, as JSON text with string ids filled in.
#[pyfunction]
#[pyo3(signature = (r_max, gamma = None, u0 = C::new(1.0, 0.0), u1 = C::new(0.0, 0.0), minus_branch = false))]
fn pole_field(r_max: f64, gamma: Option<C>, u0: C, u1: C, minus_branch: bool) -> PyResult<String> {
    let branch = if minus_branch { RiccatiBranch::Minus } else { RiccatiBranch::Plus };
    let lin = match gamma {
        Some(g) => weber_hermite(g, branch, [u0, u1]),
        None => airy_solution(branch, [u0, u1]),
    }
    .map_err(runtime)?;
    let mut cat = sweep(&FieldSource::Linear(lin), &Region::annulus(0.0, r_max), &SweepStrategy::default()).map_err(runtime)?;
    cluster_strings(&mut cat);
    serde_json::to_string(&catalog_json(&cat)).map_err(runtime)
}

/// Rational solutions of `eq` evaluated at `z`: list of (w, w').
#[pyfunction]
fn rational_at(eq: &PyEquation, z: C) -> PyResult<Vec<(C, C)>> {
    Ok(rational_solutions(&eq.spec).map_err(runtime)?.iter().map(|s| s.jet(z)).map(|j| (j.w, j.w1)).collect())
}

/// One Backlund step on the fourth equation.  Returns (w, w', new equation).
#[pyfunction]
#[pyo3(signature = (eq, z, w, w1, inverse = false))]
fn backlund_step(eq: &PyEquation, z: C, w: C, w1: C, inverse: bool) -> PyResult<(C, C, PyEquation)> {
    let mut jet = Jet::new(z, w, w1);
    jet.w2 = Some(rhs(&eq.spec, &jet).map_err(runtime)?);
    let ps = ParameterState::of(&eq.spec);
    let (img, next) = if inverse { biv_inverse(&jet, &ps) } else { biv_forward(&jet, &ps) }.map_err(runtime)?;
    Ok((img.w, img.w1, PyEquation { spec: next.spec() }))
}

/// Run acceptance check `id` (1 to 12).  Returns (passed, detail).
#[pyfunction]
fn verify(id: usize) -> PyResult<(bool, String)> {
    if !(1..=12).contains(&id) {
        return Err(PyValueError::new_err("check id must be between 1 and 12"));
    }
    let r = run_check(id, &Fixtures::default());
    Ok((r.passed, r.detail))
}

#[pymodule(name = "pnlv")]
fn pnlv_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEquation>()?;
    m.add_function(wrap_pyfunction!(laurent, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(pole_field, m)?)?;
    m.add_function(wrap_pyfunction!(rational_at, m)?)?;
    m.add_function(wrap_pyfunction!(backlund_step, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equation_constructor_and_series() {
        let eq = PyEquation::new("iv", C::new(0.0, 0.0), C::new(-2.0, 0.0), "plus").unwrap();
        assert!((eq.gamma() - 1.0).norm() < 1e-14);
        assert!(eq.rhs(C::new(1.5, 0.0), C::new(-3.0, 0.0), C::new(-2.0, 0.0)).unwrap().norm() < 1e-12);
        assert!(PyEquation::new("iii", C::default(), C::default(), "plus").is_err());
        let c = laurent(&PyEquation::new("i", C::default(), C::default(), "plus").unwrap(), C::default(), 1.0, C::new(2.0, 0.0), 6);
        assert_eq!(c[6], C::new(2.0, 0.0));
    }

    #[test]
    fn backlund_step_inverts() {
        let eq = PyEquation::new("iv", C::new(0.0, 0.0), C::new(-2.0, 0.0), "plus").unwrap();
        let (w, w1, next) = backlund_step(&eq, C::new(1.0, 0.0), C::new(-2.0, 0.0), C::new(-2.0, 0.0), false).unwrap();
        let (w0, _, back) = backlund_step(&next, C::new(1.0, 0.0), w, w1, true).unwrap();
        assert!((w0 + 2.0).norm() < 1e-12);
        assert!((back.alpha() - eq.alpha()).norm() < 1e-12);
    }
}

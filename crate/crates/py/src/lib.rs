//! Python bindings. Complex values cross the boundary as Python `complex`.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pt_spectra::closed_forms::{self, OscillatorPair, TwoLevelDetuned, TwoLevelGainCoupling};
use pt_spectra::hamiltonians::{build_h2, build_h3, ModelH2, ModelH3};
use pt_spectra::linalg::eigenvalues as solve;
use pt_spectra::rspe::{self, RspeSeries};
use pt_spectra::scan::{self, GainCouplingFamily, Label, ScanConfig, SpectralModel, ThresholdOptions, Truncation};
use pt_spectra::{Complex64, DenseMatrix};

create_exception!(pt_spectra_py, NumericalError, PyRuntimeError);

fn to_py(e: pt_spectra::Error) -> PyErr {
    if e.is_invalid_input() {
        PyValueError::new_err(e.to_string())
    } else {
        NumericalError::new_err(e.to_string())
    }
}

fn sorted_spectrum(m: &DenseMatrix) -> PyResult<Vec<Complex64>> {
    Ok(solve(m).map_err(to_py)?.sorted())
}

/// Eigenvalues of a square matrix given as a list of rows, sorted by real part.
#[pyfunction]
fn eigenvalues(rows: Vec<Vec<Complex64>>) -> PyResult<Vec<Complex64>> {
    sorted_spectrum(&DenseMatrix::from_rows(&rows).map_err(to_py)?)
}

/// Spectrum of `p^2 + x^2 (ix)^eps` truncated to `n` oscillator states.
#[pyfunction]
#[pyo3(signature = (eps, n, quad_order=None))]
fn h3_spectrum(eps: f64, n: usize, quad_order: Option<usize>) -> PyResult<Vec<Complex64>> {
    ModelH3 { quad_order }.check_eps(eps).map_err(to_py)?;
    sorted_spectrum(&build_h3(eps, n, quad_order).map_err(to_py)?.spectral_matrix())
}

/// Spectrum of the coupled oscillator pair with perturbation `i eps x1^r x2^s`.
#[pyfunction]
#[pyo3(signature = (eps, n1, n2, omega1=1.0, omega2=std::f64::consts::SQRT_2, r=1, s=2))]
fn h2_spectrum(eps: f64, n1: usize, n2: usize, omega1: f64, omega2: f64, r: u32, s: u32) -> PyResult<Vec<Complex64>> {
    let m = ModelH2::new(omega1, omega2, r, s).map_err(to_py)?;
    sorted_spectrum(&build_h2(&m, eps, n1, n2).map_err(to_py)?.spectral_matrix())
}

#[pyfunction]
fn gain_eigenvalues(e1: f64, e2: f64, eps: f64) -> PyResult<(Complex64, Complex64)> {
    Ok(closed_forms::eig_gain_coupling(&TwoLevelGainCoupling::new(e1, e2, eps).map_err(to_py)?))
}

#[pyfunction]
fn detuned_eigenvalues(e: f64, b: f64, eps: f64) -> PyResult<(Complex64, Complex64)> {
    Ok(closed_forms::eig_detuned(&TwoLevelDetuned::new(e, b, eps).map_err(to_py)?))
}

#[pyfunction]
fn classical_lambda_pm(omega1: f64, omega2: f64, eps: f64) -> PyResult<(Complex64, Complex64)> {
    Ok(closed_forms::classical_lambda_pm(&OscillatorPair::new(omega1, omega2, eps).map_err(to_py)?))
}

/// Level `(n1, n2)` of the `r = s = 1` oscillator pair.
#[pyfunction]
fn quantum_level(omega1: f64, omega2: f64, eps: f64, n1: usize, n2: usize) -> PyResult<Complex64> {
    let p = OscillatorPair::new(omega1, omega2, eps).map_err(to_py)?;
    Ok(closed_forms::quantum_levels_r1s1(&p, n1, n2))
}

/// Rows `(label, eps, value, residual, real)` following the `levels` lowest
/// levels of H3 across `grid`.
#[pyfunction]
#[pyo3(signature = (grid, n=128, levels=5, refine=true))]
fn scan_h3(
    py: Python<'_>,
    grid: Vec<f64>,
    n: usize,
    levels: usize,
    refine: bool,
) -> PyResult<Vec<(String, f64, Complex64, f64, bool)>> {
    let mut cfg = ScanConfig::new(grid, Truncation::Single(n), levels);
    cfg.refine_flips = refine;
    let out = py
        .detach(|| scan::scan(&ModelH3::default(), &cfg))
        .map_err(to_py)?;
    Ok(out
        .trajectories
        .iter()
        .flat_map(|t| {
            t.points
                .iter()
                .map(|p| (t.label.to_string(), p.eps, p.value, p.residual, p.real))
        })
        .collect())
}

fn series_tuple(s: RspeSeries) -> (Vec<Complex64>, Option<f64>) {
    let s = s.with_radius();
    (s.coefficients, s.radius_estimate)
}

/// Coefficients and radius estimate for level `level` of `[[e1, i eps], [i eps, e2]]`.
#[pyfunction]
#[pyo3(signature = (e1, e2, level=0, order=40))]
fn rspe_two_level(e1: f64, e2: f64, level: usize, order: usize) -> PyResult<(Vec<Complex64>, Option<f64>)> {
    let i = Complex64::new(0.0, 1.0);
    let zero = Complex64::new(0.0, 0.0);
    let w = DenseMatrix::from_rows(&[vec![zero, i], vec![i, zero]]).map_err(to_py)?;
    Ok(series_tuple(rspe::rspe_matrix(&[e1, e2], &w, level, order).map_err(to_py)?))
}

/// Series of `lambda_+` and `lambda_-` in `eps`.
#[pyfunction]
#[pyo3(signature = (omega1, omega2, order=40))]
fn rspe_lambda_pm(
    omega1: f64,
    omega2: f64,
    order: usize,
) -> PyResult<((Vec<Complex64>, Option<f64>), (Vec<Complex64>, Option<f64>))> {
    let (p, m) = rspe::series_lambda_pm(omega1, omega2, order).map_err(to_py)?;
    Ok((series_tuple(p), series_tuple(m)))
}

/// Coupling where the two levels of the gain model coalesce, by bisection.
#[pyfunction]
#[pyo3(signature = (e1, e2, real_at, complex_at, tol=1e-8))]
fn gain_threshold(e1: f64, e2: f64, real_at: f64, complex_at: f64, tol: f64) -> PyResult<f64> {
    let mut cfg = ScanConfig::new(vec![], Truncation::Fixed, 2);
    cfg.match_tol = 10.0;
    let report = scan::locate_threshold(
        &GainCouplingFamily { e1, e2 },
        (Label::Level(0), Label::Level(1)),
        (real_at, complex_at),
        tol,
        &cfg,
        ThresholdOptions::default(),
    )
    .map_err(to_py)?;
    Ok(report.eps_star)
}

#[pymodule]
fn pt_spectra_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", pt_spectra::VERSION)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(h3_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(h2_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(gain_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(detuned_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(classical_lambda_pm, m)?)?;
    m.add_function(wrap_pyfunction!(quantum_level, m)?)?;
    m.add_function(wrap_pyfunction!(scan_h3, m)?)?;
    m.add_function(wrap_pyfunction!(rspe_two_level, m)?)?;
    m.add_function(wrap_pyfunction!(rspe_lambda_pm, m)?)?;
    m.add_function(wrap_pyfunction!(gain_threshold, m)?)?;
    Ok(())
}

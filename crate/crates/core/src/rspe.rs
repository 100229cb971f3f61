//! Rayleigh-Schrodinger expansions `E(eps) = sum_k c_k eps^k` for `H0 + eps W`
//! with diagonal `H0`, and root-test estimates of their radius of convergence.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scan::Label;

/// Gap below which an unperturbed level counts as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-12;

/// Nonzero coefficients of order >= 1 needed by [`radius_estimate`].
pub const MIN_RADIUS_COEFFICIENTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RspeSeries {
    pub label: Label,
    /// `c_0 .. c_K`.
    pub coefficients: Vec<Complex64>,
    /// `f64::INFINITY` when every coefficient past `c_0` vanishes.
    pub radius_estimate: Option<f64>,
}

impl RspeSeries {
    pub fn new(label: Label, coefficients: Vec<Complex64>) -> Self {
        Self {
            label,
            coefficients,
            radius_estimate: None,
        }
    }

    pub fn order(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    /// Partial sum through order `k` (clamped to the available order).
    pub fn partial_sum(&self, eps: f64, k: usize) -> Complex64 {
        self.coefficients
            .iter()
            .take(k + 1)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * eps + c)
    }

    /// Fill in `radius_estimate`; keeps `None` when there are too few coefficients.
    pub fn with_radius(mut self) -> Self {
        self.radius_estimate = radius_estimate(&self).ok();
        self
    }
}

/// Series for the eigenvalue of `diag(h0_diag) + eps W` continued from `h0_diag[level]`,
/// by the nondegenerate recursion with intermediate normalisation.
pub fn rspe_matrix(h0_diag: &[f64], w: &DenseMatrix, level: usize, order: usize) -> Result<RspeSeries> {
    let n = h0_diag.len();
    let wn = w.require_square()?;
    if wn != n {
        return Err(Error::DimensionMismatch { expected: n, found: wn });
    }
    if level >= n {
        return Err(Error::InvalidParameter(format!("level {level} out of range for dimension {n}")));
    }
    if order == 0 {
        return Err(Error::InvalidParameter("order must be >= 1".into()));
    }
    let e0 = h0_diag[level];
    let gap = h0_diag
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != level)
        .map(|(_, &h)| (h - e0).abs())
        .fold(f64::INFINITY, f64::min);
    if gap < DEGENERACY_GAP {
        return Err(Error::DegenerateLevel { level, gap });
    }
    let denom: Vec<f64> = h0_diag.iter().map(|&h| e0 - h).collect();

    let zero = Complex64::new(0.0, 0.0);
    let mut states: Vec<Vec<Complex64>> = Vec::with_capacity(order + 1);
    let mut psi0 = vec![zero; n];
    psi0[level] = Complex64::new(1.0, 0.0);
    states.push(psi0);
    let mut energies = vec![Complex64::new(e0, 0.0)];

    for k in 1..=order {
        let wpsi = w.matvec(&states[k - 1]);
        energies.push(wpsi[level]);
        if k == order {
            break;
        }
        let mut next = wpsi;
        for j in 1..=k {
            let ej = energies[j];
            if ej == zero {
                continue;
            }
            for (x, &p) in next.iter_mut().zip(&states[k - j]) {
                *x -= ej * p;
            }
        }
        for (m, x) in next.iter_mut().enumerate() {
            *x = if m == level { zero } else { *x / denom[m] };
        }
        states.push(next);
    }
    Ok(RspeSeries::new(Label::Level(level), energies))
}

/// Taylor series of `lambda_pm(eps) = (w1^2 + w2^2) +- sqrt(D^2 - eps^2)`, `D = |w1^2 - w2^2|`.
pub fn series_lambda_pm(omega1: f64, omega2: f64, order: usize) -> Result<(RspeSeries, RspeSeries)> {
    for (name, w) in [("omega1", omega1), ("omega2", omega2)] {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be > 0, got {w}")));
        }
    }
    let (a, b) = (omega1 * omega1, omega2 * omega2);
    let d = (a - b).abs();
    if d == 0.0 {
        return Err(Error::InvalidParameter("omega1 = omega2 has no expansion about eps = 0".into()));
    }
    // sqrt(D^2 - eps^2) = D sum_j binom(1/2, j) (-1)^j (eps / D)^{2j}
    let mut root = vec![0.0; order + 1];
    let mut term = d;
    root[0] = d;
    for j in 1..=order / 2 {
        term *= (j as f64 - 1.5) / j as f64 / (d * d);
        root[2 * j] = term;
    }
    let build = |sign: f64| -> Vec<Complex64> {
        root.iter()
            .enumerate()
            .map(|(k, &r)| Complex64::new(if k == 0 { a + b + sign * r } else { sign * r }, 0.0))
            .collect()
    };
    Ok((
        RspeSeries::new(Label::Level(0), build(1.0)).with_radius(),
        RspeSeries::new(Label::Level(1), build(-1.0)).with_radius(),
    ))
}

/// `1 / limsup |c_k|^{1/k}` from a least-squares fit of
/// `log |c_k| = a + b k + g log k` over the last half of the nonzero orders;
/// the `log k` column absorbs the algebraic prefactor of a branch-point singularity.
///
/// Uses even orders only when the odd ones vanish relative to the series.
pub fn radius_estimate(s: &RspeSeries) -> Result<f64> {
    let tail = s.coefficients.get(1..).unwrap_or(&[]);
    let scale = tail.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(f64::INFINITY);
    }
    let odd_vanish = tail
        .iter()
        .enumerate()
        .filter(|(i, _)| (i + 1) % 2 == 1)
        .all(|(_, c)| c.norm() <= 1e-10 * scale);
    let points: Vec<(f64, f64)> = tail
        .iter()
        .enumerate()
        .map(|(i, c)| (i + 1, c.norm()))
        .filter(|&(k, m)| m > 0.0 && m.is_finite() && !(odd_vanish && k % 2 == 1))
        .map(|(k, m)| (k as f64, m.ln()))
        .collect();
    if points.len() < MIN_RADIUS_COEFFICIENTS {
        return Err(Error::TooFewCoefficients {
            found: points.len(),
            needed: MIN_RADIUS_COEFFICIENTS,
        });
    }
    let fit = &points[points.len() / 2..];
    let slope = least_squares_slope(fit);
    Ok((-slope).exp())
}

/// Coefficient `b` of the fit `y = a + b k + g ln k`.
fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for &(k, y) in points {
        let row = [1.0, k, k.ln()];
        for i in 0..3 {
            aty[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    solve3(ata, aty)[1]
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gain_w() -> DenseMatrix {
        let i = Complex64::new(0.0, 1.0);
        let z = Complex64::new(0.0, 0.0);
        DenseMatrix::from_rows(&[vec![z, i], vec![i, z]]).unwrap()
    }

    #[test]
    fn two_level_low_orders() {
        let s = rspe_matrix(&[0.0, 2.0], &gain_w(), 0, 4).unwrap();
        let want = [0.0, 0.0, 0.5, 0.0, 0.125];
        for (c, w) in s.coefficients.iter().zip(want) {
            assert!((c - Complex64::new(w, 0.0)).norm() < 1e-15, "{c} vs {w}");
        }
    }

    #[test]
    fn zero_diagonal_has_no_first_order_term() {
        let w = DenseMatrix::from_fn(3, 3, |i, j| if i == j { 0.0.into() } else { Complex64::new(0.3, (i + j) as f64) });
        for level in 0..3 {
            let s = rspe_matrix(&[0.0, 1.0, 3.0], &w, level, 3).unwrap();
            assert_eq!(s.coefficients[1], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn rejects_degenerate_and_bad_input() {
        assert!(matches!(
            rspe_matrix(&[1.0, 1.0], &gain_w(), 0, 4),
            Err(Error::DegenerateLevel { .. })
        ));
        assert!(rspe_matrix(&[0.0, 2.0], &gain_w(), 2, 4).is_err());
        assert!(rspe_matrix(&[0.0, 2.0, 3.0], &gain_w(), 0, 4).is_err());
        assert!(series_lambda_pm(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn lambda_pm_low_orders() {
        let (p, m) = series_lambda_pm(1.0, 2.0, 4).unwrap();
        let want = [8.0, 0.0, -1.0 / 6.0, 0.0, -1.0 / 216.0];
        for (c, w) in p.coefficients.iter().zip(want) {
            assert!((c.re - w).abs() < 1e-15 && c.im == 0.0);
        }
        for (k, (a, b)) in p.coefficients.iter().zip(&m.coefficients).enumerate() {
            let want = if k == 0 { 10.0 } else { 0.0 };
            assert_eq!((a + b).re, want);
        }
    }

    #[test]
    fn geometric_radius() {
        let coefficients = (0..=40)
            .map(|k| Complex64::new(if k % 2 == 0 { 0.25f64.powi(k / 2) } else { 0.0 }, 0.0))
            .collect();
        let r = radius_estimate(&RspeSeries::new(Label::Level(0), coefficients)).unwrap();
        assert!((r - 2.0).abs() < 0.02, "{r}");
    }

    #[test]
    fn radius_edge_cases() {
        let constant = RspeSeries::new(Label::Level(0), vec![Complex64::new(10.0, 0.0); 1]);
        assert_eq!(radius_estimate(&constant).unwrap(), f64::INFINITY);
        let short = RspeSeries::new(
            Label::Level(0),
            (0..6).map(|k| Complex64::new(k as f64, 0.0)).collect(),
        );
        assert!(matches!(radius_estimate(&short), Err(Error::TooFewCoefficients { found: 5, .. })));
    }
}

//! General complex eigenvalue solver.
//!
//! Householder reduction to upper Hessenberg form followed by single-shift
//! QR sweeps (Wilkinson shift, Givens bulge chasing) with deflation when
//! `|h[k][k-1]| <= DEFLATION_TOL * (|h[k-1][k-1]| + |h[k][k]|)`. Only the
//! active diagonal window is updated since Schur vectors are not needed.
//! Real input takes the real double-shift path instead, which keeps complex
//! eigenvalues in exact conjugate pairs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dense::DenseMatrix;
use super::real;
use crate::error::{Error, Result};

/// Relative size below which a subdiagonal entry is set to zero.
pub const DEFLATION_TOL: f64 = 1e-14;

/// QR sweeps allowed per eigenvalue before reporting non-convergence.
pub const MAX_ITERATIONS_PER_EIGENVALUE: usize = 40;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Eigenvalues of one matrix, optionally with backward-error proxies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub residuals: Option<Vec<f64>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvalues ordered by real part, then imaginary part.
    pub fn sorted(&self) -> Vec<Complex64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    /// Distance between this spectrum and its complex conjugate as multisets.
    pub fn conjugation_defect(&self) -> f64 {
        let conj: Vec<Complex64> = self.eigenvalues.iter().map(Complex64::conj).collect();
        multiset_distance(&self.eigenvalues, &conj)
    }
}

/// Greedy minimal-distance matching of two equally sized multisets; returns
/// the largest matched distance (infinity on a size mismatch).
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0_f64;
    for x in a {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (j, y) in b.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = (x - y).norm();
            if d < best_d {
                best_d = d;
                best = Some(j);
            }
        }
        if let Some(j) = best {
            used[j] = true;
            worst = worst.max(best_d);
        }
    }
    worst
}

/// Upper Hessenberg matrix unitarily similar to `a`.
pub fn hessenberg_reduce(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.require_square()?;
    let mut h = a.clone();
    reduce_in_place(h.as_mut_slice(), n);
    Ok(h)
}

fn reduce_in_place(h: &mut [Complex64], n: usize) {
    if n < 3 {
        return;
    }
    let mut v = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    for k in 0..n - 2 {
        let tail_norm_sq: f64 = (k + 2..n).map(|i| h[i * n + k].norm_sqr()).sum();
        if tail_norm_sq == 0.0 {
            continue;
        }
        let x0 = h[(k + 1) * n + k];
        let norm = (tail_norm_sq + x0.norm_sqr()).sqrt();
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm;

        // v = x - alpha e1, normalised
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = h[i * n + k];
        }
        let vnorm = (v[k + 1].norm_sqr() + tail_norm_sq).sqrt();
        for vi in &mut v[k + 1..n] {
            *vi /= vnorm;
        }

        // left: rows k+1.., columns k+1.. (column k handled explicitly)
        for wj in &mut w[k + 1..n] {
            *wj = ZERO;
        }
        for i in k + 1..n {
            let vc = v[i].conj();
            let row = &h[i * n + k + 1..(i + 1) * n];
            for (wj, &hij) in w[k + 1..n].iter_mut().zip(row) {
                *wj += vc * hij;
            }
        }
        for i in k + 1..n {
            let vi2 = v[i] * 2.0;
            let row = &mut h[i * n + k + 1..(i + 1) * n];
            for (hij, &wj) in row.iter_mut().zip(&w[k + 1..n]) {
                *hij -= vi2 * wj;
            }
        }
        h[(k + 1) * n + k] = alpha;
        for i in k + 2..n {
            h[i * n + k] = ZERO;
        }

        // right: all rows, columns k+1..
        for i in 0..n {
            let row = &mut h[i * n + k + 1..(i + 1) * n];
            let s: Complex64 = row.iter().zip(&v[k + 1..n]).map(|(a, b)| a * b).sum();
            let s2 = s * 2.0;
            for (hij, vj) in row.iter_mut().zip(&v[k + 1..n]) {
                *hij -= s2 * vj.conj();
            }
        }
    }
}

/// Eigenvalues of `a` with multiplicity (no residuals attached).
pub fn eigenvalues(a: &DenseMatrix) -> Result<Spectrum> {
    Ok(EigenSolution::new(a)?.spectrum)
}

/// Smallest singular value of `A - lambda I` divided by `||A||_F`.
pub fn eigen_residual(a: &DenseMatrix, lambda: Complex64) -> Result<f64> {
    let h = hessenberg_reduce(a)?;
    Ok(hessenberg_residual(&h, lambda, a.frobenius_norm()))
}

/// Hessenberg form of a matrix, kept to evaluate residuals of candidate eigenvalues.
#[derive(Debug, Clone)]
pub struct ResidualOracle {
    hessenberg: DenseMatrix,
    norm: f64,
}

impl ResidualOracle {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        Ok(Self {
            hessenberg: hessenberg_reduce(a)?,
            norm: a.frobenius_norm(),
        })
    }

    pub fn matrix_norm(&self) -> f64 {
        self.norm
    }

    /// Residual proxy for an arbitrary candidate `lambda`.
    pub fn residual(&self, lambda: Complex64) -> f64 {
        hessenberg_residual(&self.hessenberg, lambda, self.norm)
    }
}

/// Eigenvalues together with the Hessenberg form used to estimate residuals.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub oracle: ResidualOracle,
    pub spectrum: Spectrum,
}

impl EigenSolution {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let n = a.require_square()?;
        if n == 0 {
            return Err(Error::InvalidParameter("empty matrix".into()));
        }
        let (oracle, eigenvalues) = if a.is_real() {
            let mut h: Vec<f64> = a.as_slice().iter().map(|z| z.re).collect();
            real::hessenberg_in_place(&mut h, n);
            let oracle = ResidualOracle {
                hessenberg: DenseMatrix::from_real(n, n, &h)?,
                norm: a.frobenius_norm(),
            };
            (oracle, real::hessenberg_qr_real(&mut h, n)?)
        } else {
            let oracle = ResidualOracle::new(a)?;
            let mut work = oracle.hessenberg.clone();
            let eigenvalues = hessenberg_qr(work.as_mut_slice(), n)?;
            (oracle, eigenvalues)
        };
        Ok(Self {
            oracle,
            spectrum: Spectrum {
                eigenvalues,
                residuals: None,
            },
        })
    }

    pub fn matrix_norm(&self) -> f64 {
        self.oracle.norm
    }

    pub fn residual(&self, lambda: Complex64) -> f64 {
        self.oracle.residual(lambda)
    }

    /// Spectrum with a residual attached to every eigenvalue.
    pub fn with_residuals(mut self) -> Spectrum {
        let res = self
            .spectrum
            .eigenvalues
            .iter()
            .map(|&l| self.oracle.residual(l))
            .collect();
        self.spectrum.residuals = Some(res);
        self.spectrum
    }
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    // eigenvalue of [[a, b], [c, d]] closest to d
    let p = (a - d) * 0.5;
    let bc = b * c;
    let mut s = (p * p + bc).sqrt();
    if (p.conj() * s).re < 0.0 {
        s = -s;
    }
    let denom = p + s;
    if denom.norm() == 0.0 {
        d
    } else {
        d - bc / denom
    }
}

/// Givens pair `(c, s)` with `[c s; -conj(s) c] [a; b] = [r; 0]`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let an = a.norm();
    if b.norm() == 0.0 {
        return (1.0, ZERO);
    }
    if an == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0));
    }
    let nrm = an.hypot(b.norm());
    let phase = a / an;
    (an / nrm, phase * b.conj() / nrm)
}

fn hessenberg_qr(h: &mut [Complex64], n: usize) -> Result<Vec<Complex64>> {
    let mut eig = vec![ZERO; n];
    let at = |i: usize, j: usize| i * n + j;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let hnorm = h.iter().map(|z| z.norm()).fold(0.0, f64::max);

    loop {
        // locate the bottom unreduced block [lo, hi]
        let mut lo = hi;
        while lo > 0 {
            let sub = h[at(lo, lo - 1)].norm();
            let mut scale = h[at(lo, lo)].norm() + h[at(lo - 1, lo - 1)].norm();
            if scale == 0.0 {
                scale = hnorm;
            }
            if sub <= DEFLATION_TOL * scale {
                h[at(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }

        if lo == hi {
            eig[hi] = h[at(hi, hi)];
            if hi == 0 {
                break;
            }
            hi -= 1;
            iter = 0;
            continue;
        }

        iter += 1;
        if iter > MAX_ITERATIONS_PER_EIGENVALUE {
            return Err(Error::NoConvergence {
                iterations: iter - 1,
                active: hi - lo + 1,
            });
        }

        let shift = if iter % 10 == 0 {
            // exceptional shift to break cycles
            let sub = h[at(hi, hi - 1)];
            h[at(hi, hi)] + Complex64::new(0.75 * sub.re.abs(), 0.75 * sub.im.abs() + 0.5 * sub.norm())
        } else {
            wilkinson_shift(
                h[at(hi - 1, hi - 1)],
                h[at(hi - 1, hi)],
                h[at(hi, hi - 1)],
                h[at(hi, hi)],
            )
        };

        // implicit single-shift sweep on rows/cols lo..=hi
        let mut x = h[at(lo, lo)] - shift;
        let mut y = h[at(lo + 1, lo)];
        for k in lo..hi {
            let (c, s) = givens(x, y);
            let sc = s.conj();
            let col_start = if k > lo { k - 1 } else { lo };
            for j in col_start..=hi {
                let a = h[at(k, j)];
                let b = h[at(k + 1, j)];
                h[at(k, j)] = a * c + s * b;
                h[at(k + 1, j)] = -sc * a + b * c;
            }
            let row_end = (k + 2).min(hi);
            for i in lo..=row_end {
                let a = h[at(i, k)];
                let b = h[at(i, k + 1)];
                h[at(i, k)] = a * c + b * sc;
                h[at(i, k + 1)] = -a * s + b * c;
            }
            if k > lo {
                h[at(k + 1, k - 1)] = ZERO;
            }
            if k + 1 < hi {
                x = h[at(k + 1, k)];
                y = h[at(k + 2, k)];
            }
        }
    }
    Ok(eig)
}

/// Inverse iteration for the smallest singular value of `H - lambda I`.
fn hessenberg_residual(h: &DenseMatrix, lambda: Complex64, norm: f64) -> f64 {
    let n = h.rows();
    let scale = if norm > 0.0 { norm } else { 1.0 };
    let floor = f64::EPSILON * scale;

    // LU with partial pivoting, exploiting the single subdiagonal
    let mut u = h.clone();
    for i in 0..n {
        u[(i, i)] -= lambda;
    }
    let mut swaps = vec![false; n];
    let mut mult = vec![ZERO; n];
    for k in 0..n {
        if k + 1 < n && u[(k + 1, k)].norm() > u[(k, k)].norm() {
            swaps[k] = true;
            for j in k..n {
                let t = u[(k, j)];
                u[(k, j)] = u[(k + 1, j)];
                u[(k + 1, j)] = t;
            }
        }
        if u[(k, k)].norm() < floor {
            u[(k, k)] = Complex64::new(floor, 0.0);
        }
        if k + 1 < n {
            let f = u[(k + 1, k)] / u[(k, k)];
            mult[k] = f;
            u[(k + 1, k)] = ZERO;
            if f != ZERO {
                for j in k + 1..n {
                    let t = u[(k, j)];
                    u[(k + 1, j)] -= f * t;
                }
            }
        }
    }

    // B = P L U where the elimination steps are recorded in (swaps, mult)
    let solve = |b: &mut [Complex64]| {
        for k in 0..n.saturating_sub(1) {
            if swaps[k] {
                b.swap(k, k + 1);
            }
            let t = b[k];
            b[k + 1] -= mult[k] * t;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= u[(i, j)] * b[j];
            }
            b[i] = s / u[(i, i)];
        }
    };
    let solve_adjoint = |b: &mut [Complex64]| {
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= u[(j, i)].conj() * b[j];
            }
            b[i] = s / u[(i, i)].conj();
        }
        for k in (0..n.saturating_sub(1)).rev() {
            let t = b[k + 1];
            b[k] -= mult[k].conj() * t;
            if swaps[k] {
                b.swap(k, k + 1);
            }
        }
    };

    let mut x: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + (i as f64 * 0.618_033_988_75).fract(), 0.0))
        .collect();
    let nx = x.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= nx);
    let mut sigma = f64::INFINITY;
    for _ in 0..4 {
        solve(&mut x);
        solve_adjoint(&mut x);
        let nrm = x.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        if !nrm.is_finite() || nrm == 0.0 {
            return 0.0;
        }
        sigma = 1.0 / nrm.sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    sigma / scale
}

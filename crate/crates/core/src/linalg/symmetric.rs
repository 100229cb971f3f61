use super::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Eigenvalues of a symmetric tridiagonal matrix (implicit QL, ascending).
///
/// `diag` has length n, `off[i]` couples rows i and i+1 (length n-1).
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if off.len() + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            found: off.len(),
        });
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    active: m - l + 1,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues of a real symmetric matrix given row-major (ascending).
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: a.len(),
        });
    }
    let (d, e) = tridiagonalize(a.to_vec(), n);
    tridiagonal_eigenvalues(&d, &e)
}

/// Eigenvalues of a Hermitian matrix (ascending). Complex entries are handled
/// through the real embedding `[[B, -C], [C, B]]`, whose spectrum doubles each eigenvalue.
pub fn hermitian_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    let n = m.require_square()?;
    if m.is_real() {
        let re: Vec<f64> = m.as_slice().iter().map(|z| z.re).collect();
        return symmetric_eigenvalues(&re, n);
    }
    let big = 2 * n;
    let mut a = vec![0.0; big * big];
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            a[i * big + j] = z.re;
            a[(i + n) * big + j + n] = z.re;
            a[i * big + j + n] = -z.im;
            a[(i + n) * big + j] = z.im;
        }
    }
    let all = symmetric_eigenvalues(&a, big)?;
    Ok(all.into_iter().step_by(2).collect())
}

/// Householder reduction of a symmetric matrix to tridiagonal (d, e).
fn tridiagonalize(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    if n <= 2 {
        let d = (0..n).map(|i| a[i * n + i]).collect();
        let e = if n == 2 { vec![a[1]] } else { Vec::new() };
        return (d, e);
    }
    let mut e = Vec::with_capacity(n - 1);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n - 2 {
        let tail: f64 = (k + 2..n).map(|i| a[i * n + k].powi(2)).sum();
        let x0 = a[(k + 1) * n + k];
        if tail == 0.0 {
            e.push(x0);
            continue;
        }
        let norm = (tail + x0 * x0).sqrt();
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = a[i * n + k];
        }
        let vnorm_sq = v[k + 1] * v[k + 1] + tail;
        // A <- H A H with H = I - 2 v v^T / (v^T v), on the trailing block
        let beta = 2.0 / vnorm_sq;
        for i in k + 1..n {
            p[i] = beta * (k + 1..n).map(|j| a[i * n + j] * v[j]).sum::<f64>();
        }
        let kappa = 0.5 * beta * (k + 1..n).map(|i| v[i] * p[i]).sum::<f64>();
        for i in k + 1..n {
            p[i] -= kappa * v[i];
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i * n + j] -= v[i] * p[j] + p[i] * v[j];
            }
        }
        e.push(alpha);
    }
    e.push(a[(n - 1) * n + n - 2]);
    let d = (0..n).map(|i| a[i * n + i]).collect();
    (d, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn tridiagonal_known_spectrum() {
        // discrete Laplacian: 2 - 2 cos(k pi / (n + 1))
        let n = 12;
        let ev = tridiagonal_eigenvalues(&vec![2.0; n], &vec![-1.0; n - 1]).unwrap();
        for (k, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn dense_symmetric_matches_trace_and_frobenius() {
        let n = 7;
        let a: Vec<f64> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                ((i * j + i + j) as f64 * 0.37).sin() + if i == j { i as f64 } else { 0.0 }
            })
            .collect();
        let sym: Vec<f64> = (0..n * n).map(|k| 0.5 * (a[k] + a[(k % n) * n + k / n])).collect();
        let ev = symmetric_eigenvalues(&sym, n).unwrap();
        let tr: f64 = (0..n).map(|i| sym[i * n + i]).sum();
        let fro: f64 = sym.iter().map(|x| x * x).sum();
        assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-12);
        assert!((ev.iter().map(|x| x * x).sum::<f64>() - fro).abs() < 1e-11);
    }

    #[test]
    fn hermitian_embedding() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2
        let m = DenseMatrix::from_rows(&[
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
            vec![Complex64::new(0.0, -1.0), Complex64::new(1.0, 0.0)],
        ])
        .unwrap();
        let ev = hermitian_eigenvalues(&m).unwrap();
        assert_eq!(ev.len(), 2);
        assert!(ev[0].abs() < 1e-14 && (ev[1] - 2.0).abs() < 1e-14);
    }
}

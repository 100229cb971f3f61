//! Real-arithmetic path for real matrices: Householder Hessenberg reduction
//! and Francis double-shift QR. Complex eigenvalues come out as exact
//! conjugate pairs.

use num_complex::Complex64;

use super::eigen::{DEFLATION_TOL, MAX_ITERATIONS_PER_EIGENVALUE};
use crate::error::{Error, Result};

/// In-place orthogonal reduction of a row-major `n x n` matrix to upper Hessenberg form.
pub(crate) fn hessenberg_in_place(a: &mut [f64], n: usize) {
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let tail: f64 = (k + 2..n).map(|i| a[i * n + k].powi(2)).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let norm = (tail + x0 * x0).sqrt();
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = a[i * n + k];
        }
        let beta = 2.0 / (v[k + 1] * v[k + 1] + tail);
        // A <- (I - beta v v^T) A, accumulated row by row
        w[k..].iter_mut().for_each(|x| *x = 0.0);
        for i in k + 1..n {
            let vi = v[i];
            for (wj, aij) in w[k..].iter_mut().zip(&a[i * n + k..(i + 1) * n]) {
                *wj += vi * aij;
            }
        }
        for i in k + 1..n {
            let f = beta * v[i];
            for (aij, wj) in a[i * n + k..(i + 1) * n].iter_mut().zip(&w[k..]) {
                *aij -= f * wj;
            }
        }
        // A <- A (I - beta v v^T)
        for i in 0..n {
            let row = &mut a[i * n..(i + 1) * n];
            let dot: f64 = (k + 1..n).map(|j| row[j] * v[j]).sum::<f64>() * beta;
            for j in k + 1..n {
                row[j] -= dot * v[j];
            }
        }
        a[(k + 1) * n + k] = alpha;
        for i in k + 2..n {
            a[i * n + k] = 0.0;
        }
    }
}

/// Eigenvalues of a real upper Hessenberg matrix (destroyed).
pub(crate) fn hessenberg_qr_real(h: &mut [f64], n: usize) -> Result<Vec<Complex64>> {
    let at = |i: isize, j: isize| (i as usize) * n + j as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let norm: f64 = h.iter().map(|x| x.abs()).sum();
    let mut nn = n as isize - 1;
    let mut shift = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 1 {
                let mut s = h[at(l - 1, l - 1)].abs() + h[at(l, l)].abs();
                if s == 0.0 {
                    s = norm;
                }
                if h[at(l, l - 1)].abs() <= DEFLATION_TOL * s {
                    h[at(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = h[at(nn, nn)];
            if l == nn {
                out[nn as usize] = Complex64::new(x + shift, 0.0);
                nn -= 1;
            } else {
                let mut y = h[at(nn - 1, nn - 1)];
                let mut w = h[at(nn, nn - 1)] * h[at(nn - 1, nn)];
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let z = q.abs().sqrt();
                    x += shift;
                    if q >= 0.0 {
                        let z = p + z.copysign(p);
                        let hi = x + z;
                        let lo = if z != 0.0 { x - w / z } else { hi };
                        out[(nn - 1) as usize] = Complex64::new(hi, 0.0);
                        out[nn as usize] = Complex64::new(lo, 0.0);
                    } else {
                        out[(nn - 1) as usize] = Complex64::new(x + p, z);
                        out[nn as usize] = Complex64::new(x + p, -z);
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITERATIONS_PER_EIGENVALUE {
                        return Err(Error::NoConvergence {
                            iterations: its,
                            active: (nn - l + 1) as usize,
                        });
                    }
                    if its > 0 && its % 10 == 0 {
                        // exceptional shift
                        shift += x;
                        for i in 0..=nn {
                            h[at(i, i)] -= x;
                        }
                        let s = h[at(nn, nn - 1)].abs() + h[at(nn - 1, nn - 2)].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    francis_step(h, n, l, nn, x, y, w);
                }
            }
            if nn < 0 || l >= nn - 1 {
                break;
            }
        }
    }
    Ok(out)
}

/// One double-shift sweep on rows/columns `l..=nn` with shifts from `(x, y, w)`.
fn francis_step(h: &mut [f64], n: usize, l: isize, nn: isize, x: f64, y: f64, w: f64) {
    let at = |i: isize, j: isize| (i as usize) * n + j as usize;
    let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
    let mut m = nn - 2;
    while m >= l {
        let z = h[at(m, m)];
        let rr = x - z;
        let ss = y - z;
        p = (rr * ss - w) / h[at(m + 1, m)] + h[at(m, m + 1)];
        q = h[at(m + 1, m + 1)] - z - rr - ss;
        r = h[at(m + 2, m + 1)];
        let s = p.abs() + q.abs() + r.abs();
        p /= s;
        q /= s;
        r /= s;
        if m == l {
            break;
        }
        let u = h[at(m, m - 1)].abs() * (q.abs() + r.abs());
        let v = p.abs() * (h[at(m - 1, m - 1)].abs() + z.abs() + h[at(m + 1, m + 1)].abs());
        if u <= f64::EPSILON * v {
            break;
        }
        m -= 1;
    }
    for i in m + 2..=nn {
        h[at(i, i - 2)] = 0.0;
        if i != m + 2 {
            h[at(i, i - 3)] = 0.0;
        }
    }
    let mut k = m;
    while k < nn {
        let mut scale = 1.0;
        if k != m {
            p = h[at(k, k - 1)];
            q = h[at(k + 1, k - 1)];
            r = if k != nn - 1 { h[at(k + 2, k - 1)] } else { 0.0 };
            scale = p.abs() + q.abs() + r.abs();
            if scale != 0.0 {
                p /= scale;
                q /= scale;
                r /= scale;
            }
        }
        let s = (p * p + q * q + r * r).sqrt().copysign(p);
        if s != 0.0 {
            if k == m {
                if l != m {
                    h[at(k, k - 1)] = -h[at(k, k - 1)];
                }
            } else {
                h[at(k, k - 1)] = -s * scale;
            }
            p += s;
            let (xx, yy, zz) = (p / s, q / s, r / s);
            q /= p;
            r /= p;
            for j in k..=nn {
                let mut t = h[at(k, j)] + q * h[at(k + 1, j)];
                if k != nn - 1 {
                    t += r * h[at(k + 2, j)];
                    h[at(k + 2, j)] -= t * zz;
                }
                h[at(k + 1, j)] -= t * yy;
                h[at(k, j)] -= t * xx;
            }
            let last = nn.min(k + 3);
            for i in l..=last {
                let mut t = xx * h[at(i, k)] + yy * h[at(i, k + 1)];
                if k != nn - 1 {
                    t += zz * h[at(i, k + 2)];
                    h[at(i, k + 2)] -= t * r;
                }
                h[at(i, k + 1)] -= t * q;
                h[at(i, k)] -= t;
            }
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eig(a: &[f64], n: usize) -> Vec<Complex64> {
        let mut h = a.to_vec();
        hessenberg_in_place(&mut h, n);
        for i in 0..n {
            for j in 0..i.saturating_sub(1) {
                assert_eq!(h[i * n + j], 0.0);
            }
        }
        hessenberg_qr_real(&mut h, n).unwrap()
    }

    #[test]
    fn rotation_block() {
        let v = eig(&[0.0, -1.0, 1.0, 0.0], 2);
        assert_eq!(v[0], v[1].conj());
        assert!((v[0].im.abs() - 1.0).abs() < 1e-15 && v[0].re.abs() < 1e-15);
    }

    #[test]
    fn companion_matrix_roots() {
        // x^4 - 10 x^3 + 35 x^2 - 50 x + 24 = (x-1)(x-2)(x-3)(x-4)
        let a = [10.0, -35.0, 50.0, -24.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let mut v: Vec<f64> = eig(&a, 4).iter().map(|z| z.re).collect();
        v.sort_by(f64::total_cmp);
        for (got, want) in v.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_and_conjugate_pairs() {
        let n = 30;
        let a: Vec<f64> = (0..n * n).map(|k| ((k * 7919 % 104729) as f64 / 104729.0) - 0.5).collect();
        let v = eig(&a, n);
        let tr: f64 = (0..n).map(|i| a[i * n + i]).sum();
        let sum: Complex64 = v.iter().sum();
        assert!((sum.re - tr).abs() < 1e-11 && sum.im.abs() < 1e-11);
        for z in v.iter().filter(|z| z.im != 0.0) {
            assert!(v.iter().any(|w| *w == z.conj()));
        }
    }
}

//! Matrix elements in the eigenbasis of `p^2 + omega^2 x^2` (levels `(2n+1) omega`).
//!
//! Polynomial operators use the ladder representation of `x`, built at a padded
//! size and truncated after powering so the kept block is exact. Fractional
//! powers `|x|^s` and `sign(x) |x|^s` are integrated on the half line with the
//! substitution `t = x^2`, which turns every matrix element into a polynomial
//! against a generalised Laguerre weight; the Gauss rule is then exact once it
//! has more than `N / 2` nodes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::quadrature::{gauss_laguerre_log, LogRule};

/// Relative change allowed between quadrature order `q` and `2q`.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Default starting number of Laguerre nodes per basis function.
pub const DEFAULT_QUAD_FACTOR: usize = 4;

/// Largest number of nodes per basis function tried before giving up.
pub const MAX_QUAD_FACTOR: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub frequency: f64,
    pub size: usize,
}

impl BasisSpec {
    pub fn new(frequency: f64, size: usize) -> Result<Self> {
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "basis frequency must be > 0, got {frequency}"
            )));
        }
        if size == 0 {
            return Err(Error::InvalidParameter("basis size must be >= 1".into()));
        }
        Ok(Self { frequency, size })
    }

    /// Unperturbed levels `(2n + 1) omega`.
    pub fn levels(&self) -> Vec<f64> {
        (0..self.size).map(|n| (2 * n + 1) as f64 * self.frequency).collect()
    }

    fn padded(&self, extra: usize) -> Self {
        Self {
            frequency: self.frequency,
            size: self.size + extra,
        }
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `x` with entries `(n, n+1) = sqrt((n+1) / (2 omega))`.
pub fn position_matrix(b: &BasisSpec) -> DenseMatrix {
    let scale = 1.0 / (2.0 * b.frequency);
    DenseMatrix::from_fn(b.size, b.size, |i, j| {
        if j == i + 1 {
            real((j as f64 * scale).sqrt())
        } else if i == j + 1 {
            real((i as f64 * scale).sqrt())
        } else {
            real(0.0)
        }
    })
}

/// `x^r`, exact in the kept `N x N` block.
pub fn monomial_matrix(b: &BasisSpec, r: u32) -> Result<DenseMatrix> {
    if r == 0 {
        return Err(Error::InvalidParameter("monomial power must be >= 1".into()));
    }
    let x = position_matrix(&b.padded(r as usize));
    let mut acc = x.clone();
    for _ in 1..r {
        acc = acc.matmul(&x);
    }
    // products of a symmetric matrix are symmetric only up to rounding
    let n = b.size;
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        let (lo, hi) = (i.min(j), i.max(j));
        acc[(lo, hi)]
    }))
}

/// `p^2 = diag((2n+1) omega) - omega^2 x^2` on the truncated space.
pub fn momentum_squared_matrix(b: &BasisSpec) -> DenseMatrix {
    let x2 = monomial_matrix(b, 2).expect("power 2 is valid");
    let w = b.frequency;
    DenseMatrix::from_fn(b.size, b.size, |i, j| {
        let d = if i == j { (2 * i + 1) as f64 * w } else { 0.0 };
        real(d) - x2[(i, j)] * (w * w)
    })
}

/// Which half-line integral a fractional power needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PowerParity {
    /// `|x|^s`: couples states of equal parity.
    Even,
    /// `sign(x) |x|^s`: couples states of opposite parity.
    Odd,
}

/// `sqrt(w_i) * h_n(x_i)` for the nodes `x_i = sqrt(t_i)` of a Laguerre rule,
/// where `h_n` is the polynomial part of the unit-frequency Hermite function.
/// Stored size-major (`size x q`) so matrix entries are contiguous dot products.
fn weighted_hermite_table(rule: &LogRule, size: usize) -> Vec<f64> {
    const RESCALE: f64 = 1e150;
    let q = rule.nodes.len();
    let h0 = std::f64::consts::PI.powf(-0.25);
    let mut table = vec![0.0; q * size];
    for (i, (&t, &lw)) in rule.nodes.iter().zip(&rule.log_weights).enumerate() {
        let x = t.sqrt();
        let mut log_scale = 0.5 * lw;
        let mut factor = log_scale.exp();
        let (mut prev, mut cur) = (0.0, h0);
        for n in 0..size {
            table[n * q + i] = cur * factor;
            let nf = n as f64;
            let next = (2.0 / (nf + 1.0)).sqrt() * x * cur - (nf / (nf + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
            if cur.abs() > RESCALE {
                prev /= RESCALE;
                cur /= RESCALE;
                log_scale += RESCALE.ln();
                factor = log_scale.exp();
            }
        }
    }
    table
}

/// Fractional power matrix at unit frequency and a fixed number of nodes.
fn fractional_power_at_order(size: usize, s: f64, parity: PowerParity, nodes: usize) -> Result<Vec<f64>> {
    let alpha = match parity {
        PowerParity::Even => 0.5 * (s - 1.0),
        PowerParity::Odd => 0.5 * s,
    };
    let rule = gauss_laguerre_log(nodes, alpha)?;
    let table = weighted_hermite_table(&rule, size);
    let row = |n: usize| &table[n * nodes..(n + 1) * nodes];
    // the odd integrand carries an extra 1/x
    let left: Vec<f64> = match parity {
        PowerParity::Even => table.clone(),
        PowerParity::Odd => table
            .chunks_exact(nodes)
            .flat_map(|r| r.iter().zip(&rule.nodes).map(|(v, t)| v / t.sqrt()))
            .collect(),
    };
    let mut out = vec![0.0; size * size];
    for m in 0..size {
        let lm = &left[m * nodes..(m + 1) * nodes];
        let start = if parity == PowerParity::Even { m } else { m + 1 };
        for n in (start..size).step_by(2) {
            let acc: f64 = lm.iter().zip(row(n)).map(|(a, b)| a * b).sum();
            out[m * size + n] = acc;
            out[n * size + m] = acc;
        }
    }
    Ok(out)
}

fn fractional_power_matrix(
    b: &BasisSpec,
    s: f64,
    quad_order: Option<usize>,
    parity: PowerParity,
) -> Result<DenseMatrix> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidParameter(format!("power must be > 0, got {s}")));
    }
    let n = b.size;
    let cap = MAX_QUAD_FACTOR * n;
    let mut q = quad_order.unwrap_or(DEFAULT_QUAD_FACTOR * n).max(1);
    let mut current = fractional_power_at_order(n, s, parity, q)?;
    let mut change;
    loop {
        let next = fractional_power_at_order(n, s, parity, 2 * q)?;
        let scale = next.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        change = current
            .iter()
            .zip(&next)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        current = next;
        if change <= QUADRATURE_TOL * scale {
            // unit-frequency elements scale as omega^{-s/2}
            let w = b.frequency.powf(-0.5 * s);
            return Ok(DenseMatrix::from_fn(n, n, |i, j| real(current[i * n + j] * w)));
        }
        q *= 2;
        if 2 * q > cap {
            break;
        }
    }
    Err(Error::QuadratureNotConverged {
        exponent: s,
        max_order: q,
        change,
    })
}

/// `|x|^s`, zero between states of opposite parity.
pub fn abs_power_matrix(b: &BasisSpec, s: f64, quad_order: Option<usize>) -> Result<DenseMatrix> {
    fractional_power_matrix(b, s, quad_order, PowerParity::Even)
}

/// `sign(x) |x|^s`, zero between states of equal parity.
pub fn signed_abs_power_matrix(b: &BasisSpec, s: f64, quad_order: Option<usize>) -> Result<DenseMatrix> {
    fractional_power_matrix(b, s, quad_order, PowerParity::Odd)
}

/// Unit-frequency Hermite function `phi_n(x)` by the normalised recurrence.
pub fn hermite_function(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

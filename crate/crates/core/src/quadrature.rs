//! Gauss rules from three-term recurrences.
//!
//! Nodes are eigenvalues of the Jacobi matrix (Golub-Welsch), polished by
//! Newton steps on the orthonormal recurrence. Weights use the Christoffel
//! sum `w_i = 1 / sum_k p_k(x_i)^2` evaluated in log space so that rules with
//! thousands of nodes keep their tiny tail weights without underflow.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::tridiagonal_eigenvalues;

const RESCALE: f64 = 1e150;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss rule with weights kept as logarithms.
#[derive(Debug, Clone)]
pub(crate) struct LogRule {
    pub nodes: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl LogRule {
    fn into_rule(self) -> QuadratureRule {
        QuadratureRule {
            weights: self.log_weights.iter().map(|w| w.exp()).collect(),
            nodes: self.nodes,
        }
    }
}

/// Orthonormal recurrence `b_{k+1} p_{k+1} = (x - a_k) p_k - b_k p_{k-1}`.
struct Recurrence<A, B> {
    a: A,
    b: B,
    log_p0: f64,
}

impl<A: Fn(usize) -> f64, B: Fn(usize) -> f64> Recurrence<A, B> {
    /// `p_n(x) / p_n'(x)`, scale-free.
    fn newton_ratio(&self, x: f64, n: usize) -> f64 {
        let (mut pm, mut p) = (0.0, 1.0);
        let (mut dm, mut d) = (0.0, 0.0);
        for k in 0..n {
            let bk1 = (self.b)(k + 1);
            let bk = (self.b)(k);
            let pn = ((x - (self.a)(k)) * p - bk * pm) / bk1;
            let dn = (p + (x - (self.a)(k)) * d - bk * dm) / bk1;
            pm = p;
            p = pn;
            dm = d;
            d = dn;
            if p.abs() > RESCALE || d.abs() > RESCALE {
                pm /= RESCALE;
                p /= RESCALE;
                dm /= RESCALE;
                d /= RESCALE;
            }
        }
        p / d
    }

    /// ln sum_{k<n} p_k(x)^2 with p_0 = exp(log_p0).
    fn log_christoffel_sum(&self, x: f64, n: usize) -> f64 {
        let (mut pm, mut p) = (0.0, 1.0);
        let mut log_scale = self.log_p0;
        let mut sum = 1.0;
        for k in 0..n - 1 {
            let pn = ((x - (self.a)(k)) * p - (self.b)(k) * pm) / (self.b)(k + 1);
            pm = p;
            p = pn;
            sum += p * p;
            if p.abs() > RESCALE {
                pm /= RESCALE;
                p /= RESCALE;
                sum /= RESCALE * RESCALE;
                log_scale += RESCALE.ln();
            }
        }
        sum.ln() + 2.0 * log_scale
    }
}

fn gauss_from_recurrence(
    n: usize,
    a: impl Fn(usize) -> f64,
    b: impl Fn(usize) -> f64,
    log_mu0: f64,
) -> Result<LogRule> {
    if n == 0 {
        return Err(Error::InvalidParameter("quadrature order must be >= 1".into()));
    }
    let diag: Vec<f64> = (0..n).map(&a).collect();
    let off: Vec<f64> = (1..n).map(&b).collect();
    let mut nodes = tridiagonal_eigenvalues(&diag, &off)?;
    let rec = Recurrence {
        a,
        b,
        log_p0: -0.5 * log_mu0,
    };
    for i in 0..n {
        let spacing = {
            let left = if i > 0 { nodes[i] - nodes[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < n { nodes[i + 1] - nodes[i] } else { f64::INFINITY };
            left.min(right)
        };
        let mut x = nodes[i];
        for _ in 0..3 {
            let step = rec.newton_ratio(x, n);
            if !step.is_finite() || step.abs() > 0.25 * spacing {
                break;
            }
            x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = x;
    }
    let log_weights = nodes.iter().map(|&x| -rec.log_christoffel_sum(x, n)).collect();
    Ok(LogRule { nodes, log_weights })
}

/// n-point Gauss-Hermite rule for `int f(x) exp(-x^2) dx`.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    let mut rule = gauss_from_recurrence(
        n,
        |_| 0.0,
        |k| (k as f64 / 2.0).sqrt(),
        0.5 * std::f64::consts::PI.ln(),
    )?;
    // exact symmetry about the origin
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        let w = 0.5 * (rule.log_weights[i] + rule.log_weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.log_weights[i] = w;
        rule.log_weights[j] = w;
    }
    if n % 2 == 1 {
        rule.nodes[n / 2] = 0.0;
    }
    Ok(rule.into_rule())
}

pub(crate) fn gauss_laguerre_log(n: usize, alpha: f64) -> Result<LogRule> {
    if !(alpha > -1.0) {
        return Err(Error::InvalidParameter(format!("Laguerre alpha must be > -1, got {alpha}")));
    }
    gauss_from_recurrence(
        n,
        move |k| 2.0 * k as f64 + alpha + 1.0,
        move |k| (k as f64 * (k as f64 + alpha)).sqrt(),
        ln_gamma(alpha + 1.0),
    )
}

/// n-point generalised Gauss-Laguerre rule for `int_0^inf f(t) t^alpha exp(-t) dt`.
pub fn gauss_laguerre(n: usize, alpha: f64) -> Result<QuadratureRule> {
    Ok(gauss_laguerre_log(n, alpha)?.into_rule())
}

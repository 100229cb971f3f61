//! Exact formulas for the two-level PT matrices and the classical/quantum
//! normal modes of the bilinearly coupled oscillator pair. These are the
//! oracles the numerical modules are checked against.
//!
//! Square-root branch convention: in the broken phase the eigenvalue with
//! positive imaginary part is returned first (the "+" label).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {x}")))
    }
}

/// `mean +- half_root` where `half_root = sqrt(disc)`, "+" carrying the positive
/// imaginary part once `disc < 0`.
fn split_pair(mean: f64, disc: f64) -> (Complex64, Complex64) {
    if disc >= 0.0 {
        let r = disc.sqrt();
        (Complex64::new(mean + r, 0.0), Complex64::new(mean - r, 0.0))
    } else {
        let r = (-disc).sqrt();
        (Complex64::new(mean, r), Complex64::new(mean, -r))
    }
}

/// `[[e1, i eps], [i eps, e2]]`, PT symmetric with parity `diag(1, -1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelGainCoupling {
    pub e1: f64,
    pub e2: f64,
    pub eps: f64,
}

impl TwoLevelGainCoupling {
    pub fn new(e1: f64, e2: f64, eps: f64) -> Result<Self> {
        Ok(Self {
            e1: finite("e1", e1)?,
            e2: finite("e2", e2)?,
            eps: finite("eps", eps)?,
        })
    }

    pub fn matrix(&self) -> DenseMatrix {
        let ie = Complex64::new(0.0, self.eps);
        DenseMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => Complex64::new(self.e1, 0.0),
            (1, 1) => Complex64::new(self.e2, 0.0),
            _ => ie,
        })
    }

    pub fn parity() -> [i8; 2] {
        [1, -1]
    }
}

/// `[[e + i eps, b], [b, e - i eps]]`, PT symmetric with the swap parity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelDetuned {
    pub e: f64,
    pub b: f64,
    pub eps: f64,
}

impl TwoLevelDetuned {
    pub fn new(e: f64, b: f64, eps: f64) -> Result<Self> {
        Ok(Self {
            e: finite("e", e)?,
            b: finite("b", b)?,
            eps: finite("eps", eps)?,
        })
    }

    pub fn matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => Complex64::new(self.e, self.eps),
            (1, 1) => Complex64::new(self.e, -self.eps),
            _ => Complex64::new(self.b, 0.0),
        })
    }
}

/// Two oscillators with frequencies `omega1`, `omega2` coupled by `i eps x1 x2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorPair {
    pub omega1: f64,
    pub omega2: f64,
    pub eps: f64,
}

impl OscillatorPair {
    pub fn new(omega1: f64, omega2: f64, eps: f64) -> Result<Self> {
        for (name, w) in [("omega1", omega1), ("omega2", omega2)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {w}")));
            }
        }
        Ok(Self {
            omega1,
            omega2,
            eps: finite("eps", eps)?,
        })
    }

    /// Matrix `M` of the equation of motion `x'' = -2 M x`.
    pub fn classical_matrix(&self) -> DenseMatrix {
        TwoLevelGainCoupling {
            e1: 2.0 * self.omega1 * self.omega1,
            e2: 2.0 * self.omega2 * self.omega2,
            eps: self.eps,
        }
        .matrix()
    }

    /// `|omega1^2 - omega2^2|`, the coupling where the normal modes coalesce.
    pub fn threshold(&self) -> f64 {
        (self.omega1 * self.omega1 - self.omega2 * self.omega2).abs()
    }
}

pub fn eig_gain_coupling(m: &TwoLevelGainCoupling) -> (Complex64, Complex64) {
    let d = m.e1 - m.e2;
    split_pair(0.5 * (m.e1 + m.e2), 0.25 * (d * d - 4.0 * m.eps * m.eps))
}

pub fn threshold_gain_coupling(m: &TwoLevelGainCoupling) -> f64 {
    0.5 * (m.e1 - m.e2).abs()
}

/// `e +- sqrt(b^2 - eps^2)`.
pub fn eig_detuned(m: &TwoLevelDetuned) -> (Complex64, Complex64) {
    split_pair(m.e, m.b * m.b - m.eps * m.eps)
}

pub fn threshold_detuned(m: &TwoLevelDetuned) -> f64 {
    m.b.abs()
}

/// `(omega1^2 + omega2^2) +- sqrt((omega1^2 - omega2^2)^2 - eps^2)`.
pub fn classical_lambda_pm(p: &OscillatorPair) -> (Complex64, Complex64) {
    let (a, b) = (p.omega1 * p.omega1, p.omega2 * p.omega2);
    split_pair(a + b, (a - b) * (a - b) - p.eps * p.eps)
}

/// Normal-mode angular frequencies `sqrt(2 lambda_pm)` of `x'' = -2 M x`.
pub fn classical_normal_frequencies(p: &OscillatorPair) -> (Complex64, Complex64) {
    let (lp, lm) = classical_lambda_pm(p);
    ((lp * 2.0).sqrt(), (lm * 2.0).sqrt())
}

/// Quantum level `(2 n1 + 1) sqrt(lambda_+ / 2) + (2 n2 + 1) sqrt(lambda_- / 2)`
/// of `p1^2 + p2^2 + w1^2 x1^2 + w2^2 x2^2 + i eps x1 x2`. `n1` counts quanta in
/// the mode continued from the larger frequency.
pub fn quantum_levels_r1s1(p: &OscillatorPair, n1: usize, n2: usize) -> Complex64 {
    let (lp, lm) = classical_lambda_pm(p);
    (lp * 0.5).sqrt() * (2 * n1 + 1) as f64 + (lm * 0.5).sqrt() * (2 * n2 + 1) as f64
}

/// The linear combination `(2 n1 + 1) lambda_+ + (2 n2 + 1) lambda_-`, kept so
/// it can be compared against truncated diagonalisation alongside
/// [`quantum_levels_r1s1`]. At `eps = 0` it gives `2 (2n+1) omega^2` sums rather
/// than the oscillator levels.
pub fn quantum_levels_linear_lambda(p: &OscillatorPair, n1: usize, n2: usize) -> Complex64 {
    let (lp, lm) = classical_lambda_pm(p);
    lp * (2 * n1 + 1) as f64 + lm * (2 * n2 + 1) as f64
}

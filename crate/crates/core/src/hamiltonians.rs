//! Truncated matrices for the coupled oscillator `H2(eps)` and the 1D family
//! `H3(eps) = p^2 + x^2 (ix)^eps`, together with their PT structure.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{abs_power_matrix, momentum_squared_matrix, monomial_matrix, signed_abs_power_matrix, BasisSpec};
use crate::closed_forms::{TwoLevelDetuned, TwoLevelGainCoupling};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, DenseMatrix};

/// Largest denominator tried when testing `omega1 / omega2` for rationality.
pub const RESONANCE_MAX_DENOMINATOR: u32 = 64;

/// Which coordinates the parity operator of `H2` reflects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParityChoice {
    FlipX1,
    FlipBoth,
}

/// `p1^2 + p2^2 + omega1^2 x1^2 + omega2^2 x2^2 + i eps x1^r x2^s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelH2 {
    pub omega1: f64,
    pub omega2: f64,
    pub r: u32,
    pub s: u32,
}

impl ModelH2 {
    pub fn new(omega1: f64, omega2: f64, r: u32, s: u32) -> Result<Self> {
        for (name, w) in [("omega1", omega1), ("omega2", omega2)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {w}")));
            }
        }
        if r == 0 || s == 0 {
            return Err(Error::InvalidParameter(format!("r and s must be >= 1, got ({r}, {s})")));
        }
        if r % 2 == 0 && s % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "r and s must not both be even, got ({r}, {s})"
            )));
        }
        Ok(Self { omega1, omega2, r, s })
    }

    /// Reflect `x1` when both powers are odd, otherwise reflect both coordinates.
    pub fn parity_choice(&self) -> ParityChoice {
        if self.r % 2 == 1 && self.s % 2 == 1 {
            ParityChoice::FlipX1
        } else {
            ParityChoice::FlipBoth
        }
    }

    /// Whether `r + s` is odd (the stricter of the two admissibility conditions).
    pub fn total_degree_odd(&self) -> bool {
        (self.r + self.s) % 2 == 1
    }

    /// Smallest `(k1, k2)` with `k1 omega1 = k2 omega2`, `k1 <= 64`, if any.
    pub fn resonance(&self) -> Option<(u32, u32)> {
        let ratio = self.omega1 / self.omega2;
        (1..=RESONANCE_MAX_DENOMINATOR).find_map(|k1| {
            let k2 = (k1 as f64 * ratio).round();
            let tol = 1e-10 * k1 as f64 * (self.omega1 + self.omega2);
            (k2 >= 1.0 && (k1 as f64 * self.omega1 - k2 * self.omega2).abs() <= tol)
                .then_some((k1, k2 as u32))
        })
    }

    pub fn unperturbed_level(&self, n1: usize, n2: usize) -> f64 {
        (2 * n1 + 1) as f64 * self.omega1 + (2 * n2 + 1) as f64 * self.omega2
    }
}

/// `p^2 + x^2 (ix)^eps` on the unit-frequency basis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelH3 {
    /// Starting number of quadrature nodes (default `4 N`).
    pub quad_order: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Basis {
    Oscillator(BasisSpec),
    Product(BasisSpec, BasisSpec),
    TwoLevel,
}

impl Basis {
    pub fn dimension(&self) -> usize {
        match self {
            Basis::Oscillator(b) => b.size,
            Basis::Product(a, b) => a.size * b.size,
            Basis::TwoLevel => 2,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Oscillator(b) => write!(f, "N={}", b.size),
            Basis::Product(a, b) => write!(f, "N={}x{}", a.size, b.size),
            Basis::TwoLevel => write!(f, "N=2"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelTag {
    H2(ModelH2),
    H3,
    GainCoupling { e1: f64, e2: f64 },
    Detuned { e: f64, b: f64 },
}

/// Signed permutation involution: `P e_j = sign[j] e_{perm[j]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityOperator {
    perm: Vec<usize>,
    sign: Vec<i8>,
}

impl ParityOperator {
    pub fn diagonal(sign: Vec<i8>) -> Self {
        Self {
            perm: (0..sign.len()).collect(),
            sign,
        }
    }

    /// Exchange of the two basis vectors of a two-level system.
    pub fn swap() -> Self {
        Self {
            perm: vec![1, 0],
            sign: vec![1, 1],
        }
    }

    pub fn signs(&self) -> &[i8] {
        &self.sign
    }

    pub fn is_diagonal(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// `P conj(M) P`.
    pub fn conjugate(&self, m: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(m.rows(), m.cols(), |a, b| {
            let s = (self.sign[a] * self.sign[b]) as f64;
            m[(self.perm[a], self.perm[b])].conj() * s
        })
    }
}

/// A finite section of one of the model Hamiltonians at coupling `eps`.
#[derive(Debug, Clone)]
pub struct TruncatedHamiltonian {
    pub matrix: DenseMatrix,
    pub parity: ParityOperator,
    pub basis: Basis,
    pub model: ModelTag,
    pub eps: f64,
}

impl TruncatedHamiltonian {
    pub fn gain_coupling(m: &TwoLevelGainCoupling) -> Self {
        Self {
            matrix: m.matrix(),
            parity: ParityOperator::diagonal(TwoLevelGainCoupling::parity().to_vec()),
            basis: Basis::TwoLevel,
            model: ModelTag::GainCoupling { e1: m.e1, e2: m.e2 },
            eps: m.eps,
        }
    }

    pub fn detuned(m: &TwoLevelDetuned) -> Self {
        Self {
            matrix: m.matrix(),
            parity: ParityOperator::swap(),
            basis: Basis::TwoLevel,
            model: ModelTag::Detuned { e: m.e, b: m.b },
            eps: m.eps,
        }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.rows()
    }

    /// `T M T^{-1}` with `T = diag(i^{k_a})`, `P = diag((-1)^{k_a})`.
    ///
    /// For a diagonal parity `P conj(M) P = M` makes entries within a parity
    /// sector real and entries across sectors imaginary, so this similarity is
    /// real. `None` when the parity is not diagonal or `M` lacks that structure.
    pub fn real_form(&self) -> Option<DenseMatrix> {
        if !self.parity.is_diagonal() {
            return None;
        }
        let odd = |a: usize| self.parity.sign[a] < 0;
        let n = self.dimension();
        let mut data = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let z = self.matrix[(a, b)];
                let v = match (odd(a), odd(b)) {
                    (x, y) if x == y => (z.im == 0.0).then_some(z.re)?,
                    (true, false) => (z.re == 0.0).then_some(-z.im)?,
                    _ => (z.re == 0.0).then_some(z.im)?,
                };
                data.push(v);
            }
        }
        DenseMatrix::from_real(n, n, &data).ok()
    }

    /// Matrix handed to the eigensolver: the real form when available.
    pub fn spectral_matrix(&self) -> DenseMatrix {
        self.real_form().unwrap_or_else(|| self.matrix.clone())
    }
}

fn check_size(name: &str, n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter(format!("{name} must be >= 1")))
    } else {
        Ok(())
    }
}

/// Product-basis section of `H2(eps)`; index `n1 * n2_size + n2`.
pub fn build_h2(m: &ModelH2, eps: f64, n1: usize, n2: usize) -> Result<TruncatedHamiltonian> {
    check_size("N1", n1)?;
    check_size("N2", n2)?;
    if !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("eps must be finite, got {eps}")));
    }
    let b1 = BasisSpec::new(m.omega1, n1)?;
    let b2 = BasisSpec::new(m.omega2, n2)?;
    let dim = n1 * n2;
    let mut matrix = DenseMatrix::zeros(dim, dim);
    if eps != 0.0 {
        let x1 = monomial_matrix(&b1, m.r)?;
        let x2 = monomial_matrix(&b2, m.s)?;
        matrix = x1.kron(&x2).scale(Complex64::new(0.0, eps));
    }
    for a in 0..n1 {
        for b in 0..n2 {
            matrix[(a * n2 + b, a * n2 + b)] += Complex64::new(m.unperturbed_level(a, b), 0.0);
        }
    }
    let sign_of = |k: usize| if k % 2 == 0 { 1i8 } else { -1 };
    let signs = (0..dim)
        .map(|k| {
            let (a, b) = (k / n2, k % n2);
            match m.parity_choice() {
                ParityChoice::FlipX1 => sign_of(a),
                ParityChoice::FlipBoth => sign_of(a + b),
            }
        })
        .collect();
    Ok(TruncatedHamiltonian {
        matrix,
        parity: ParityOperator::diagonal(signs),
        basis: Basis::Product(b1, b2),
        model: ModelTag::H2(*m),
        eps,
    })
}

/// `(diag H2(0), W)` with `H2(eps) = diag + eps W` on the same product basis.
pub fn h2_perturbation(m: &ModelH2, n1: usize, n2: usize) -> Result<(Vec<f64>, DenseMatrix)> {
    check_size("N1", n1)?;
    check_size("N2", n2)?;
    let x1 = monomial_matrix(&BasisSpec::new(m.omega1, n1)?, m.r)?;
    let x2 = monomial_matrix(&BasisSpec::new(m.omega2, n2)?, m.s)?;
    let diag = (0..n1 * n2).map(|k| m.unperturbed_level(k / n2, k % n2)).collect();
    Ok((diag, x1.kron(&x2).scale(Complex64::new(0.0, 1.0))))
}

/// Section of `H3(eps) =p^2 + cos(pi eps / 2) |x|^{2+eps} + i sin(pi eps / 2) sign(x) |x|^{2+eps}`,
/// assembled as `diag(2n+1) - x^2 + cos(..) |x|^{2+eps} + i sin(..) sign(x) |x|^{2+eps}`.
pub fn build_h3(eps: f64, n: usize, quad_order: Option<usize>) -> Result<TruncatedHamiltonian> {
    check_size("N", n)?;
    if !(eps.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("H3 requires -1 < eps < 1, got {eps}")));
    }
    let basis = BasisSpec::new(1.0, n)?;
    let x2 = monomial_matrix(&basis, 2)?;
    let mut matrix = DenseMatrix::zeros(n, n);
    if eps != 0.0 {
        let power = 2.0 + eps;
        let (sin, cos) = (FRAC_PI_2 * eps).sin_cos();
        let even = abs_power_matrix(&basis, power, quad_order)?;
        let odd = signed_abs_power_matrix(&basis, power, quad_order)?;
        matrix = DenseMatrix::from_fn(n, n, |i, j| {
            Complex64::new(cos * even[(i, j)].re - x2[(i, j)].re, sin * odd[(i, j)].re)
        });
    }
    for i in 0..n {
        matrix[(i, i)] += Complex64::new((2 * i + 1) as f64, 0.0);
    }
    let signs = (0..n).map(|k| if k % 2 == 0 { 1 } else { -1 }).collect();
    Ok(TruncatedHamiltonian {
        matrix,
        parity: ParityOperator::diagonal(signs),
        basis: Basis::Oscillator(basis),
        model: ModelTag::H3,
        eps,
    })
}

/// Truncated `p^2` for oscillator bases; `None` for two-level systems.
pub fn kinetic_matrix(h: &TruncatedHamiltonian) -> Option<DenseMatrix> {
    match h.basis {
        Basis::Oscillator(b) => Some(momentum_squared_matrix(&b)),
        Basis::Product(b1, b2) => {
            let p1 = momentum_squared_matrix(&b1).kron(&DenseMatrix::identity(b2.size));
            let p2 = DenseMatrix::identity(b1.size).kron(&momentum_squared_matrix(&b2));
            Some(&p1 + &p2)
        }
        Basis::TwoLevel => None,
    }
}

/// Smallest eigenvalue of `(M + M^H)/2 - p^2`: the truncated form of
/// `Re <u, H u> - <u, p^2 u> >= 0`.
pub fn form_positivity_gap(h: &TruncatedHamiltonian) -> Result<f64> {
    let kinetic = kinetic_matrix(h).ok_or_else(|| {
        Error::InvalidParameter("form positivity needs a kinetic term; two-level models have none".into())
    })?;
    let form = &h.matrix.hermitian_part() - &kinetic;
    let ev = hermitian_eigenvalues(&form)?;
    Ok(ev.first().copied().unwrap_or(0.0))
}

/// `max |P conj(M) P - M|`.
pub fn pt_defect(h: &TruncatedHamiltonian) -> f64 {
    (&h.parity.conjugate(&h.matrix) - &h.matrix).max_abs()
}

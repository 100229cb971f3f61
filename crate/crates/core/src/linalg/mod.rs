//! Dense complex linear algebra: matrices, the non-Hermitian eigensolver and
//! a symmetric tridiagonal path used by quadrature and form checks.

mod dense;
mod eigen;
mod real;
mod symmetric;

pub use dense::DenseMatrix;
pub use eigen::{
    eigen_residual, eigenvalues, hessenberg_reduce, multiset_distance, EigenSolution, ResidualOracle, Spectrum,
    DEFLATION_TOL, MAX_ITERATIONS_PER_EIGENVALUE,
};
pub use symmetric::{hermitian_eigenvalues, symmetric_eigenvalues, tridiagonal_eigenvalues};

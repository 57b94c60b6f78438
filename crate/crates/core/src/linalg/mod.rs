//! Sparse storage and iterative solvers shared by the discretization and the
//! IB fixed-point solves.

pub mod krylov;
pub mod sparse;

pub use krylov::{krylov_solve, KrylovMethod, Preconditioner, SolveControls, SolveReport};
pub use sparse::{dot, norm2, CsrMatrix, TripletBuilder};

/// Dense LU solve used as a reference on small systems.
pub fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let m = a.to_dense();
    let rhs = nalgebra::DVector::from_column_slice(b);
    m.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

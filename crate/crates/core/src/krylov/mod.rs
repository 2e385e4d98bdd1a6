//! Sparse storage, block symmetric Gauss-Seidel preconditioning and Krylov
//! solvers for the condensed saddle-point system.

mod precond;
mod solvers;
mod sparse;

pub use precond::{BlockSgsPreconditioner, IdentityPreconditioner, Preconditioner, SparseCholesky};
pub use solvers::{
    gmres_restarted, minres, project_nullspace, SolveReport, SolverKind, SolverSettings,
};
pub use sparse::{write_vector_market, SparseMatrix};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

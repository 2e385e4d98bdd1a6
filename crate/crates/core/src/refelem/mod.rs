//! Quadrature and nodal Lagrange bases on the reference triangle
//! `{(x, y) : x, y >= 0, x + y <= 1}` and the reference interval `[0, 1]`.

mod basis;
mod quadrature;

pub use basis::{
    make_basis, push_forward, BasisKind, PhysicalTabulation, ReferenceBasis, Tabulation,
    MAX_BASIS_DEGREE,
};
pub use quadrature::{
    gauss_legendre, make_quadrature, QuadratureRule, RefDomain, MAX_QUADRATURE_DEGREE,
};

/// Dimension of `P_k` on the triangle.
pub fn triangle_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

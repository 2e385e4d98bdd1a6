//! Hybridized (HDG), embedded (EDG) and embedded-hybridized (EDG-HDG)
//! discontinuous Galerkin discretizations of the 2D Stokes problem
//!
//! ```text
//! -nu lap(u) + grad(p) = f,   div(u) = 0   in Omega,   u = g on dOmega,
//! ```
//!
//! with static condensation of the cell velocity and a block symmetric
//! Gauss-Seidel preconditioned Krylov solve of the condensed system.

pub mod assembly;
pub mod condense;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod krylov;
pub mod mesh;
pub mod refelem;
pub mod solutions;
pub mod spaces;
pub mod study;

pub use error::{Error, Result};

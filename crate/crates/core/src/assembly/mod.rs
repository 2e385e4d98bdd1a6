//! Local element matrices of the velocity form `a_h` and the velocity-pressure
//! coupling `b_h`, and their collection into a global block system.
//!
//! Per cell the unknowns are the cell velocity `u` (component-major,
//! `c * dim P_k + i`) and `U = [ubar | p | pbar]`, with facet velocity ordered
//! by local edge, component, facet node and facet pressure by local edge,
//! facet node. The local saddle system reads
//!
//! ```text
//! [ A_uu   Bk^T ] [u]   [L_u]
//! [ Bk     Ck   ] [U] = [ 0 ]
//! ```
//!
//! with `Bk = [A_ubar_u; B_pu; B_pbar_u]` and `Ck = diag(A_ubar_ubar, 0, 0)`.

mod global;
mod local;

pub use global::{assemble_global, BlockSystem};
pub use local::{assemble_local, assemble_local_a, assemble_local_b, LocalBlocks, ReferenceData};

use crate::spaces::MethodVariant;

/// Interior penalty parameter for the 2D methods.
pub fn penalty_parameter(k: usize, variant: MethodVariant) -> f64 {
    let k2 = (k * k) as f64;
    match variant {
        MethodVariant::Hdg => 6.0 * k2,
        MethodVariant::Edg | MethodVariant::EdgHdg => 4.0 * k2,
    }
}

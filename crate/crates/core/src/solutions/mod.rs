//! Closed-form test flows and the error measures used to verify the solver.

mod exact;
mod norms;

pub use exact::{
    curl_case, kovasznay, l_shape_corner, lid_driven_bc, smooth_case, CurlCase, ExactSolution,
    Kovasznay, LShapeCorner, SmoothCase, L_SHAPE_LAMBDA,
};
pub use norms::{
    conservation_norms, convergence_rate, error_norms, pressure_integral, pressure_weights,
    remove_pressure_mean, triple_norms, ErrorReport,
};

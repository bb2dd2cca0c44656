//! Dense numerical kernels: symmetric eigensolver, simplex LP and a
//! diagonally constrained SDP with primal and dual certificates.

mod eig;
mod lp;
mod sdp;

pub use eig::{clip_operator_norm, eig_sym, min_eigenvalue, op_norm, Eigen, SymMatrix, EIG_DIM_CAP};
pub use lp::{lp_solve, LpProblem, LpSolution};
pub use sdp::{
    psd_feasibility, sdp_diag_max, PsdFeasibility, SdpDiagOptions, SdpDiagResult, SDP_DIM_CAP,
};

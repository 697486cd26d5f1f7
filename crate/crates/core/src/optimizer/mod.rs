//! Beam-domain power allocation: a concave-convex procedure whose every step
//! maximizes a deterministic-equivalent surrogate by iterative water-filling.
//!
//! Each outer iteration freezes `Gamma_k`, `Gamma~_k` from the fixed point at
//! the current allocation and linearizes the subtracted log-dets
//! (`Delta_k`); [`iwfa`] then solves the resulting concave problem under the
//! total power budget with per-coordinate Newton roots and a search on the
//! water level `mu`.

mod cccp;
mod config;
mod iwfa;
mod surrogate;

pub use cccp::{cccp_solve, cccp_solve_traced, initial_allocation, CccpSolution, CccpState, SurrogateData};
pub use config::{InitStrategy, LogBase, SolverConfig};
pub use iwfa::{iwfa, IwfaOutcome, IwfaState, KktCertificate};
pub use surrogate::{
    delta_matrices, newton_root, newton_root_bracketed, surrogate_objective, water_fill_residual, CoordinateResidual,
    SurrogateProblem,
};

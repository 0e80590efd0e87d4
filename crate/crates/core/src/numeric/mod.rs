//! Self-contained numeric kernels: a dense simplex LP solver, Euclidean
//! projection onto deviation polytopes, stationary distributions, and a
//! brute-force vertex enumerator for small polytopes.

pub mod lp;
pub mod projection;
pub mod stationary;
pub mod vertices;

pub use lp::{lp_solve, Constraint, LinearProgram, LpSolution, LpStatus};
pub use projection::{project_onto, project_simplex};
pub use stationary::{stationary, stationary_distribution, stationary_residual};
pub use vertices::enumerate_vertices;

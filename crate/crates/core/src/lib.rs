//! Constrained Phi-equilibria of cost-constrained normal-form games.
//!
//! A game pairs each player's utility with `m` cost functions; a correlated
//! strategy is safe when every expected cost is non-positive, and a player may
//! only deviate in ways that keep its own costs non-positive. The crate
//! verifies such equilibria, computes optimal ones when the safe deviations do
//! not depend on the strategy, and runs no-regret dynamics that converge to
//! them.
//!
//! Joint profiles are stored flat in row-major order with player 0 varying
//! slowest; see [`ProfileIndex`].

pub mod deviation;
pub mod error;
pub mod game;
pub mod instances;
pub mod io;
pub mod learning;
pub mod numeric;
pub mod oracle;
pub mod selftest;
pub mod special;
pub mod verifier;

pub use deviation::{contains, marginal_costs, tilde_cost, DeviationPolytope, PolytopePreset, PolytopeRow};
pub use error::{Error, Result};
pub use game::{
    apply_deviation, deviation_coefficients, expected_costs, expected_utility, is_safe, ConstrainedGame,
    CorrelatedStrategy, Deviation, ProfileIndex, SafetyReport, FEASIBILITY_TOL, GAP_TOL,
};
pub use learning::{phi_regret, run_dynamics, LearningTrace, RegretMinimizerState};
pub use oracle::{best_deviation_within, best_safe_deviation, strict_feasibility, OracleResult, StrictFeasibility};
pub use special::{check_fixed_safe_set, fixed_safe_polytope, solve_special, FixedSafeSet, LinearObjective, SolveReport};
pub use verifier::{expectation_ic, verify, verify_with, EquilibriumReport, ExpectationReport, PlayerGap, Tolerances};

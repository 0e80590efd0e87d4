use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("player index {player} out of range for a {players}-player game")]
    PlayerIndex { player: usize, players: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("strict feasibility violated: no safe deviation exists for player {player}")]
    NoSafeDeviation { player: usize },

    #[error(
        "costs of player {player} (constraint {constraint}) depend on other players' actions: \
         profiles {first:?} and {second:?} share the own action but differ in cost"
    )]
    NotMarginal {
        player: usize,
        constraint: usize,
        first: Vec<usize>,
        second: Vec<usize>,
    },

    #[error("safe-deviation set is not fixed: {0}; fall back to the best-deviation oracle or the grid brute oracle")]
    NotFixedSafeSet(String),

    #[error("deviation polytope of player {player} is empty")]
    EmptyPolytope { player: usize },

    #[error("master problem infeasible: no safe strategy satisfies the incentive cuts (strict feasibility violated)")]
    MasterInfeasible,

    #[error("iteration cap of {0} reached")]
    IterationCap(usize),

    #[error("linear program could not be solved: {0}")]
    Solver(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

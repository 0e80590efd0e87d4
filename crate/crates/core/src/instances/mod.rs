//! Instance generators and the grid brute-force oracles.

pub mod brute;
pub mod example1;
pub mod hardness;
pub mod random;

pub use brute::{brute_oracle, brute_oracle_with, product_grid_search, BruteOptions, BruteResult, ProductSearch};
pub use example1::{example1, Example1};
pub use hardness::{completeness_strategy, hardness_gadget, GadgetActions, GadgetConstants, GadgetParams, GraphInstance};
pub use random::{random_marginal_game, random_marginal_instance, random_objective, random_safe_game, SAFE_MARGIN};

//! Seeded random instance families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{ConstrainedGame, ProfileIndex};

const SAMPLING_CAP: usize = 10_000;

/// Minimum margin by which each player's designated safe action satisfies
/// every own constraint.
pub const SAFE_MARGIN: f64 = 0.1;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random game whose costs depend on the owner's action only, with common
/// action count `s`.
pub fn random_marginal_instance(n: usize, s: usize, m: usize, seed: u64) -> Result<ConstrainedGame> {
    random_marginal_game(&vec![s; n], m, seed)
}

/// Random marginal-cost game with per-player action counts.
///
/// Utilities are uniform on `[0, 1]`. Each player's per-action costs are
/// uniform on `[-1, 1]`, resampled until some action has every cost at most
/// `-SAFE_MARGIN`, so that coarse deviations to it certify strict feasibility.
pub fn random_marginal_game(actions: &[usize], m: usize, seed: u64) -> Result<ConstrainedGame> {
    let index = ProfileIndex::new(actions)?;
    let mut rng = rng(seed);
    let utilities: Vec<Vec<f64>> = (0..actions.len())
        .map(|_| (0..index.len()).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut costs = Vec::with_capacity(actions.len());
    for (i, &s) in actions.iter().enumerate() {
        let mut per_action = None;
        for _ in 0..SAMPLING_CAP {
            let draw: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..s).map(|_| rng.random_range(-1.0..=1.0)).collect())
                .collect();
            let has_safe_action =
                (0..s).any(|a| draw.iter().all(|c: &Vec<f64>| c[a] <= -SAFE_MARGIN));
            if has_safe_action {
                per_action = Some(draw);
                break;
            }
        }
        let per_action = per_action.ok_or_else(|| {
            Error::InvalidInput(format!("no strictly safe action for player {i} after {SAMPLING_CAP} draws"))
        })?;
        costs.push(
            per_action
                .iter()
                .map(|c| (0..index.len()).map(|p| c[index.action_of(p, i)]).collect())
                .collect(),
        );
    }
    ConstrainedGame::new(actions, m, utilities, costs)
}

/// Random game with arbitrary (profile-dependent) costs in which every player
/// owns an action whose costs are at most `-margin` whatever the others play.
pub fn random_safe_game(actions: &[usize], m: usize, margin: f64, seed: u64) -> Result<ConstrainedGame> {
    let index = ProfileIndex::new(actions)?;
    let mut rng = rng(seed);
    let utilities: Vec<Vec<f64>> = (0..actions.len())
        .map(|_| (0..index.len()).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut costs = Vec::with_capacity(actions.len());
    for (i, &s) in actions.iter().enumerate() {
        let mut accepted = None;
        for _ in 0..SAMPLING_CAP {
            let draw: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..index.len()).map(|_| rng.random_range(-1.0..=1.0)).collect())
                .collect();
            let has_safe_action = (0..s).any(|a| {
                draw.iter().all(|c| {
                    (0..index.len())
                        .filter(|&p| index.action_of(p, i) == a)
                        .all(|p| c[p] <= -margin)
                })
            });
            if has_safe_action {
                accepted = Some(draw);
                break;
            }
        }
        costs.push(accepted.ok_or_else(|| {
            Error::InvalidInput(format!("no strictly safe action for player {i} after {SAMPLING_CAP} draws"))
        })?);
    }
    ConstrainedGame::new(actions, m, utilities, costs)
}

/// Random linear objective with coefficients uniform on `[0, 1]`.
pub fn random_objective(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..len).map(|_| rng.random::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deviation::marginal_costs;

    #[test]
    fn seeds_are_reproducible() {
        let a = random_marginal_instance(2, 3, 2, 7).unwrap();
        let b = random_marginal_instance(2, 3, 2, 7).unwrap();
        let c = random_marginal_instance(2, 3, 2, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn costs_are_marginal_with_a_safe_action() {
        for seed in 0..20 {
            let g = random_marginal_game(&[2, 4], 2, seed).unwrap();
            for i in 0..2 {
                let c = marginal_costs(&g, i).unwrap();
                let s = g.actions(i);
                assert!((0..s).any(|a| c.iter().all(|cj| cj[a] <= -SAFE_MARGIN)));
            }
        }
    }

    #[test]
    fn safe_game_has_dominantly_safe_actions() {
        let g = random_safe_game(&[2, 2], 1, 0.1, 3).unwrap();
        let idx = g.profiles();
        for i in 0..2 {
            assert!((0..2).any(|a| (0..4)
                .filter(|&p| idx.action_of(p, i) == a)
                .all(|p| g.cost(i, 0)[p] <= -0.1)));
        }
    }
}

//! Best safe deviation and strict-feasibility certificates.
//!
//! For fixed `z`, both `u_i(phi <> z)` and `c_i(phi <> z)` are linear in the
//! entries of `phi`, so each query is a single LP over the deviation polytope.

use serde::Serialize;

use crate::deviation::DeviationPolytope;
use crate::error::{Error, Result};
use crate::game::{deviation_coefficients, dot, ConstrainedGame, CorrelatedStrategy, Deviation};
use crate::numeric::lp::{lp_solve, LinearProgram, LpStatus};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub player: usize,
    /// `max u_i(phi <> z)` over safe deviations.
    pub best_value: f64,
    /// `u_i(z)`.
    pub current_value: f64,
    pub gap: f64,
    pub witness: Deviation,
    /// `c_i(witness <> z)` per constraint.
    pub safety_residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrictFeasibility {
    pub player: usize,
    /// `-min_phi max_j c_{i,j}(phi <> z)`; infinite when the player has no constraints.
    pub rho: f64,
    pub witness: Deviation,
}

impl StrictFeasibility {
    pub fn holds(&self) -> bool {
        self.rho > 0.0
    }
}

fn check_poly(game: &ConstrainedGame, poly: &DeviationPolytope, player: usize) -> Result<usize> {
    game.check_player(player)?;
    let s = game.actions(player);
    if poly.owner() != player || poly.size() != s {
        return Err(Error::InvalidInput(format!(
            "polytope for player {} with {} actions passed for player {player} with {s} actions",
            poly.owner(),
            poly.size()
        )));
    }
    Ok(s)
}

/// LP skeleton over `phi` (plus `extra` trailing variables) with the polytope
/// rows and the row-sum equalities.
fn polytope_lp(poly: &DeviationPolytope, objective: Vec<f64>, extra: usize) -> LinearProgram {
    let s = poly.size();
    let d = s * s;
    let pad = |mut v: Vec<f64>| {
        v.resize(d + extra, 0.0);
        v
    };
    let mut lp = LinearProgram::maximize(pad(objective));
    for row in poly.rows() {
        lp.add_le(pad(row.coeffs.clone()), row.bound);
    }
    for b in 0..s {
        let mut c = vec![0.0; d + extra];
        c[b * s..(b + 1) * s].iter_mut().for_each(|v| *v = 1.0);
        lp.add_eq(c, 1.0);
    }
    lp
}

/// Best deviation of `player` among those keeping every own expected cost
/// at most `cost_bound`.
pub fn best_deviation_within(
    game: &ConstrainedGame,
    poly: &DeviationPolytope,
    z: &CorrelatedStrategy,
    player: usize,
    cost_bound: f64,
) -> Result<OracleResult> {
    let s = check_poly(game, poly, player)?;
    game.check_strategy(z)?;
    let index = game.profiles();
    let utility = deviation_coefficients(index, game.utility(player), z.probs(), player);
    let costs: Vec<Vec<f64>> = (0..game.constraints())
        .map(|j| deviation_coefficients(index, game.cost(player, j), z.probs(), player))
        .collect();

    let mut lp = polytope_lp(poly, utility.clone(), 0);
    for c in &costs {
        lp.add_le(c.clone(), cost_bound);
    }
    let sol = lp_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::NoSafeDeviation { player }),
        LpStatus::Unbounded => return Err(Error::Solver("deviation LP unbounded".into())),
    }
    let witness = Deviation::new(player, s, sol.point)?;
    let best_value = dot(&utility, witness.entries());
    let current_value = dot(game.utility(player), z.probs());
    Ok(OracleResult {
        player,
        best_value,
        current_value,
        gap: best_value - current_value,
        safety_residuals: costs.iter().map(|c| dot(c, witness.entries())).collect(),
        witness,
    })
}

/// `max u_i(phi <> z)` over `phi` in `poly` with `c_i(phi <> z) <= 0`.
pub fn best_safe_deviation(
    game: &ConstrainedGame,
    poly: &DeviationPolytope,
    z: &CorrelatedStrategy,
    player: usize,
) -> Result<OracleResult> {
    best_deviation_within(game, poly, z, player, 0.0)
}

/// Largest margin by which some deviation in `poly` satisfies all of the
/// player's cost constraints at `z`.
pub fn strict_feasibility(
    game: &ConstrainedGame,
    poly: &DeviationPolytope,
    z: &CorrelatedStrategy,
    player: usize,
) -> Result<StrictFeasibility> {
    let s = check_poly(game, poly, player)?;
    game.check_strategy(z)?;
    let d = s * s;
    let index = game.profiles();
    if game.constraints() == 0 {
        let sol = lp_solve(&polytope_lp(poly, vec![0.0; d], 0))?;
        if !sol.is_optimal() {
            return Err(Error::EmptyPolytope { player });
        }
        return Ok(StrictFeasibility {
            player,
            rho: f64::INFINITY,
            witness: Deviation::new(player, s, sol.point)?,
        });
    }
    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;
    let mut lp = polytope_lp(poly, objective, 1);
    lp.set_bounds(d, f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..game.constraints() {
        let mut c = deviation_coefficients(index, game.cost(player, j), z.probs(), player);
        c.push(1.0);
        lp.add_le(c, 0.0);
    }
    let sol = lp_solve(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::EmptyPolytope { player });
    }
    let witness = Deviation::new(player, s, sol.point[..d].to_vec())?;
    Ok(StrictFeasibility {
        player,
        rho: sol.point[d],
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::example1;

    #[test]
    fn example_player_two_at_mixture() {
        let ex = example1();
        let poly = DeviationPolytope::all(1, 2);
        let r = best_safe_deviation(&ex.game, &poly, &ex.z3, 1).unwrap();
        assert!((r.best_value - 0.5).abs() < 1e-9);
        assert!((r.gap - 1.0 / 3.0).abs() < 1e-9);
        assert!(r.safety_residuals[0] <= 1e-9);
    }

    #[test]
    fn example_player_two_at_first_equilibrium() {
        let ex = example1();
        let poly = DeviationPolytope::all(1, 2);
        let r = best_safe_deviation(&ex.game, &poly, &ex.z1, 1).unwrap();
        assert!((r.best_value - 1.0 / 3.0).abs() < 1e-9);
        assert!(r.gap.abs() < 1e-9);
    }

    #[test]
    fn constant_utility_has_no_gap() {
        let game = ConstrainedGame::new(
            &[3],
            1,
            vec![vec![0.4; 3]],
            vec![vec![vec![0.5, -0.5, 0.0]]],
        )
        .unwrap();
        let z = CorrelatedStrategy::new(vec![0.2, 0.5, 0.3]).unwrap();
        let r = best_safe_deviation(&game, &DeviationPolytope::all(0, 3), &z, 0).unwrap();
        assert!(r.gap.abs() < 1e-12);
    }

    #[test]
    fn strict_feasibility_of_example() {
        let ex = example1();
        for z in [&ex.z1, &ex.z2, &ex.z3] {
            for i in 0..2 {
                let poly = DeviationPolytope::all(i, 2);
                let f = strict_feasibility(&ex.game, &poly, z, i).unwrap();
                assert!(f.rho >= 0.5 - 1e-9, "rho {} for player {i}", f.rho);
            }
        }
    }

    #[test]
    fn zero_costs_sit_on_the_boundary() {
        let game =
            ConstrainedGame::new(&[2], 1, vec![vec![0.0, 1.0]], vec![vec![vec![0.0, 0.0]]]).unwrap();
        let z = CorrelatedStrategy::uniform(2);
        let f = strict_feasibility(&game, &DeviationPolytope::all(0, 2), &z, 0).unwrap();
        assert!(f.rho.abs() < 1e-12);
        assert!(!f.holds());
    }

    #[test]
    fn infeasible_safety_system_is_reported() {
        let game =
            ConstrainedGame::new(&[2], 1, vec![vec![0.0, 1.0]], vec![vec![vec![0.5, 0.5]]]).unwrap();
        let z = CorrelatedStrategy::uniform(2);
        let err = best_safe_deviation(&game, &DeviationPolytope::all(0, 2), &z, 0).unwrap_err();
        assert!(matches!(err, Error::NoSafeDeviation { player: 0 }));
    }
}

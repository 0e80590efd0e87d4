//! Constrained epsilon-Phi-equilibrium checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::deviation::DeviationPolytope;
use crate::error::{Error, Result};
use crate::game::{is_safe, ConstrainedGame, CorrelatedStrategy, Deviation, SafetyReport, FEASIBILITY_TOL, GAP_TOL};
use crate::oracle::best_safe_deviation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Slack allowed on top of epsilon when judging gaps.
    pub gap: f64,
    /// Largest expected cost still counted as safe.
    pub safety: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gap: GAP_TOL,
            safety: FEASIBILITY_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerGap {
    pub player: usize,
    pub utility: f64,
    pub best_value: f64,
    pub gap: f64,
    pub witness: Deviation,
    pub witness_costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub epsilon: f64,
    pub safety: SafetyReport,
    pub players: Vec<PlayerGap>,
    pub max_gap: f64,
    pub verdict: bool,
}

impl EquilibriumReport {
    pub fn gap(&self, player: usize) -> f64 {
        self.players[player].gap
    }
}

pub(crate) fn check_polys(game: &ConstrainedGame, polys: &[DeviationPolytope]) -> Result<()> {
    if polys.len() != game.players() {
        return Err(Error::Dimension {
            what: "deviation polytopes (players)".into(),
            expected: game.players(),
            found: polys.len(),
        });
    }
    for (i, poly) in polys.iter().enumerate() {
        if poly.owner() != i || poly.size() != game.actions(i) {
            return Err(Error::InvalidInput(format!(
                "polytope {i} is for player {} with {} actions",
                poly.owner(),
                poly.size()
            )));
        }
    }
    Ok(())
}

fn player_gaps(
    game: &ConstrainedGame,
    polys: &[DeviationPolytope],
    z: &CorrelatedStrategy,
) -> Result<Vec<PlayerGap>> {
    (0..game.players())
        .into_par_iter()
        .map(|i| {
            let r = best_safe_deviation(game, &polys[i], z, i)?;
            Ok(PlayerGap {
                player: i,
                utility: r.current_value,
                best_value: r.best_value,
                gap: r.gap,
                witness: r.witness,
                witness_costs: r.safety_residuals,
            })
        })
        .collect()
}

/// Checks `z` against safety and every player's safe-deviation incentive.
pub fn verify(
    game: &ConstrainedGame,
    polys: &[DeviationPolytope],
    z: &CorrelatedStrategy,
    epsilon: f64,
) -> Result<EquilibriumReport> {
    verify_with(game, polys, z, epsilon, Tolerances::default())
}

pub fn verify_with(
    game: &ConstrainedGame,
    polys: &[DeviationPolytope],
    z: &CorrelatedStrategy,
    epsilon: f64,
    tol: Tolerances,
) -> Result<EquilibriumReport> {
    if !epsilon.is_finite() {
        return Err(Error::NonFinite("epsilon".into()));
    }
    check_polys(game, polys)?;
    let safety = is_safe(game, z, tol.safety)?;
    let players = player_gaps(game, polys, z)?;
    let max_gap = players.iter().map(|p| p.gap).fold(f64::NEG_INFINITY, f64::max);
    let verdict = safety.safe && max_gap <= epsilon + tol.gap;
    Ok(EquilibriumReport {
        epsilon,
        safety,
        players,
        max_gap,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectationReport {
    pub epsilon: f64,
    /// `E_{z ~ mu}[max_{phi safe at z} u_i(phi <> z) - u_i(z)]` per player.
    pub expected_gaps: Vec<f64>,
    pub holds: bool,
}

/// Expected incentive gap under a distribution over correlated strategies.
pub fn expectation_ic(
    game: &ConstrainedGame,
    polys: &[DeviationPolytope],
    mu: &[(f64, CorrelatedStrategy)],
    epsilon: f64,
) -> Result<ExpectationReport> {
    check_polys(game, polys)?;
    if mu.is_empty() {
        return Err(Error::InvalidInput("empty strategy distribution".into()));
    }
    if mu.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidInput("strategy weights must be non-negative".into()));
    }
    let total: f64 = mu.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > FEASIBILITY_TOL {
        return Err(Error::InvalidInput(format!("strategy weights sum to {total}")));
    }
    let mut expected = vec![0.0; game.players()];
    for (k, (w, z)) in mu.iter().enumerate() {
        let safety = is_safe(game, z, FEASIBILITY_TOL)?;
        if !safety.safe {
            return Err(Error::InvalidInput(format!(
                "support strategy {k} is unsafe (residual {})",
                safety.max_residual
            )));
        }
        for g in player_gaps(game, polys, z)? {
            expected[g.player] += w * g.gap;
        }
    }
    let holds = expected.iter().all(|&g| g <= epsilon + GAP_TOL);
    Ok(ExpectationReport {
        epsilon,
        expected_gaps: expected,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::example1;

    fn all_polys() -> Vec<DeviationPolytope> {
        vec![DeviationPolytope::all(0, 2), DeviationPolytope::all(1, 2)]
    }

    #[test]
    fn example_verdicts() {
        let ex = example1();
        let polys = all_polys();
        for z in [&ex.z1, &ex.z2] {
            let r = verify(&ex.game, &polys, z, 0.0).unwrap();
            assert!(r.verdict, "{r:?}");
            assert!(r.max_gap <= 1e-6);
        }
        let r = verify(&ex.game, &polys, &ex.z3, 0.0).unwrap();
        assert!(!r.verdict);
        assert!(r.safety.safe);
        assert!((r.gap(1) - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn epsilon_one_accepts_every_safe_strategy() {
        let ex = example1();
        let r = verify(&ex.game, &all_polys(), &ex.z3, 1.0).unwrap();
        assert!(r.verdict);
    }

    #[test]
    fn unsafe_strategy_still_reports_gaps() {
        let ex = example1();
        let z = CorrelatedStrategy::point_mass(4, 1);
        let r = verify(&ex.game, &all_polys(), &z, 1.0).unwrap();
        assert!(!r.safety.safe && !r.verdict);
        assert_eq!(r.players.len(), 2);
    }

    #[test]
    fn expectation_over_equilibria() {
        let ex = example1();
        let polys = all_polys();
        let mu = vec![(0.5, ex.z1.clone()), (0.5, ex.z2.clone())];
        let r = expectation_ic(&ex.game, &polys, &mu, 0.0).unwrap();
        assert!(r.holds);
        assert!(r.expected_gaps.iter().all(|&g| g <= 1e-6));

        let r = expectation_ic(&ex.game, &polys, &[(1.0, ex.z3.clone())], 0.0).unwrap();
        assert!((r.expected_gaps[1] - 1.0 / 3.0).abs() < 1e-9);
        assert!(!r.holds);

        let r = expectation_ic(&ex.game, &polys, &[(1.0, ex.z1.clone())], 0.0).unwrap();
        assert!(r.expected_gaps.iter().all(|g| g.abs() <= 1e-9));
    }

    #[test]
    fn expectation_rejects_bad_weights_and_unsafe_support() {
        let ex = example1();
        let polys = all_polys();
        assert!(expectation_ic(&ex.game, &polys, &[(0.7, ex.z1.clone())], 0.0).is_err());
        let unsafe_z = CorrelatedStrategy::point_mass(4, 1);
        assert!(expectation_ic(&ex.game, &polys, &[(1.0, unsafe_z)], 0.0).is_err());
    }
}

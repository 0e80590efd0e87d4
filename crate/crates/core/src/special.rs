//! Optimal constrained equilibria when every player's safe deviations form a
//! fixed polytope.
//!
//! The master problem maximizes a linear objective over safe correlated
//! strategies subject to incentive cuts `u_i(phi <> z) - u_i(z) <= 0`. Cuts are
//! produced lazily by the best-safe-deviation oracle until none is violated.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deviation::{marginal_costs, DeviationPolytope, PolytopePreset, PolytopeRow};
use crate::error::{Error, Result};
use crate::game::{dot, ConstrainedGame, CorrelatedStrategy, Deviation, ProfileIndex};
use crate::numeric::lp::{lp_solve, LinearProgram, LpStatus};
use crate::oracle::best_safe_deviation;
use crate::verifier::{check_polys, verify};

/// Violation above which an oracle witness becomes a cut.
pub const CUT_THRESHOLD: f64 = 1e-9;
/// Resolution at which two witnesses count as the same cut.
pub const CUT_RESOLUTION: f64 = 1e-12;
pub const ITERATION_CAP: usize = 100_000;

/// Outcome of [`check_fixed_safe_set`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedSafeSet {
    pub fixed: bool,
    /// Why the safe deviations of some player depend on the strategy.
    pub witness: Option<String>,
}

/// Decides whether every player's safe deviation set is independent of `z`.
///
/// This holds for a player without constraints, and for a player whose costs
/// depend on the own action only when deviations are coarse (or the player has
/// a single action).
pub fn check_fixed_safe_set(game: &ConstrainedGame, polys: &[DeviationPolytope]) -> FixedSafeSet {
    let fail = |w: String| FixedSafeSet {
        fixed: false,
        witness: Some(w),
    };
    if let Err(e) = check_polys(game, polys) {
        return fail(e.to_string());
    }
    if game.constraints() == 0 {
        return FixedSafeSet {
            fixed: true,
            witness: None,
        };
    }
    for (i, poly) in polys.iter().enumerate() {
        if game.actions(i) == 1 {
            continue;
        }
        if poly.preset_tag() != PolytopePreset::Cce {
            return fail(format!(
                "player {i} uses the {:?} deviation set; only coarse (CCE) deviations give a strategy-free cost",
                poly.preset_tag()
            ));
        }
        if let Err(e) = marginal_costs(game, i) {
            return fail(e.to_string());
        }
    }
    FixedSafeSet {
        fixed: true,
        witness: None,
    }
}

/// Player `player`'s safe deviations as a polytope, valid when the safe set is fixed.
///
/// For coarse deviations with constant row `h`, the cost row
/// `M[b, a] = c_j(a) / s` evaluates to `sum_a c_j(a) h[a]`.
pub fn fixed_safe_polytope(
    game: &ConstrainedGame,
    poly: &DeviationPolytope,
    player: usize,
) -> Result<DeviationPolytope> {
    let s = game.actions(player);
    if game.constraints() == 0 || s == 1 {
        return Ok(poly.clone());
    }
    let costs = marginal_costs(game, player)?;
    let rows = costs.iter().map(|c| {
        let mut coeffs = vec![0.0; s * s];
        for b in 0..s {
            for a in 0..s {
                coeffs[b * s + a] = c[a] / s as f64;
            }
        }
        PolytopeRow { coeffs, bound: 0.0 }
    });
    Ok(poly.with_rows(rows))
}

/// Linear function of a correlated strategy, one coefficient per profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearObjective {
    pub coefficients: Vec<f64>,
}

impl LinearObjective {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("objective coefficients".into()));
        }
        Ok(Self { coefficients })
    }

    /// Sum of all players' utilities.
    pub fn welfare(game: &ConstrainedGame) -> Self {
        let len = game.profiles().len();
        let coefficients = (0..len)
            .map(|p| game.utilities().iter().map(|u| u[p]).sum())
            .collect();
        Self { coefficients }
    }

    pub fn zero(len: usize) -> Self {
        Self {
            coefficients: vec![0.0; len],
        }
    }

    pub fn value(&self, z: &CorrelatedStrategy) -> f64 {
        dot(&self.coefficients, z.probs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub strategy: CorrelatedStrategy,
    pub objective: f64,
    pub iterations: usize,
    pub cuts_per_player: Vec<usize>,
    pub final_max_gap: f64,
    pub max_safety_residual: f64,
}

/// Coefficients `w` with `w . z = u_i(phi <> z) - u_i(z)`.
pub fn incentive_row(index: &ProfileIndex, utility: &[f64], phi: &Deviation) -> Vec<f64> {
    let i = phi.owner();
    let s = phi.size();
    let stride = index.stride(i);
    (0..index.len())
        .map(|p| {
            let b = index.action_of(p, i);
            let base = p - b * stride;
            let deviated: f64 = (0..s).map(|a| phi.get(b, a) * utility[base + a * stride]).sum();
            deviated - utility[p]
        })
        .collect()
}

fn cut_key(phi: &Deviation) -> (usize, Vec<i64>) {
    (
        phi.owner(),
        phi.entries()
            .iter()
            .map(|v| (v / CUT_RESOLUTION).round() as i64)
            .collect(),
    )
}

/// Maximizes `objective` over constrained Phi-equilibria by lazy cut generation.
pub fn solve_special(
    game: &ConstrainedGame,
    polys: &[DeviationPolytope],
    objective: &LinearObjective,
) -> Result<SolveReport> {
    let check = check_fixed_safe_set(game, polys);
    if !check.fixed {
        return Err(Error::NotFixedSafeSet(check.witness.unwrap_or_default()));
    }
    let index = game.profiles();
    let len = index.len();
    if objective.coefficients.len() != len {
        return Err(Error::Dimension {
            what: "objective coefficients".into(),
            expected: len,
            found: objective.coefficients.len(),
        });
    }

    let mut master = LinearProgram::maximize(objective.coefficients.clone());
    master.add_eq(vec![1.0; len], 1.0);
    for i in 0..game.players() {
        for j in 0..game.constraints() {
            master.add_le(game.cost(i, j).to_vec(), 0.0);
        }
    }

    let mut seen = HashSet::new();
    let mut cuts_per_player = vec![0; game.players()];
    for iteration in 1..=ITERATION_CAP {
        let sol = lp_solve(&master)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::MasterInfeasible),
            LpStatus::Unbounded => return Err(Error::Solver("master problem unbounded".into())),
        }
        let z = CorrelatedStrategy::new(sol.point)?;
        let witnesses: Vec<_> = (0..game.players())
            .into_par_iter()
            .map(|i| best_safe_deviation(game, &polys[i], &z, i))
            .collect::<Result<_>>()?;

        let mut added = 0;
        for r in witnesses.into_iter().filter(|r| r.gap > CUT_THRESHOLD) {
            if seen.insert(cut_key(&r.witness)) {
                master.add_le(incentive_row(index, game.utility(r.player), &r.witness), 0.0);
                cuts_per_player[r.player] += 1;
                added += 1;
            }
        }
        if added == 0 {
            let report = verify(game, polys, &z, 0.0)?;
            return Ok(SolveReport {
                objective: objective.value(&z),
                strategy: z,
                iterations: iteration,
                cuts_per_player,
                final_max_gap: report.max_gap,
                max_safety_residual: report.safety.max_residual,
            });
        }
    }
    Err(Error::IterationCap(ITERATION_CAP))
}

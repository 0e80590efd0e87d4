//! Decentralized no-regret dynamics over fixed safe deviation polytopes.
//!
//! Each player runs projected online gradient ascent on its deviation matrix,
//! plays a stationary distribution of the current matrix, and the joint
//! strategy of a round is the product of these distributions. The running
//! average of the joint strategies approaches a constrained equilibrium at a
//! rate governed by the players' Phi-regret.

use serde::Serialize;

use crate::deviation::DeviationPolytope;
use crate::error::{Error, Result};
use crate::game::{deviation_coefficients, dot, ConstrainedGame, CorrelatedStrategy, Deviation};
use crate::numeric::lp::{lp_solve, LinearProgram, LpStatus};
use crate::numeric::{project_onto, stationary};
use crate::special::{check_fixed_safe_set, fixed_safe_polytope};

/// Projected online gradient ascent over one player's safe polytope.
#[derive(Debug, Clone, Serialize)]
pub struct RegretMinimizerState {
    pub player: usize,
    pub phi: Deviation,
    /// `sum_t G_t`, the gradient of the cumulative reward.
    pub cumulative_gradient: Vec<f64>,
    /// `sum_t u_i(z_t)`.
    pub cumulative_utility: f64,
    /// `D / G` in the step `eta_t = D / (G sqrt(t))`.
    pub step_scale: f64,
    pub rounds: usize,
    #[serde(skip)]
    safe: DeviationPolytope,
    #[serde(skip)]
    cost_rows: Vec<Vec<f64>>,
    #[serde(skip)]
    slater: Option<(Deviation, f64)>,
}

impl RegretMinimizerState {
    fn new(safe: DeviationPolytope, cost_rows: Vec<Vec<f64>>) -> Result<Self> {
        let player = safe.owner();
        let s = safe.size();
        let slater = if cost_rows.is_empty() {
            None
        } else {
            Some(slater_point(&safe, &cost_rows)?)
        };
        // D = sqrt(2 s) bounds the diameter, G = sqrt(s) the gradient norm.
        let step_scale = (2.0 * s as f64).sqrt() / (s as f64).sqrt();
        let mut state = Self {
            player,
            phi: Deviation::identity(player, s),
            cumulative_gradient: vec![0.0; s * s],
            cumulative_utility: 0.0,
            step_scale,
            rounds: 0,
            safe,
            cost_rows,
            slater,
        };
        let start = state.project(Deviation::identity(player, s).entries())?;
        state.phi = start;
        Ok(state)
    }

    pub fn safe_polytope(&self) -> &DeviationPolytope {
        &self.safe
    }

    /// Projection followed by a pull toward the strictly safe point if rounding
    /// left some cost row positive.
    fn project(&self, point: &[f64]) -> Result<Deviation> {
        let phi = project_onto(&self.safe, point)?;
        let Some((witness, rho)) = &self.slater else {
            return Ok(phi);
        };
        let worst = self
            .cost_rows
            .iter()
            .map(|c| dot(c, phi.entries()))
            .fold(f64::NEG_INFINITY, f64::max);
        if worst <= 0.0 {
            return Ok(phi);
        }
        let lambda = if *rho > 0.0 {
            (worst / (worst + rho) * (1.0 + 1e-9) + 1e-15).min(1.0)
        } else {
            1.0
        };
        phi.mix(witness, 1.0 - lambda)
    }

    fn step(&mut self, gradient: &[f64], utility: f64) -> Result<()> {
        self.rounds += 1;
        for (c, g) in self.cumulative_gradient.iter_mut().zip(gradient) {
            *c += g;
        }
        self.cumulative_utility += utility;
        let eta = self.step_scale / (self.rounds as f64).sqrt();
        let moved: Vec<f64> = self
            .phi
            .entries()
            .iter()
            .zip(gradient)
            .map(|(p, g)| p + eta * g)
            .collect();
        self.phi = self.project(&moved)?;
        Ok(())
    }

    /// Best fixed safe deviation in hindsight minus realized utility.
    pub fn regret(&self) -> Result<f64> {
        Ok(hindsight_value(&self.safe, &self.cumulative_gradient)? - self.cumulative_utility)
    }
}

/// Deviation maximizing the margin on every cost row, with that margin.
fn slater_point(safe: &DeviationPolytope, cost_rows: &[Vec<f64>]) -> Result<(Deviation, f64)> {
    let s = safe.size();
    let d = s * s;
    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    lp.set_bounds(d, f64::NEG_INFINITY, 1.0);
    let pad = |v: &[f64], t: f64| {
        let mut out = v.to_vec();
        out.push(t);
        out
    };
    for row in safe.rows() {
        lp.add_le(pad(&row.coeffs, 0.0), row.bound);
    }
    for c in cost_rows {
        lp.add_le(pad(c, 1.0), 0.0);
    }
    for b in 0..s {
        let mut c = vec![0.0; d + 1];
        c[b * s..(b + 1) * s].iter_mut().for_each(|v| *v = 1.0);
        lp.add_eq(c, 1.0);
    }
    let sol = lp_solve(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::EmptyPolytope { player: safe.owner() });
    }
    Ok((Deviation::new(safe.owner(), s, sol.point[..d].to_vec())?, sol.point[d]))
}

fn hindsight_value(poly: &DeviationPolytope, gradient: &[f64]) -> Result<f64> {
    let s = poly.size();
    let mut lp = LinearProgram::maximize(gradient.to_vec());
    for row in poly.rows() {
        lp.add_le(row.coeffs.clone(), row.bound);
    }
    for b in 0..s {
        let mut c = vec![0.0; s * s];
        c[b * s..(b + 1) * s].iter_mut().for_each(|v| *v = 1.0);
        lp.add_eq(c, 1.0);
    }
    let sol = lp_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        _ => Err(Error::EmptyPolytope { player: poly.owner() }),
    }
}

/// Everything observed in one round.
#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub t: usize,
    pub phis: Vec<Deviation>,
    /// Per-player stationary distributions.
    pub marginals: Vec<Vec<f64>>,
    pub z: CorrelatedStrategy,
    pub utilities: Vec<f64>,
    pub costs: Vec<Vec<f64>>,
}

/// Per-player summary at a checkpoint round.
#[derive(Debug, Clone, Serialize)]
pub struct CheckpointPlayer {
    pub regret: f64,
    /// `regret / t`.
    pub gap_bound: f64,
    /// Largest expected cost of the player under the running average.
    pub max_cost_residual: f64,
    /// Utility of the player under the running average.
    pub utility_avg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Checkpoint {
    pub t: usize,
    pub average: CorrelatedStrategy,
    pub players: Vec<CheckpointPlayer>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LearningTrace {
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    pub checkpoints: Vec<Checkpoint>,
    /// Running average of the joint strategies after the last round.
    pub average: CorrelatedStrategy,
    pub minimizers: Vec<RegretMinimizerState>,
}

impl LearningTrace {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }
}

/// Powers of two up to `horizon`, plus `horizon` itself.
pub fn checkpoint_rounds(horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..usize::BITS)
        .map(|k| 1usize << k)
        .take_while(|&t| t <= horizon)
        .collect();
    if out.last() != Some(&horizon) && horizon > 0 {
        out.push(horizon);
    }
    out
}

/// Runs `horizon` rounds of the dynamics.
///
/// The dynamics are deterministic; `seed` is only recorded in the trace.
pub fn run_dynamics(
    game: &ConstrainedGame,
    polys: &[DeviationPolytope],
    horizon: usize,
    seed: u64,
) -> Result<LearningTrace> {
    let check = check_fixed_safe_set(game, polys);
    if !check.fixed {
        return Err(Error::NotFixedSafeSet(check.witness.unwrap_or_default()));
    }
    if horizon == 0 {
        return Err(Error::InvalidInput("the number of rounds must be positive".into()));
    }
    let index = game.profiles();
    let n = game.players();
    let mut minimizers = Vec::with_capacity(n);
    for (i, poly) in polys.iter().enumerate() {
        let safe = fixed_safe_polytope(game, poly, i)?;
        let extra = safe.rows().len() - poly.rows().len();
        let cost_rows = safe.rows()[poly.rows().len()..]
            .iter()
            .take(extra)
            .map(|r| r.coeffs.clone())
            .collect();
        minimizers.push(RegretMinimizerState::new(safe, cost_rows)?);
    }

    let checkpoints_at = checkpoint_rounds(horizon);
    let mut next_checkpoint = 0;
    let mut sum = vec![0.0; index.len()];
    let mut rounds = Vec::with_capacity(horizon);
    let mut checkpoints = Vec::with_capacity(checkpoints_at.len());
    for t in 1..=horizon {
        let phis: Vec<Deviation> = minimizers.iter().map(|m| m.phi.clone()).collect();
        let marginals: Vec<Vec<f64>> = phis.iter().map(stationary).collect();
        let z = CorrelatedStrategy::product(index, &marginals)?;
        let utilities: Vec<f64> = (0..n).map(|i| dot(game.utility(i), z.probs())).collect();
        let costs: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..game.constraints()).map(|j| dot(game.cost(i, j), z.probs())).collect())
            .collect();
        for (i, m) in minimizers.iter_mut().enumerate() {
            let gradient = deviation_coefficients(index, game.utility(i), z.probs(), i);
            if gradient.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of player {i} at round {t}")));
            }
            m.step(&gradient, utilities[i])?;
        }
        for (acc, p) in sum.iter_mut().zip(z.probs()) {
            *acc += p;
        }
        rounds.push(RoundRecord {
            t,
            phis,
            marginals,
            z,
            utilities,
            costs,
        });

        if checkpoints_at.get(next_checkpoint) == Some(&t) {
            next_checkpoint += 1;
            let average = CorrelatedStrategy::new(sum.iter().map(|v| v / t as f64).collect())?;
            let players = minimizers
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let regret = m.regret()?;
                    Ok(CheckpointPlayer {
                        regret,
                        gap_bound: regret / t as f64,
                        max_cost_residual: (0..game.constraints())
                            .map(|j| dot(game.cost(i, j), average.probs()))
                            .fold(f64::NEG_INFINITY, f64::max),
                        utility_avg: dot(game.utility(i), average.probs()),
                    })
                })
                .collect::<Result<_>>()?;
            checkpoints.push(Checkpoint { t, average, players });
        }
    }
    let average = checkpoints
        .last()
        .map(|c| c.average.clone())
        .expect("the final round is a checkpoint");
    Ok(LearningTrace {
        seed,
        rounds,
        checkpoints,
        average,
        minimizers,
    })
}

/// Phi-regret of `player` over the whole trace against deviations in `poly`.
pub fn phi_regret(
    game: &ConstrainedGame,
    trace: &LearningTrace,
    poly: &DeviationPolytope,
    player: usize,
) -> Result<f64> {
    game.check_player(player)?;
    let index = game.profiles();
    let s = game.actions(player);
    let mut gradient = vec![0.0; s * s];
    let mut realized = 0.0;
    for r in &trace.rounds {
        for (g, c) in gradient
            .iter_mut()
            .zip(deviation_coefficients(index, game.utility(player), r.z.probs(), player))
        {
            *g += c;
        }
        realized += r.utilities[player];
    }
    Ok(hindsight_value(poly, &gradient)? - realized)
}

/// Least-squares slope of `log(max(regret, 1))` against `log t` over
/// checkpoints with `t >= from`.
pub fn regret_slope(trace: &LearningTrace, player: usize, from: usize) -> f64 {
    let points: Vec<(f64, f64)> = trace
        .checkpoints
        .iter()
        .filter(|c| c.t >= from)
        .map(|c| ((c.t as f64).ln(), c.players[player].regret.max(1.0).ln()))
        .collect();
    let k = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::apply_deviation;
    use crate::instances::random_marginal_instance;

    fn single_player() -> ConstrainedGame {
        ConstrainedGame::new(&[2], 1, vec![vec![1.0, 0.0]], vec![vec![vec![1.0, -1.0]]]).unwrap()
    }

    #[test]
    fn checkpoint_schedule() {
        assert_eq!(checkpoint_rounds(1), vec![1]);
        assert_eq!(checkpoint_rounds(8), vec![1, 2, 4, 8]);
        assert_eq!(checkpoint_rounds(10), vec![1, 2, 4, 8, 10]);
    }

    #[test]
    fn single_player_converges_to_boundary() {
        let g = single_player();
        let trace = run_dynamics(&g, &[DeviationPolytope::cce(0, 2)], 10_000, 0).unwrap();
        let u = dot(g.utility(0), trace.average.probs());
        assert!((u - 0.5).abs() < 0.02, "average utility {u}");
        for c in &trace.checkpoints {
            assert!(c.players[0].max_cost_residual <= 1e-9);
        }
    }

    #[test]
    fn constant_utilities_have_no_regret() {
        let g = ConstrainedGame::new(&[2, 3], 0, vec![vec![0.4; 6], vec![0.7; 6]], vec![vec![], vec![]]).unwrap();
        let polys = [DeviationPolytope::all(0, 2), DeviationPolytope::all(1, 3)];
        let trace = run_dynamics(&g, &polys, 64, 1).unwrap();
        for c in &trace.checkpoints {
            for p in &c.players {
                assert!(p.regret.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rounds_are_fixed_points_and_products() {
        let g = random_marginal_instance(2, 3, 1, 5).unwrap();
        let polys = [DeviationPolytope::cce(0, 3), DeviationPolytope::cce(1, 3)];
        let trace = run_dynamics(&g, &polys, 50, 5).unwrap();
        for r in &trace.rounds {
            for phi in &r.phis {
                let moved = apply_deviation(&g, &r.z, phi).unwrap();
                let err = moved.probs().iter().zip(r.z.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err <= 1e-9);
            }
            for i in 0..2 {
                assert!(r.costs[i][0] <= 1e-12);
            }
        }
    }

    #[test]
    fn regret_matches_external_recomputation() {
        let g = random_marginal_instance(2, 3, 2, 9).unwrap();
        let polys = [DeviationPolytope::cce(0, 3), DeviationPolytope::cce(1, 3)];
        let trace = run_dynamics(&g, &polys, 100, 9).unwrap();
        for i in 0..2 {
            let safe = fixed_safe_polytope(&g, &polys[i], i).unwrap();
            let direct = phi_regret(&g, &trace, &safe, i).unwrap();
            let last = trace.checkpoints.last().unwrap().players[i].regret;
            assert!((direct - last).abs() < 1e-7);
        }
    }

    #[test]
    fn identical_inputs_reproduce_the_trace() {
        let g = random_marginal_instance(2, 2, 1, 3).unwrap();
        let polys = [DeviationPolytope::cce(0, 2), DeviationPolytope::cce(1, 2)];
        let a = run_dynamics(&g, &polys, 40, 3).unwrap();
        let b = run_dynamics(&g, &polys, 40, 3).unwrap();
        assert_eq!(a.average, b.average);
        assert_eq!(
            serde_json::to_string(&a.checkpoints).unwrap(),
            serde_json::to_string(&b.checkpoints).unwrap()
        );
    }
}

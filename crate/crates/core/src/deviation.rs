//! Polytopes of deviation matrices and the marginal-cost reduction.
//!
//! A deviation set is described by linear rows `sum_{b,a} M[b,a] phi[b,a] <= d`
//! on top of the implicit row-stochastic constraints (`phi >= 0`, rows sum
//! to one). Equalities are stored as pairs of opposite inequalities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ConstrainedGame, Deviation, FEASIBILITY_TOL};
use crate::numeric::lp::Constraint;
use crate::numeric::vertices::enumerate_vertices;

/// Upper limit on the number of rows a custom polytope may carry.
pub const MAX_CUSTOM_ROWS: usize = 10_000;

const MARGINAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PolytopePreset {
    /// Every row-stochastic matrix (constrained correlated equilibria).
    All,
    /// Matrices with identical rows (constrained coarse correlated equilibria).
    Cce,
    /// Rows supplied by the caller.
    Custom,
}

impl std::str::FromStr for PolytopePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ALL" => Ok(Self::All),
            "CCE" => Ok(Self::Cce),
            "CUSTOM" => Ok(Self::Custom),
            other => Err(Error::InvalidInput(format!("unknown deviation preset {other:?}"))),
        }
    }
}

/// `sum_{b,a} coeffs[b * s + a] * phi[b, a] <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolytopeRow {
    pub coeffs: Vec<f64>,
    pub bound: f64,
}

impl PolytopeRow {
    pub fn eval(&self, phi: &[f64]) -> f64 {
        self.coeffs.iter().zip(phi).map(|(m, p)| m * p).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationPolytope {
    owner: usize,
    size: usize,
    preset: PolytopePreset,
    rows: Vec<PolytopeRow>,
}

impl DeviationPolytope {
    pub fn preset(owner: usize, size: usize, preset: PolytopePreset) -> Self {
        let mut rows = Vec::new();
        if preset == PolytopePreset::Cce {
            // phi[b, a] = phi[b - 1, a], chained over consecutive rows.
            for b in 1..size {
                for a in 0..size {
                    let mut coeffs = vec![0.0; size * size];
                    coeffs[b * size + a] = 1.0;
                    coeffs[(b - 1) * size + a] = -1.0;
                    let negated = coeffs.iter().map(|c| -c).collect();
                    rows.push(PolytopeRow { coeffs, bound: 0.0 });
                    rows.push(PolytopeRow {
                        coeffs: negated,
                        bound: 0.0,
                    });
                }
            }
        }
        Self {
            owner,
            size,
            preset,
            rows,
        }
    }

    pub fn all(owner: usize, size: usize) -> Self {
        Self::preset(owner, size, PolytopePreset::All)
    }

    pub fn cce(owner: usize, size: usize) -> Self {
        Self::preset(owner, size, PolytopePreset::Cce)
    }

    pub fn custom(owner: usize, size: usize, rows: Vec<PolytopeRow>) -> Result<Self> {
        if rows.len() > MAX_CUSTOM_ROWS {
            return Err(Error::InvalidInput(format!(
                "custom polytope of player {owner} has {} rows (cap {MAX_CUSTOM_ROWS})",
                rows.len()
            )));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.coeffs.len() != size * size {
                return Err(Error::Dimension {
                    what: format!("row {r} of the custom polytope of player {owner}"),
                    expected: size * size,
                    found: row.coeffs.len(),
                });
            }
            if !row.bound.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite(format!("custom polytope row {r}")));
            }
        }
        Ok(Self {
            owner,
            size,
            preset: PolytopePreset::Custom,
            rows,
        })
    }

    /// Same polytope intersected with extra rows; the preset tag is kept.
    pub fn with_rows(&self, extra: impl IntoIterator<Item = PolytopeRow>) -> Self {
        let mut out = self.clone();
        out.rows.extend(extra);
        out
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn preset_tag(&self) -> PolytopePreset {
        self.preset
    }

    pub fn rows(&self) -> &[PolytopeRow] {
        &self.rows
    }

    /// Largest violation over explicit rows, row sums and non-negativity.
    pub fn max_violation(&self, phi: &[f64]) -> f64 {
        let s = self.size;
        let mut worst: f64 = 0.0;
        for row in phi.chunks(s) {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        for &v in phi {
            worst = worst.max(-v);
        }
        for row in &self.rows {
            worst = worst.max(row.eval(phi) - row.bound);
        }
        worst
    }

    pub fn contains_entries(&self, phi: &[f64], tol: f64) -> bool {
        phi.len() == self.size * self.size && self.max_violation(phi) <= tol
    }

    /// Implicit equalities (row sums) and all inequalities including `-phi <= 0`.
    pub fn constraint_system(&self) -> (Vec<Constraint>, Vec<Constraint>) {
        let s = self.size;
        let equalities = (0..s)
            .map(|b| {
                let mut c = vec![0.0; s * s];
                c[b * s..(b + 1) * s].iter_mut().for_each(|v| *v = 1.0);
                Constraint::new(c, 1.0)
            })
            .collect();
        let mut inequalities: Vec<Constraint> = self
            .rows
            .iter()
            .map(|r| Constraint::new(r.coeffs.clone(), r.bound))
            .collect();
        for k in 0..s * s {
            let mut c = vec![0.0; s * s];
            c[k] = -1.0;
            inequalities.push(Constraint::new(c, 0.0));
        }
        (equalities, inequalities)
    }

    /// Vertices by brute-force enumeration; only viable for small sizes.
    pub fn vertices(&self, max_subsets: usize) -> Result<Vec<Deviation>> {
        let (eq, ineq) = self.constraint_system();
        enumerate_vertices(self.size * self.size, &eq, &ineq, 1e-9, max_subsets)?
            .into_iter()
            .map(|v| Deviation::new(self.owner, self.size, v))
            .collect()
    }
}

/// Membership of `phi` in `poly` within `tol`.
pub fn contains(poly: &DeviationPolytope, phi: &Deviation, tol: f64) -> bool {
    phi.owner() == poly.owner() && phi.size() == poly.size() && poly.contains_entries(phi.entries(), tol)
}

/// Per-constraint, per-own-action costs `c_{i,j}(a_i, .)` of a player whose
/// costs ignore the other players' actions.
pub fn marginal_costs(game: &ConstrainedGame, player: usize) -> Result<Vec<Vec<f64>>> {
    game.check_player(player)?;
    let index = game.profiles();
    let s = game.actions(player);
    let stride = index.stride(player);
    let mut out = Vec::with_capacity(game.constraints());
    for j in 0..game.constraints() {
        let cost = game.cost(player, j);
        let per_action: Vec<f64> = (0..s).map(|a| cost[a * stride]).collect();
        for (p, &value) in cost.iter().enumerate() {
            let a = index.action_of(p, player);
            if (value - per_action[a]).abs() > MARGINAL_TOL {
                return Err(Error::NotMarginal {
                    player,
                    constraint: j,
                    first: index.decode(a * stride),
                    second: index.decode(p),
                });
            }
        }
        out.push(per_action);
    }
    Ok(out)
}

/// Expected costs of player `player` after a coarse deviation `phi`, which on
/// marginal-cost games do not depend on the correlated strategy.
pub fn tilde_cost(game: &ConstrainedGame, player: usize, phi: &Deviation) -> Result<Vec<f64>> {
    game.check_deviation(phi)?;
    if phi.owner() != player {
        return Err(Error::InvalidInput(format!(
            "deviation of player {} passed for player {player}",
            phi.owner()
        )));
    }
    let costs = marginal_costs(game, player)?;
    let h = phi.row(0);
    if (1..phi.size()).any(|b| phi.row(b).iter().zip(h).any(|(x, y)| (x - y).abs() > FEASIBILITY_TOL)) {
        return Err(Error::InvalidInput(
            "tilde cost needs a deviation with identical rows".into(),
        ));
    }
    Ok(costs
        .iter()
        .map(|c| c.iter().zip(h).map(|(c, p)| c * p).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{apply_deviation, expected_costs, CorrelatedStrategy};

    #[test]
    fn all_preset_vertices_are_deterministic_maps() {
        let v = DeviationPolytope::all(0, 2).vertices(10_000).unwrap();
        assert_eq!(v.len(), 4);
        for phi in v {
            assert!(phi.entries().iter().all(|&x| x.abs() < 1e-12 || (x - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn cce_preset_vertices_are_constant_rows() {
        let v = DeviationPolytope::cce(0, 2).vertices(10_000).unwrap();
        assert_eq!(v.len(), 2);
        for phi in &v {
            for (a, b) in phi.row(0).iter().zip(phi.row(1)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let single = DeviationPolytope::cce(0, 1).vertices(10).unwrap();
        assert_eq!(single, vec![Deviation::identity(0, 1)]);
    }

    #[test]
    fn membership() {
        let all = DeviationPolytope::all(0, 2);
        let cce = DeviationPolytope::cce(0, 2);
        let id = Deviation::identity(0, 2);
        assert!(contains(&all, &id, 1e-9));
        assert!(!contains(&cce, &id, 1e-9));
        assert!(!all.contains_entries(&[0.9, 0.0, 0.0, 1.0], 1e-9));
        let constant = Deviation::constant_rows(0, &[0.3, 0.7]).unwrap();
        assert!(contains(&cce, &constant, 1e-9) && contains(&all, &constant, 1e-9));
    }

    #[test]
    fn custom_rows_are_capped() {
        let rows = vec![
            PolytopeRow {
                coeffs: vec![0.0; 4],
                bound: 1.0
            };
            MAX_CUSTOM_ROWS + 1
        ];
        assert!(DeviationPolytope::custom(0, 2, rows).is_err());
    }

    fn marginal_game() -> ConstrainedGame {
        // Player 0 costs depend on own action only; player 1 costs do not.
        ConstrainedGame::new(
            &[2, 3],
            1,
            vec![vec![0.5; 6], vec![0.5; 6]],
            vec![
                vec![vec![0.2, 0.2, 0.2, -0.4, -0.4, -0.4]],
                vec![vec![0.1, 0.0, 0.0, 0.0, 0.0, 0.0]],
            ],
        )
        .unwrap()
    }

    #[test]
    fn tilde_cost_matches_deviated_costs() {
        let game = marginal_game();
        let h = [0.25, 0.75];
        let phi = Deviation::constant_rows(0, &h).unwrap();
        let c = tilde_cost(&game, 0, &phi).unwrap();
        assert!((c[0] - (0.25 * 0.2 - 0.75 * 0.4)).abs() < 1e-15);
        let z = CorrelatedStrategy::new(vec![0.1, 0.2, 0.05, 0.3, 0.15, 0.2]).unwrap();
        let direct = expected_costs(&game, &apply_deviation(&game, &z, &phi).unwrap(), 0).unwrap();
        assert!((direct[0] - c[0]).abs() < 1e-12);
        let point = Deviation::constant_rows(0, &[0.0, 1.0]).unwrap();
        assert_eq!(tilde_cost(&game, 0, &point).unwrap(), vec![-0.4]);
    }

    #[test]
    fn non_marginal_costs_are_reported_with_witness() {
        let game = marginal_game();
        let phi = Deviation::constant_rows(1, &[1.0, 0.0, 0.0]).unwrap();
        match tilde_cost(&game, 1, &phi) {
            Err(Error::NotMarginal { first, second, .. }) => {
                assert_eq!(first[1], second[1]);
                assert_ne!(first, second);
            }
            other => panic!("expected NotMarginal, got {other:?}"),
        }
    }

    #[test]
    fn tilde_cost_rejects_non_constant_rows() {
        let game = marginal_game();
        assert!(tilde_cost(&game, 0, &Deviation::identity(0, 2)).is_err());
    }
}

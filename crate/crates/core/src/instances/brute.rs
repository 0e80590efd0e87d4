//! Grid brute-force oracles used to validate the solvers.
//!
//! [`brute_oracle`] maximizes a linear objective over grid strategies
//! `z = n / k` (non-negative integers `n` summing to `k`) that verify as
//! constrained epsilon-equilibria. The search is a depth-first enumeration of
//! compositions of `k` with exact pruning: a subtree is skipped only when the
//! linear relaxation of what remains is infeasible or cannot beat the
//! incumbent, so the result equals that of full enumeration. Every accepted
//! point is confirmed by the verifier.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::deviation::{marginal_costs, DeviationPolytope, PolytopePreset};
use crate::error::{Error, Result};
use crate::game::{ConstrainedGame, CorrelatedStrategy, Deviation, FEASIBILITY_TOL, GAP_TOL};
use crate::numeric::lp::{lp_solve, Constraint, LinearProgram};
use crate::numeric::vertices::enumerate_vertices;
use crate::special::{check_fixed_safe_set, incentive_row};
use crate::verifier::{check_polys, verify};

/// Nodes explored before a search gives up and reports a partial result.
pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;

const VERTEX_SUBSET_CAP: usize = 2_000_000;
const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteOptions {
    pub grid: usize,
    pub epsilon: f64,
    pub node_budget: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteResult {
    /// Best objective value found, `None` when no grid point qualifies.
    pub value: Option<f64>,
    pub strategy: Option<CorrelatedStrategy>,
    /// False when the node budget ran out before the grid was covered.
    pub exhaustive: bool,
    pub nodes: u64,
    /// Whether incentive constraints were linear (fixed safe sets).
    pub linear_incentives: bool,
}

pub fn brute_oracle(
    game: &ConstrainedGame,
    polys: &[DeviationPolytope],
    objective: &[f64],
    grid: usize,
    epsilon: f64,
) -> Result<BruteResult> {
    brute_oracle_with(
        game,
        polys,
        objective,
        BruteOptions {
            grid,
            epsilon,
            node_budget: DEFAULT_NODE_BUDGET,
        },
    )
}

/// Vertices of a player's safe deviation set when it does not depend on `z`.
/// `None` means the set has no usable finite description here.
fn fixed_safe_vertices(
    game: &ConstrainedGame,
    poly: &DeviationPolytope,
    player: usize,
) -> Result<Option<Vec<Deviation>>> {
    let s = game.actions(player);
    if s == 1 {
        return Ok(Some(vec![Deviation::identity(player, 1)]));
    }
    if game.constraints() == 0 {
        return Ok(match poly.preset_tag() {
            PolytopePreset::All if s <= 6 => Some(deterministic_maps(player, s)),
            PolytopePreset::Cce if poly.rows().len() == 2 * s * (s - 1) => Some(
                (0..s)
                    .map(|a| Deviation::constant_rows(player, &unit(s, a)))
                    .collect::<Result<_>>()?,
            ),
            _ => poly.vertices(VERTEX_SUBSET_CAP).ok(),
        });
    }
    // Coarse deviations with own-action costs: work with the common row h.
    let costs = marginal_costs(game, player)?;
    let mut ineq: Vec<Constraint> = (0..s)
        .map(|a| {
            let mut c = vec![0.0; s];
            c[a] = -1.0;
            Constraint::new(c, 0.0)
        })
        .collect();
    ineq.extend(costs.iter().map(|c| Constraint::new(c.clone(), 0.0)));
    for row in poly.rows() {
        let folded: Vec<f64> = (0..s).map(|a| (0..s).map(|b| row.coeffs[b * s + a]).sum()).collect();
        if folded.iter().any(|v| v.abs() > 0.0) || row.bound < 0.0 {
            ineq.push(Constraint::new(folded, row.bound));
        }
    }
    let simplex = [Constraint::new(vec![1.0; s], 1.0)];
    let hs = match enumerate_vertices(s, &simplex, &ineq, 1e-12, VERTEX_SUBSET_CAP) {
        Ok(v) => v,
        Err(_) => return Ok(None),
    };
    Ok(Some(
        hs.iter()
            .map(|h| Deviation::constant_rows(player, h))
            .collect::<Result<_>>()?,
    ))
}

fn unit(s: usize, a: usize) -> Vec<f64> {
    let mut v = vec![0.0; s];
    v[a] = 1.0;
    v
}

fn deterministic_maps(player: usize, s: usize) -> Vec<Deviation> {
    let total = s.pow(s as u32);
    (0..total)
        .map(|mut code| {
            let mut phi = vec![0.0; s * s];
            for b in 0..s {
                phi[b * s + code % s] = 1.0;
                code /= s;
            }
            Deviation::new(player, s, phi).expect("deterministic map is row-stochastic")
        })
        .collect()
}

/// One linear row `coeffs . n <= rhs` on grid counts.
struct Row {
    coeffs: Vec<f64>,
    rhs: f64,
}

struct Search<'a> {
    game: &'a ConstrainedGame,
    polys: &'a [DeviationPolytope],
    objective: &'a [f64],
    rows: Vec<Row>,
    parts: usize,
    grid: usize,
    epsilon: f64,
    budget: u64,
    nodes: AtomicU64,
    incumbent: AtomicU64,
    aborted: AtomicBool,
}

#[derive(Debug, Clone)]
struct Best {
    value: f64,
    counts: Vec<usize>,
}

/// Relaxation of a node: coordinates `depth..` free, summing to `remaining`.
struct Relaxed {
    bound: f64,
    free: Vec<f64>,
}

impl Search<'_> {
    fn incumbent(&self) -> f64 {
        f64::from_bits(self.incumbent.load(Ordering::Relaxed))
    }

    fn raise_incumbent(&self, value: f64) {
        let mut current = self.incumbent.load(Ordering::Relaxed);
        while f64::from_bits(current) < value {
            match self.incumbent.compare_exchange_weak(
                current,
                value.to_bits(),
                Ordering::Relaxed,
                Ordering::Relaxed,
            ) {
                Ok(_) => break,
                Err(seen) => current = seen,
            }
        }
    }

    fn tick(&self) -> bool {
        if self.aborted.load(Ordering::Relaxed) {
            return false;
        }
        if self.nodes.fetch_add(1, Ordering::Relaxed) >= self.budget {
            self.aborted.store(true, Ordering::Relaxed);
            return false;
        }
        true
    }

    fn relax(&self, depth: usize, remaining: usize, partial: &[f64], partial_obj: f64) -> Result<Option<Relaxed>> {
        let free = self.parts - depth;
        let r = remaining as f64;
        if free == 1 {
            let ok = self
                .rows
                .iter()
                .zip(partial)
                .all(|(row, acc)| acc + row.coeffs[depth] * r <= row.rhs);
            return Ok(ok.then(|| Relaxed {
                bound: (partial_obj + self.objective[depth] * r) / self.grid as f64,
                free: vec![r],
            }));
        }
        let mut lp = LinearProgram::maximize(self.objective[depth..].to_vec());
        lp.add_eq(vec![1.0; free], r);
        for (row, acc) in self.rows.iter().zip(partial) {
            lp.add_le(row.coeffs[depth..].to_vec(), row.rhs - acc);
        }
        let sol = lp_solve(&lp)?;
        if !sol.is_optimal() {
            return Ok(None);
        }
        Ok(Some(Relaxed {
            bound: (partial_obj + sol.objective) / self.grid as f64,
            free: sol.point,
        }))
    }

    fn strategy(&self, counts: &[usize]) -> Result<CorrelatedStrategy> {
        CorrelatedStrategy::new(counts.iter().map(|&c| c as f64 / self.grid as f64).collect())
    }

    fn leaf(&self, counts: &[usize], best: &mut Option<Best>) -> Result<()> {
        let value = counts
            .iter()
            .zip(self.objective)
            .map(|(&c, o)| c as f64 * o)
            .sum::<f64>()
            / self.grid as f64;
        if best.as_ref().is_some_and(|b| value <= b.value) || value < self.incumbent() - PRUNE_TOL {
            return Ok(());
        }
        let report = verify(self.game, self.polys, &self.strategy(counts)?, self.epsilon)?;
        if report.verdict {
            *best = Some(Best {
                value,
                counts: counts.to_vec(),
            });
            self.raise_incumbent(value);
        }
        Ok(())
    }

    fn visit(
        &self,
        depth: usize,
        remaining: usize,
        counts: &mut Vec<usize>,
        partial: &[f64],
        partial_obj: f64,
        relaxed: &Relaxed,
        best: &mut Option<Best>,
    ) -> Result<()> {
        if depth + 1 == self.parts {
            counts.push(remaining);
            let out = self.leaf(counts, best);
            counts.pop();
            return out;
        }
        let centre = relaxed.free[0].clamp(0.0, remaining as f64);
        // The relaxation bound is concave in the count and peaks at `centre`,
        // so each direction stops at the first infeasible or dominated count.
        let up = (centre.ceil() as usize).min(remaining);
        let sides: [Box<dyn Iterator<Item = usize>>; 2] = [Box::new(up..=remaining), Box::new((0..up).rev())];
        for side in sides {
            for c in side {
                if !self.tick() {
                    return Ok(());
                }
                let child_partial: Vec<f64> = self
                    .rows
                    .iter()
                    .zip(partial)
                    .map(|(row, acc)| acc + row.coeffs[depth] * c as f64)
                    .collect();
                let child_obj = partial_obj + self.objective[depth] * c as f64;
                let Some(child) = self.relax(depth + 1, remaining - c, &child_partial, child_obj)? else {
                    break;
                };
                if child.bound < self.incumbent() - PRUNE_TOL
                    || best.as_ref().is_some_and(|b| child.bound < b.value - PRUNE_TOL)
                {
                    break;
                }
                counts.push(c);
                self.visit(depth + 1, remaining - c, counts, &child_partial, child_obj, &child, best)?;
                counts.pop();
            }
        }
        Ok(())
    }

    /// Explores the subtree where the first coordinate equals `first`.
    fn chunk(&self, first: usize) -> Result<Option<Best>> {
        let partial: Vec<f64> = self.rows.iter().map(|row| row.coeffs[0] * first as f64).collect();
        let obj = self.objective[0] * first as f64;
        let mut best = None;
        if !self.tick() {
            return Ok(None);
        }
        if self.parts == 1 {
            if first == self.grid {
                self.leaf(&[first], &mut best)?;
            }
            return Ok(best);
        }
        let remaining = self.grid - first;
        let Some(relaxed) = self.relax(1, remaining, &partial, obj)? else {
            return Ok(None);
        };
        if relaxed.bound < self.incumbent() - PRUNE_TOL {
            return Ok(None);
        }
        let mut counts = vec![first];
        self.visit(1, remaining, &mut counts, &partial, obj, &relaxed, &mut best)?;
        Ok(best)
    }
}

pub fn brute_oracle_with(
    game: &ConstrainedGame,
    polys: &[DeviationPolytope],
    objective: &[f64],
    opts: BruteOptions,
) -> Result<BruteResult> {
    check_polys(game, polys)?;
    let index = game.profiles();
    let parts = index.len();
    if objective.len() != parts {
        return Err(Error::Dimension {
            what: "objective coefficients".into(),
            expected: parts,
            found: objective.len(),
        });
    }
    if objective.iter().any(|v| !v.is_finite()) || !opts.epsilon.is_finite() {
        return Err(Error::NonFinite("brute oracle inputs".into()));
    }
    if opts.grid == 0 {
        return Err(Error::InvalidInput("grid resolution must be positive".into()));
    }
    let k = opts.grid as f64;

    let mut rows: Vec<Row> = Vec::new();
    for i in 0..game.players() {
        for j in 0..game.constraints() {
            rows.push(Row {
                coeffs: game.cost(i, j).to_vec(),
                rhs: FEASIBILITY_TOL * k,
            });
        }
    }
    let mut linear_incentives = false;
    if check_fixed_safe_set(game, polys).fixed {
        let mut per_player = Vec::new();
        for (i, poly) in polys.iter().enumerate() {
            match fixed_safe_vertices(game, poly, i)? {
                Some(v) if v.is_empty() => {
                    return Ok(BruteResult {
                        value: None,
                        strategy: None,
                        exhaustive: true,
                        nodes: 0,
                        linear_incentives: true,
                    })
                }
                Some(v) => per_player.push(v),
                None => break,
            }
        }
        if per_player.len() == game.players() {
            linear_incentives = true;
            for (i, vertices) in per_player.iter().enumerate() {
                for phi in vertices {
                    let coeffs = incentive_row(index, game.utility(i), phi);
                    if coeffs.iter().any(|c| c.abs() > 0.0) {
                        rows.push(Row {
                            coeffs,
                            rhs: (opts.epsilon + GAP_TOL) * k,
                        });
                    }
                }
            }
        }
    }

    let search = Search {
        game,
        polys,
        objective,
        rows,
        parts,
        grid: opts.grid,
        epsilon: opts.epsilon,
        budget: opts.node_budget,
        nodes: AtomicU64::new(0),
        incumbent: AtomicU64::new(f64::NEG_INFINITY.to_bits()),
        aborted: AtomicBool::new(false),
    };

    // Dive into the chunk the root relaxation favours first, so the parallel
    // sweep starts from a good incumbent.
    let root = search.relax(0, opts.grid, &vec![0.0; search.rows.len()], 0.0)?;
    let Some(root) = root else {
        return Ok(BruteResult {
            value: None,
            strategy: None,
            exhaustive: true,
            nodes: 1,
            linear_incentives,
        });
    };
    let first = (root.free[0].round() as usize).min(opts.grid);
    let seeded = search.chunk(first)?;
    let others: Vec<(usize, Option<Best>)> = (0..=opts.grid)
        .into_par_iter()
        .filter(|&c| c != first)
        .map(|c| search.chunk(c).map(|b| (c, b)))
        .collect::<Result<_>>()?;

    let mut best: Option<(usize, Best)> = seeded.map(|b| (first, b));
    for (c, candidate) in others {
        let Some(candidate) = candidate else { continue };
        let better = match &best {
            None => true,
            Some((bc, b)) => candidate.value > b.value || (candidate.value == b.value && c < *bc),
        };
        if better {
            best = Some((c, candidate));
        }
    }
    let strategy = best.as_ref().map(|(_, b)| search.strategy(&b.counts)).transpose()?;
    Ok(BruteResult {
        value: best.map(|(_, b)| b.value),
        strategy,
        exhaustive: !search.aborted.load(Ordering::Relaxed),
        nodes: search.nodes.load(Ordering::Relaxed),
        linear_incentives,
    })
}

/// Best product strategy on a grid for games where every player has two actions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductSearch {
    /// Probability each player puts on its first action.
    pub first_action: Vec<f64>,
    pub strategy: CorrelatedStrategy,
    pub max_gap: f64,
    pub safe_points: usize,
}

/// Minimizes the largest incentive gap over safe product strategies
/// `x_i = (j / steps, 1 - j / steps)`. `None` when no grid point is safe.
pub fn product_grid_search(
    game: &ConstrainedGame,
    polys: &[DeviationPolytope],
    steps: usize,
) -> Result<Option<ProductSearch>> {
    check_polys(game, polys)?;
    if game.action_counts().iter().any(|&s| s != 2) {
        return Err(Error::InvalidInput("product grid search needs two actions per player".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be positive".into()));
    }
    let n = game.players();
    let total = (steps + 1).pow(n as u32);
    let evaluated: Vec<Option<ProductSearch>> = (0..total)
        .into_par_iter()
        .map(|mut code| {
            let first_action: Vec<f64> = (0..n)
                .map(|_| {
                    let j = code % (steps + 1);
                    code /= steps + 1;
                    j as f64 / steps as f64
                })
                .collect();
            let marginals: Vec<Vec<f64>> = first_action.iter().map(|&p| vec![p, 1.0 - p]).collect();
            let z = CorrelatedStrategy::product(game.profiles(), &marginals)?;
            let safety = crate::game::is_safe(game, &z, FEASIBILITY_TOL)?;
            if !safety.safe {
                return Ok(None);
            }
            let report = verify(game, polys, &z, 0.0)?;
            Ok(Some(ProductSearch {
                first_action,
                strategy: z,
                max_gap: report.max_gap,
                safe_points: 1,
            }))
        })
        .collect::<Result<_>>()?;
    let safe_points = evaluated.iter().flatten().count();
    let best = evaluated
        .into_iter()
        .flatten()
        .fold(None::<ProductSearch>, |acc, p| match acc {
            Some(a) if a.max_gap <= p.max_gap => Some(a),
            _ => Some(p),
        });
    Ok(best.map(|mut b| {
        b.safe_points = safe_points;
        b
    }))
}

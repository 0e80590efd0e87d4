//! Cross-module property checks and the acceptance criteria, shared by the
//! `acceptance` test target and `ccg selftest`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::deviation::{contains, marginal_costs, DeviationPolytope};
use crate::error::Result;
use crate::game::{
    apply_deviation, deviation_coefficients, dot, expected_costs, expected_utility, is_safe, ConstrainedGame,
    CorrelatedStrategy, Deviation, ProfileIndex,
};
use crate::instances::{
    brute_oracle, completeness_strategy, example1, hardness_gadget, product_grid_search, random_marginal_game,
    random_objective, random_safe_game, GadgetParams, GraphInstance,
};
use crate::learning::{run_dynamics, regret_slope, LearningTrace};
use crate::numeric::lp::{lp_solve, Constraint, LinearProgram};
use crate::numeric::{enumerate_vertices, project_onto, stationary_residual};
use crate::oracle::{best_safe_deviation, strict_feasibility};
use crate::special::{fixed_safe_polytope, solve_special, LinearObjective};
use crate::verifier::{expectation_ic, verify};

/// Outcome of one named check.
#[derive(Debug, Clone, Serialize)]
pub struct CaseOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CaseOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {} ({:.2}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub cases: Vec<CaseOutcome>,
}

impl Summary {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }
}

fn timed(name: &str, limit: Option<Duration>, f: impl FnOnce() -> Result<(bool, String)>) -> CaseOutcome {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match result {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = limit {
        if elapsed > limit {
            passed = false;
            detail.push_str(&format!("; runtime {:.1}s exceeds {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()));
        }
    }
    CaseOutcome {
        name: name.to_string(),
        passed,
        detail,
        seconds: elapsed.as_secs_f64(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_distribution(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    // Exponential spacings give a uniform point on the simplex.
    let raw: Vec<f64> = (0..len).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

fn random_strategy(rng: &mut ChaCha8Rng, len: usize) -> CorrelatedStrategy {
    CorrelatedStrategy::new(random_distribution(rng, len)).expect("valid distribution")
}

fn random_deviation(rng: &mut ChaCha8Rng, owner: usize, s: usize) -> Deviation {
    let rows: Vec<Vec<f64>> = (0..s).map(|_| random_distribution(rng, s)).collect();
    Deviation::from_rows(owner, &rows).expect("valid rows")
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn presets(game: &ConstrainedGame, cce: bool) -> Vec<DeviationPolytope> {
    (0..game.players())
        .map(|i| {
            if cce {
                DeviationPolytope::cce(i, game.actions(i))
            } else {
                DeviationPolytope::all(i, game.actions(i))
            }
        })
        .collect()
}

/// Action counts and constraint count of the solver-versus-oracle corpus.
pub fn solver_corpus_shape(k: u64) -> (Vec<usize>, usize) {
    let k = k as usize;
    (vec![2 + k % 3, 2 + (k / 3) % 3], 1 + k % 2)
}

// ---------------------------------------------------------------------------
// Acceptance criteria
// ---------------------------------------------------------------------------

/// Example numbers: two equilibria whose midpoint is not one.
pub fn criterion_example() -> CaseOutcome {
    timed("1 example reproduction", Some(Duration::from_secs(1)), || {
        let ex = example1();
        let polys = presets(&ex.game, false);
        let r1 = verify(&ex.game, &polys, &ex.z1, 0.0)?;
        let r2 = verify(&ex.game, &polys, &ex.z2, 0.0)?;
        let r3 = verify(&ex.game, &polys, &ex.z3, 0.0)?;
        let deviated = apply_deviation(&ex.game, &ex.z3, &ex.phi2)?;
        let u = expected_utility(&ex.game, &deviated, 1)?;
        let c = expected_costs(&ex.game, &deviated, 1)?[0];
        let passed = r1.verdict
            && r1.max_gap <= 1e-6
            && r2.verdict
            && r2.max_gap <= 1e-6
            && !r3.verdict
            && (r3.gap(1) - 1.0 / 3.0).abs() <= 1e-6
            && (u - 0.5).abs() <= 1e-9
            && c.abs() <= 1e-9;
        Ok((
            passed,
            format!(
                "gaps z1 {:.2e}, z2 {:.2e}; z3 player-1 gap {:.9}; u(phi.z3) = {u}; c(phi.z3) = {c}",
                r1.max_gap,
                r2.max_gap,
                r3.gap(1)
            ),
        ))
    })
}

/// Incentive compatibility in expectation holds while the average fails.
pub fn criterion_expectation() -> CaseOutcome {
    timed("2 expectation-IC weakness", Some(Duration::from_secs(1)), || {
        let ex = example1();
        let polys = presets(&ex.game, false);
        let mu = [(0.5, ex.z1.clone()), (0.5, ex.z2.clone())];
        let e = expectation_ic(&ex.game, &polys, &mu, 0.0)?;
        let average = ex.z1.mix(&ex.z2, 0.5)?;
        let r = verify(&ex.game, &polys, &average, 0.0)?;
        let passed = e.expected_gaps.iter().all(|&g| g <= 1e-6) && r.max_gap >= 1.0 / 3.0 - 1e-6;
        Ok((
            passed,
            format!("expected gaps {:?}; gap of the average {:.9}", e.expected_gaps, r.max_gap),
        ))
    })
}

/// Result of comparing the cutting-plane solver with the grid oracle on one instance.
#[derive(Debug, Clone, Serialize)]
pub struct SolverComparison {
    pub seed: u64,
    pub actions: Vec<usize>,
    pub constraints: usize,
    pub solver: f64,
    pub oracle: Option<f64>,
    pub exhaustive: bool,
    pub gap: f64,
    pub residual: f64,
}

pub fn compare_solver_with_oracle(seed: u64, grid: usize) -> Result<SolverComparison> {
    let (actions, m) = solver_corpus_shape(seed);
    let game = random_marginal_game(&actions, m, 1000 + seed)?;
    let polys = presets(&game, true);
    let objective = LinearObjective::welfare(&game);
    let solved = solve_special(&game, &polys, &objective)?;
    let check = verify(&game, &polys, &solved.strategy, 0.0)?;
    let oracle = brute_oracle(&game, &polys, &objective.coefficients, grid, 1e-3)?;
    Ok(SolverComparison {
        seed,
        actions,
        constraints: m,
        solver: solved.objective,
        oracle: oracle.value,
        exhaustive: oracle.exhaustive,
        gap: check.max_gap,
        residual: check.safety.max_residual,
    })
}

pub fn criterion_special_solver(seed: u64) -> CaseOutcome {
    timed("3 special solver vs grid oracle", Some(Duration::from_secs(180)), || {
        let rows: Vec<SolverComparison> = (0..20u64)
            .into_par_iter()
            .map(|k| compare_solver_with_oracle(seed.wrapping_mul(100) + k, 200))
            .collect::<Result<_>>()?;
        let mut failures = Vec::new();
        let mut worst_margin = f64::INFINITY;
        for r in &rows {
            let margin = r.oracle.map_or(f64::INFINITY, |o| r.solver - (o - 2e-2));
            worst_margin = worst_margin.min(margin);
            if !(r.exhaustive && margin >= 0.0 && r.gap <= 1e-6 && r.residual <= 1e-9) {
                failures.push(format!("{r:?}"));
            }
        }
        Ok((
            failures.is_empty(),
            format!(
                "20 instances; min(solver - oracle + 0.02) = {worst_margin:.4}; max gap {:.2e}; failures: {failures:?}",
                rows.iter().map(|r| r.gap).fold(0.0, f64::max)
            ),
        ))
    })
}

/// Marginal-cost instances used by the learning checks.
pub fn learning_instance(seed: u64, k: u64) -> Result<ConstrainedGame> {
    let shapes = [vec![2, 2], vec![2, 3], vec![3, 3], vec![3, 2], vec![2, 2, 2]];
    let k = k as usize;
    random_marginal_game(&shapes[k % shapes.len()], 1 + k % 2, 2000 + seed * 10 + k as u64)
}

#[derive(Debug, Clone, Serialize)]
pub struct LearningCheck {
    pub worst_residual: f64,
    pub failed_checkpoints: Vec<usize>,
    pub slopes: Vec<f64>,
}

pub fn check_learning_run(game: &ConstrainedGame, trace: &LearningTrace) -> Result<LearningCheck> {
    let polys = presets(game, true);
    let mut worst_residual = f64::NEG_INFINITY;
    let mut failed = Vec::new();
    for c in &trace.checkpoints {
        let residual = c.players.iter().map(|p| p.max_cost_residual).fold(f64::NEG_INFINITY, f64::max);
        worst_residual = worst_residual.max(residual);
        let eps = c.players.iter().map(|p| p.gap_bound).fold(0.0, f64::max);
        let report = verify(game, &polys, &c.average, eps)?;
        if residual > 1e-9 || !report.verdict {
            failed.push(c.t);
        }
    }
    let slopes = (0..game.players()).map(|i| regret_slope(trace, i, 1 << 8)).collect();
    Ok(LearningCheck {
        worst_residual,
        failed_checkpoints: failed,
        slopes,
    })
}

pub fn criterion_learning(seed: u64) -> CaseOutcome {
    timed("4 learning convergence", Some(Duration::from_secs(300)), || {
        let horizon = 1 << 14;
        let checks: Vec<LearningCheck> = (0..5u64)
            .into_par_iter()
            .map(|k| {
                let game = learning_instance(seed, k)?;
                let trace = run_dynamics(&game, &presets(&game, true), horizon, seed + k)?;
                check_learning_run(&game, &trace)
            })
            .collect::<Result<_>>()?;
        let passed = checks
            .iter()
            .all(|c| c.worst_residual <= 1e-9 && c.failed_checkpoints.is_empty() && c.slopes.iter().all(|&s| s <= 0.6));
        let detail = checks
            .iter()
            .map(|c| {
                format!(
                    "residual {:.1e}, failed checkpoints {:?}, slopes {:?}",
                    c.worst_residual,
                    c.failed_checkpoints,
                    c.slopes.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>()
                )
            })
            .collect::<Vec<_>>()
            .join(" | ");
        Ok((passed, detail))
    })
}

/// Largest fixed-point errors `(|phi <> z - z|, |phi^T x - x|)` over sampled rounds.
pub fn fixed_point_errors(game: &ConstrainedGame, trace: &LearningTrace, samples: &[usize]) -> Result<(f64, f64)> {
    let mut deviation_err: f64 = 0.0;
    let mut stationary_err: f64 = 0.0;
    for &t in samples {
        let round = &trace.rounds[t];
        for (phi, x) in round.phis.iter().zip(&round.marginals) {
            let moved = apply_deviation(game, &round.z, phi)?;
            deviation_err = deviation_err.max(max_abs_diff(moved.probs(), round.z.probs()));
            stationary_err = stationary_err.max(stationary_residual(phi.size(), phi.entries(), x));
        }
    }
    Ok((deviation_err, stationary_err))
}

pub fn criterion_fixed_points(seed: u64) -> CaseOutcome {
    timed("5 fixed-point fidelity", None, || {
        let mut r = rng(seed ^ 5);
        // Unconstrained games with every deviation allowed exercise general
        // (non-constant) matrices; coarse runs exercise the constrained case.
        let mut worst = (0.0f64, 0.0f64);
        let mut sampled = 0;
        for k in 0..4u64 {
            let game = if k % 2 == 0 {
                let g = random_marginal_game(&[3, 3], 0, 3000 + seed + k)?;
                (g.clone(), presets(&g, false))
            } else {
                let g = learning_instance(seed, k)?;
                (g.clone(), presets(&g, true))
            };
            let trace = run_dynamics(&game.0, &game.1, 2000, seed + k)?;
            let samples: Vec<usize> = (0..25).map(|_| r.random_range(0..trace.horizon())).collect();
            let (a, b) = fixed_point_errors(&game.0, &trace, &samples)?;
            worst = (worst.0.max(a), worst.1.max(b));
            sampled += samples.len();
        }
        Ok((
            worst.0 <= 1e-9 && worst.1 <= 1e-10,
            format!("{sampled} rounds; max |phi.z - z| = {:.2e}, max |phi^T x - x| = {:.2e}", worst.0, worst.1),
        ))
    })
}

/// Eight-cycle with the even vertices as independent set.
pub fn gadget_graph() -> GraphInstance {
    let edges: Vec<(usize, usize)> = (0..8).map(|v| (v, (v + 1) % 8)).collect();
    GraphInstance::new(8, &edges)
        .and_then(|g| g.with_independent_set(vec![0, 2, 4, 6]))
        .expect("cycle graph is valid")
}

pub fn criterion_gadget() -> CaseOutcome {
    timed("6 hardness gadget completeness", Some(Duration::from_secs(10)), || {
        let graph = gadget_graph();
        let params = GadgetParams {
            alpha: 0.5,
            delta: 1.0 / 3.0,
        };
        let game = hardness_gadget(&graph, &params)?;
        let z = completeness_strategy(&graph, &params, graph.independent_set().unwrap_or_default())?;
        let report = verify(&game, &presets(&game, false), &z, 0.0)?;
        let welfare: f64 = (0..2).map(|i| dot(game.utility(i), z.probs())).sum();
        let passed = report.verdict
            && report.max_gap <= 1e-6
            && report.safety.max_residual <= 1e-9
            && welfare >= 1.0 - 1e-9;
        Ok((
            passed,
            format!(
                "max gap {:.2e}, safety residual {:.2e}, welfare {welfare:.6}",
                report.max_gap, report.safety.max_residual
            ),
        ))
    })
}

pub fn criterion_convexity(seed: u64) -> CaseOutcome {
    timed("7 convexity with fixed safe sets", None, || {
        let eps = 1e-3;
        let per_instance: Vec<(usize, usize, f64)> = (0..10u64)
            .into_par_iter()
            .map(|k| {
                let (actions, m) = solver_corpus_shape(k);
                let game = random_marginal_game(&actions, m, 4000 + seed * 10 + k)?;
                let polys = presets(&game, true);
                let len = game.profiles().len();
                let mut equilibria = Vec::new();
                for e in 0..5u64 {
                    let obj = LinearObjective::new(random_objective(len, seed * 100 + k * 10 + e))?;
                    let z = solve_special(&game, &polys, &obj)?.strategy;
                    if verify(&game, &polys, &z, eps)?.verdict {
                        equilibria.push(z);
                    }
                }
                let mut checked = 0;
                let mut failed = 0;
                let mut worst: f64 = 0.0;
                for a in 0..equilibria.len() {
                    for b in a + 1..equilibria.len() {
                        let mid = equilibria[a].mix(&equilibria[b], 0.5)?;
                        let r = verify(&game, &polys, &mid, eps)?;
                        checked += 1;
                        worst = worst.max(r.max_gap);
                        if !r.verdict {
                            failed += 1;
                        }
                    }
                }
                Ok((checked, failed, worst))
            })
            .collect::<Result<_>>()?;
        let checked: usize = per_instance.iter().map(|r| r.0).sum();
        let failed: usize = per_instance.iter().map(|r| r.1).sum();
        let worst = per_instance.iter().map(|r| r.2).fold(0.0, f64::max);
        Ok((
            checked >= 100 && failed == 0,
            format!("{checked} midpoints, {failed} failed, largest gap {worst:.2e}"),
        ))
    })
}

pub fn criterion_marginal_invariance(seed: u64) -> CaseOutcome {
    timed("8 marginal-cost invariance", None, || {
        let mut r = rng(seed ^ 8);
        let mut worst: f64 = 0.0;
        for k in 0..1000u64 {
            let actions: Vec<usize> = (0..2 + (k % 2) as usize).map(|_| r.random_range(1..=4)).collect();
            let game = random_marginal_game(&actions, 1 + (k % 3) as usize, 5000 + seed * 1000 + k)?;
            let i = r.random_range(0..game.players());
            let s = game.actions(i);
            let phi = Deviation::constant_rows(i, &random_distribution(&mut r, s))?;
            let len = game.profiles().len();
            let z = random_strategy(&mut r, len);
            let z2 = random_strategy(&mut r, len);
            let c1 = expected_costs(&game, &apply_deviation(&game, &z, &phi)?, i)?;
            let c2 = expected_costs(&game, &apply_deviation(&game, &z2, &phi)?, i)?;
            worst = worst.max(max_abs_diff(&c1, &c2));
        }
        Ok((worst <= 1e-12, format!("1000 triples, max difference {worst:.2e}")))
    })
}

pub fn criterion_existence(seed: u64) -> CaseOutcome {
    timed("9 existence smoke test", None, || {
        let mut lines = Vec::new();
        let mut passed = true;
        let mut r = rng(seed ^ 9);
        for k in 0..10u64 {
            let game = random_safe_game(&[2, 2], 1, 0.1, 6000 + seed * 10 + k)?;
            let polys = presets(&game, false);
            let mut rho = f64::INFINITY;
            for _ in 0..20 {
                let z = random_strategy(&mut r, 4);
                for i in 0..2 {
                    rho = rho.min(strict_feasibility(&game, &polys[i], &z, i)?.rho);
                }
            }
            let search = product_grid_search(&game, &polys, 100)?;
            let gap = search.as_ref().map_or(f64::INFINITY, |s| s.max_gap);
            passed &= rho >= 0.1 - 1e-12 && gap <= 0.02;
            lines.push(format!("rho {rho:.3} gap {gap:.2e}"));
        }
        Ok((passed, lines.join("; ")))
    })
}

pub fn acceptance(seed: u64) -> Vec<CaseOutcome> {
    vec![
        criterion_example(),
        criterion_expectation(),
        criterion_special_solver(seed),
        criterion_learning(seed),
        criterion_fixed_points(seed),
        criterion_gadget(),
        criterion_convexity(seed),
        criterion_marginal_invariance(seed),
        criterion_existence(seed),
    ]
}

// ---------------------------------------------------------------------------
// Module properties
// ---------------------------------------------------------------------------

fn property_profile_index() -> CaseOutcome {
    timed("profile index round trip", None, || {
        let mut count = 0;
        for n in 1..=3usize {
            for s in 1..=5usize {
                let index = ProfileIndex::new(&vec![s; n])?;
                for p in 0..index.len() {
                    if index.encode(&index.decode(p)) != p {
                        return Ok((false, format!("index {p} of {n} players x {s} actions")));
                    }
                    count += 1;
                }
            }
        }
        Ok((true, format!("{count} indices")))
    })
}

fn property_deviation_algebra(seed: u64, samples: usize) -> CaseOutcome {
    timed("deviation simplex preservation, linearity, two-way payoffs", None, || {
        let mut r = rng(seed ^ 11);
        let mut worst_sum: f64 = 0.0;
        let mut worst_linear: f64 = 0.0;
        let mut worst_two_way: f64 = 0.0;
        for k in 0..samples {
            let actions: Vec<usize> = (0..1 + k % 3).map(|_| r.random_range(1..=4)).collect();
            let game = random_marginal_game(&actions, 1, seed + k as u64)?;
            let i = r.random_range(0..game.players());
            let s = game.actions(i);
            let z = random_strategy(&mut r, game.profiles().len());
            let phi = random_deviation(&mut r, i, s);
            let psi = random_deviation(&mut r, i, s);
            let alpha = r.random::<f64>();
            let moved = apply_deviation(&game, &z, &phi)?;
            worst_sum = worst_sum.max((moved.probs().iter().sum::<f64>() - 1.0).abs());
            let mixed = apply_deviation(&game, &z, &phi.mix(&psi, alpha)?)?;
            let other = apply_deviation(&game, &z, &psi)?;
            let combo: Vec<f64> = moved
                .probs()
                .iter()
                .zip(other.probs())
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect();
            worst_linear = worst_linear.max(max_abs_diff(mixed.probs(), &combo));
            let direct = expected_utility(&game, &moved, i)?;
            let pushed = dot(
                &deviation_coefficients(game.profiles(), game.utility(i), z.probs(), i),
                phi.entries(),
            );
            worst_two_way = worst_two_way.max((direct - pushed).abs());
        }
        Ok((
            worst_sum <= 1e-9 && worst_linear <= 1e-12 && worst_two_way <= 1e-12,
            format!("sum {worst_sum:.1e}, linearity {worst_linear:.1e}, two-way {worst_two_way:.1e}"),
        ))
    })
}

fn property_polytopes(seed: u64, samples: usize) -> CaseOutcome {
    timed("polytope convexity and CCE inside ALL", None, || {
        let mut r = rng(seed ^ 12);
        for _ in 0..samples {
            let s = r.random_range(1..=4);
            let cce = DeviationPolytope::cce(0, s);
            let all = DeviationPolytope::all(0, s);
            let h1 = Deviation::constant_rows(0, &random_distribution(&mut r, s))?;
            let h2 = Deviation::constant_rows(0, &random_distribution(&mut r, s))?;
            let mix = h1.mix(&h2, r.random::<f64>())?;
            if !(contains(&cce, &mix, 1e-9) && contains(&all, &mix, 1e-9) && contains(&all, &h1, 1e-9)) {
                return Ok((false, format!("membership failed for s = {s}")));
            }
        }
        Ok((true, format!("{samples} random pairs")))
    })
}

fn property_lp_against_vertices(seed: u64, samples: usize) -> CaseOutcome {
    timed("LP optimum matches vertex enumeration", None, || {
        let mut r = rng(seed ^ 13);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let dim = r.random_range(1..=4);
            let mut ineq: Vec<Constraint> = (0..dim)
                .map(|k| {
                    let mut c = vec![0.0; dim];
                    c[k] = -1.0;
                    Constraint::new(c, 0.0)
                })
                .collect();
            let mut lp = LinearProgram::maximize((0..dim).map(|_| r.random_range(-1.0..1.0)).collect());
            for _ in 0..r.random_range(1..=4) {
                let c: Vec<f64> = (0..dim).map(|_| r.random_range(0.1..1.0)).collect();
                let b = r.random_range(0.5..2.0);
                lp.add_le(c.clone(), b);
                ineq.push(Constraint::new(c, b));
            }
            let sol = lp_solve(&lp)?;
            let vertices = enumerate_vertices(dim, &[], &ineq, 1e-9, 1_000_000)?;
            let best = vertices
                .iter()
                .map(|v| dot(&lp.objective, v))
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max((sol.objective - best).abs());
        }
        Ok((worst <= 1e-7, format!("{samples} LPs, max difference {worst:.1e}")))
    })
}

fn property_projection(seed: u64, samples: usize) -> CaseOutcome {
    timed("projection lands in the polytope and is optimal", None, || {
        let mut r = rng(seed ^ 14);
        let mut worst_violation: f64 = 0.0;
        let mut worst_optimality: f64 = 0.0;
        for k in 0..samples {
            let game = random_marginal_game(&[3, 2], 1 + k % 2, seed + 70 + k as u64)?;
            let poly = fixed_safe_polytope(&game, &DeviationPolytope::cce(0, 3), 0)?;
            let point: Vec<f64> = (0..9).map(|_| r.random_range(-1.0..2.0)).collect();
            let p = project_onto(&poly, &point)?;
            worst_violation = worst_violation.max(poly.max_violation(p.entries()));
            // Variational inequality: max over the polytope of <x - p, y - p> is 0.
            let dir: Vec<f64> = point.iter().zip(p.entries()).map(|(x, p)| x - p).collect();
            let (eq, ineq) = poly.constraint_system();
            let mut lp = LinearProgram::maximize(dir.clone());
            for c in eq {
                lp.add_eq(c.coeffs, c.rhs);
            }
            for c in ineq {
                lp.add_le(c.coeffs, c.rhs);
            }
            let sol = lp_solve(&lp)?;
            worst_optimality = worst_optimality.max(sol.objective - dot(&dir, p.entries()));
        }
        Ok((
            worst_violation <= 1e-8 && worst_optimality <= 1e-7,
            format!("violation {worst_violation:.1e}, optimality {worst_optimality:.1e}"),
        ))
    })
}

fn property_stationary(seed: u64, samples: usize) -> CaseOutcome {
    timed("stationary distributions are fixed points", None, || {
        let mut r = rng(seed ^ 15);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let s = r.random_range(1..=6);
            let phi = random_deviation(&mut r, 0, s);
            let x = crate::numeric::stationary(&phi);
            worst = worst.max(stationary_residual(s, phi.entries(), &x));
        }
        Ok((worst <= 1e-10, format!("{samples} matrices, residual {worst:.1e}")))
    })
}

/// Best safe deviation by enumerating vertices of the safe set at `z`.
fn best_safe_by_vertices(game: &ConstrainedGame, poly: &DeviationPolytope, z: &CorrelatedStrategy, i: usize) -> Result<f64> {
    let s = game.actions(i);
    let index = game.profiles();
    let (eq, mut ineq) = poly.constraint_system();
    for j in 0..game.constraints() {
        ineq.push(Constraint::new(deviation_coefficients(index, game.cost(i, j), z.probs(), i), 0.0));
    }
    let utility = deviation_coefficients(index, game.utility(i), z.probs(), i);
    let vertices = enumerate_vertices(s * s, &eq, &ineq, 1e-9, 5_000_000)?;
    Ok(vertices.iter().map(|v| dot(&utility, v)).fold(f64::NEG_INFINITY, f64::max))
}

fn property_oracle_agreement(seed: u64, samples: usize) -> CaseOutcome {
    timed("oracle agrees with vertex enumeration", None, || {
        let mut r = rng(seed ^ 16);
        let mut worst: f64 = 0.0;
        for k in 0..samples {
            let actions = vec![r.random_range(1..=3), r.random_range(1..=3)];
            let game = random_safe_game(&actions, 1 + k % 2, 0.1, seed + 90 + k as u64)?;
            let z = random_strategy(&mut r, game.profiles().len());
            for i in 0..2 {
                let poly = DeviationPolytope::all(i, game.actions(i));
                let lp = best_safe_deviation(&game, &poly, &z, i)?.best_value;
                let enumerated = best_safe_by_vertices(&game, &poly, &z, i)?;
                worst = worst.max((lp - enumerated).abs());
            }
        }
        Ok((worst <= 1e-7, format!("{samples} instances, max difference {worst:.1e}")))
    })
}

fn property_mutated_example() -> CaseOutcome {
    timed("mutated example loses its non-convexity witness", None, || {
        let ex = example1();
        let mut costs = ex.game.costs().to_vec();
        for player in costs.iter_mut() {
            player[0][1] = -1.0;
        }
        let game = ConstrainedGame::new(&[2, 2], 1, ex.game.utilities().to_vec(), costs)?;
        let polys = presets(&game, false);
        let witness = |g: &ConstrainedGame| -> Result<(bool, bool, bool)> {
            Ok((
                verify(g, &polys, &ex.z1, 0.0)?.verdict,
                verify(g, &polys, &ex.z2, 0.0)?.verdict,
                verify(g, &polys, &ex.z3, 0.0)?.verdict,
            ))
        };
        let original = witness(&ex.game)?;
        let mutated = witness(&game)?;
        // Once every profile is safe, player 1 can always move to a1, so z1
        // stops being an equilibrium and the pattern (true, true, false) breaks.
        Ok((
            original == (true, true, false) && mutated == (false, true, false),
            format!("verdicts (z1, z2, z3): original {original:?}, mutated {mutated:?}"),
        ))
    })
}

fn property_gadget_ranges() -> CaseOutcome {
    timed("gadget utilities and costs in range", None, || {
        let params = GadgetParams {
            alpha: 0.5,
            delta: 1.0 / 3.0,
        };
        let k = params.constants(8)?;
        let game = hardness_gadget(&gadget_graph(), &params)?;
        let top = game.utilities()[0].iter().copied().fold(0.0, f64::max);
        let costs_ok = game.costs().iter().flatten().flatten().all(|c| (-1.0..=1.0).contains(c));
        Ok((
            top <= k.gamma + 2.0 * k.eta + 1e-15 && costs_ok,
            format!("largest utility of player 0 {top}, bound {}", k.gamma + 2.0 * k.eta),
        ))
    })
}

fn property_special_examples() -> CaseOutcome {
    timed("special solver single-player example and oracle agreement", None, || {
        let game = ConstrainedGame::new(&[2], 1, vec![vec![1.0, 0.0]], vec![vec![vec![1.0, -1.0]]])?;
        let polys = presets(&game, true);
        let obj = LinearObjective::new(game.utility(0).to_vec())?;
        let solved = solve_special(&game, &polys, &obj)?;
        let oracle = brute_oracle(&game, &polys, &obj.coefficients, 200, 0.0)?;
        let trace = run_dynamics(&game, &polys, 10_000, 0)?;
        let learned = dot(game.utility(0), trace.average.probs());
        let ov = oracle.value.unwrap_or(f64::NAN);
        Ok((
            (solved.objective - 0.5).abs() <= 1e-9 && (ov - 0.5).abs() <= 1.0 / 200.0 && (learned - 0.5).abs() <= 0.02,
            format!("solver {}, oracle {ov}, learning {learned:.4}", solved.objective),
        ))
    })
}

fn property_marginal_corpus(seed: u64, samples: usize) -> CaseOutcome {
    timed("random marginal instances are strictly feasible", None, || {
        let mut worst = f64::INFINITY;
        for k in 0..samples {
            let game = random_marginal_game(&[3, 2], 2, seed + 300 + k as u64)?;
            let polys = presets(&game, true);
            for i in 0..2 {
                marginal_costs(&game, i)?;
                let z = CorrelatedStrategy::uniform(6);
                worst = worst.min(strict_feasibility(&game, &polys[i], &z, i)?.rho);
            }
        }
        Ok((worst >= 0.1, format!("{samples} instances, smallest rho {worst:.3}")))
    })
}

fn property_learning_determinism(seed: u64) -> CaseOutcome {
    timed("learning traces are reproducible", None, || {
        let game = learning_instance(seed, 1)?;
        let polys = presets(&game, true);
        let a = run_dynamics(&game, &polys, 256, seed)?;
        let b = run_dynamics(&game, &polys, 256, seed)?;
        let same = a.average.probs().iter().zip(b.average.probs()).all(|(x, y)| x.to_bits() == y.to_bits());
        let safe = is_safe(&game, &a.average, 1e-9)?.safe;
        Ok((same && safe, format!("bit-identical {same}, average safe {safe}")))
    })
}

pub fn properties(seed: u64, samples: usize) -> Vec<CaseOutcome> {
    let cases: Vec<Box<dyn Fn() -> CaseOutcome + Send + Sync>> = vec![
        Box::new(property_profile_index),
        Box::new(move || property_deviation_algebra(seed, samples)),
        Box::new(move || property_polytopes(seed, samples)),
        Box::new(move || property_lp_against_vertices(seed, samples)),
        Box::new(move || property_projection(seed, samples.min(20))),
        Box::new(move || property_stationary(seed, samples)),
        Box::new(move || property_oracle_agreement(seed, samples.min(30))),
        Box::new(property_mutated_example),
        Box::new(property_gadget_ranges),
        Box::new(property_special_examples),
        Box::new(move || property_marginal_corpus(seed, samples)),
        Box::new(move || property_learning_determinism(seed)),
    ];
    cases.par_iter().map(|case| case()).collect()
}

/// Runs every property and acceptance case. Cases that would start after
/// `budget` has elapsed are reported as failures.
pub fn run_all(seed: u64, budget: Duration) -> Summary {
    let start = Instant::now();
    let mut cases = properties(seed, 50);
    let criteria: Vec<Box<dyn Fn() -> CaseOutcome>> = vec![
        Box::new(criterion_example),
        Box::new(criterion_expectation),
        Box::new(move || criterion_special_solver(seed)),
        Box::new(move || criterion_learning(seed)),
        Box::new(move || criterion_fixed_points(seed)),
        Box::new(criterion_gadget),
        Box::new(move || criterion_convexity(seed)),
        Box::new(move || criterion_marginal_invariance(seed)),
        Box::new(move || criterion_existence(seed)),
    ];
    for (k, criterion) in criteria.iter().enumerate() {
        if start.elapsed() > budget {
            cases.push(CaseOutcome {
                name: format!("criterion {}", k + 1),
                passed: false,
                detail: "budget exhausted before the case started".into(),
                seconds: 0.0,
            });
            continue;
        }
        cases.push(criterion());
    }
    Summary { seed, cases }
}

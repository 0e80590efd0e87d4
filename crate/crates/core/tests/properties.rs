//! Randomized invariants checked against small independent computations.

use ccg_core::instances::{example1, random_marginal_game, random_safe_game};
use ccg_core::io::{game_from_json, game_to_json};
use ccg_core::numeric::{project_onto, project_simplex, stationary};
use ccg_core::*;
use proptest::prelude::*;

fn profiles() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=4, 1..=4)
}

fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_map(|mut v| {
        v[0] += 1e-3;
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
        v
    })
}

fn stochastic(size: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(simplex(size), size)
}

/// Direct evaluation of `(phi <> z)[a]`, looping over every pair of profiles.
fn push_forward_naive(index: &ProfileIndex, z: &[f64], player: usize, phi: &Deviation) -> Vec<f64> {
    let mut out = vec![0.0; index.len()];
    for (target, slot) in out.iter_mut().enumerate() {
        let t = index.decode(target);
        for (source, &mass) in z.iter().enumerate() {
            let s = index.decode(source);
            let same_others = (0..index.players()).all(|k| k == player || s[k] == t[k]);
            if same_others {
                *slot += phi.get(s[player], t[player]) * mass;
            }
        }
    }
    out
}

/// Every deterministic map of `s` actions into itself.
fn deterministic_maps(owner: usize, s: usize) -> Vec<Deviation> {
    let count = s.pow(s as u32);
    (0..count)
        .map(|mut code| {
            let mut entries = vec![0.0; s * s];
            for b in 0..s {
                entries[b * s + code % s] = 1.0;
                code /= s;
            }
            Deviation::new(owner, s, entries).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profile_index_is_a_bijection(actions in profiles()) {
        let index = ProfileIndex::new(&actions).unwrap();
        prop_assert_eq!(index.len(), actions.iter().product::<usize>());
        for p in 0..index.len() {
            let a = index.decode(p);
            prop_assert_eq!(index.encode(&a), p);
            for (i, &ai) in a.iter().enumerate() {
                prop_assert_eq!(index.action_of(p, i), ai);
            }
        }
        // Player 0 varies slowest.
        prop_assert_eq!(index.stride(0), index.len() / actions[0]);
        prop_assert_eq!(index.stride(actions.len() - 1), 1);
    }

    #[test]
    fn deviation_matches_naive_push_forward(
        (rows, z) in (1usize..=3).prop_flat_map(|s| (stochastic(s), simplex(s * 3))),
        player in 0usize..2,
    ) {
        let s = rows.len();
        let actions = if player == 0 { vec![s, 3] } else { vec![3, s] };
        let game = ConstrainedGame::new(
            &actions,
            0,
            vec![vec![0.0; 3 * s]; 2],
            vec![vec![]; 2],
        ).unwrap();
        let z = CorrelatedStrategy::new(z).unwrap();
        let phi = Deviation::from_rows(player, &rows).unwrap();
        let fast = apply_deviation(&game, &z, &phi).unwrap();
        let naive = push_forward_naive(game.profiles(), z.probs(), player, &phi);
        for (a, b) in fast.probs().iter().zip(&naive) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((fast.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(fast.probs().iter().all(|&x| x >= 0.0));
        // The identity changes nothing.
        let same = apply_deviation(&game, &z, &Deviation::identity(player, s)).unwrap();
        for (a, b) in same.probs().iter().zip(z.probs()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn deviation_coefficients_give_the_deviated_payoff(seed in 0u64..1000, s in 2usize..=3) {
        let game = random_safe_game(&[s, 2], 1, 0.1, seed).unwrap();
        let z = CorrelatedStrategy::uniform(2 * s);
        let phi = Deviation::identity(0, s).mix(&Deviation::constant_rows(0, &vec![1.0 / s as f64; s]).unwrap(), 0.3).unwrap();
        let coeffs = deviation_coefficients(game.profiles(), game.utility(0), z.probs(), 0);
        let via_coeffs: f64 = coeffs.iter().zip(phi.entries()).map(|(c, p)| c * p).sum();
        let direct = expected_utility(&game, &apply_deviation(&game, &z, &phi).unwrap(), 0).unwrap();
        prop_assert!((via_coeffs - direct).abs() < 1e-12);
    }

    #[test]
    fn simplex_projection_is_the_nearest_point(v in prop::collection::vec(-2.0f64..2.0, 1..8)) {
        let p = project_simplex(&v);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        // Optimality against every vertex: <v - p, e_k - p> <= 0.
        let vp: f64 = v.iter().zip(&p).map(|(a, b)| (a - b) * b).sum();
        for k in 0..v.len() {
            prop_assert!((v[k] - p[k]) - vp <= 1e-12);
        }
    }

    #[test]
    fn polytope_projection_is_feasible_and_idempotent(
        point in prop::collection::vec(-1.0f64..2.0, 9),
        cce in any::<bool>(),
    ) {
        let poly = if cce { DeviationPolytope::cce(0, 3) } else { DeviationPolytope::all(0, 3) };
        let p = project_onto(&poly, &point).unwrap();
        prop_assert!(poly.max_violation(p.entries()) <= 1e-9);
        let again = project_onto(&poly, p.entries()).unwrap();
        for (a, b) in p.entries().iter().zip(again.entries()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn stationary_distribution_is_fixed(rows in (1usize..=5).prop_flat_map(stochastic)) {
        let phi = Deviation::from_rows(0, &rows).unwrap();
        let x = stationary(&phi);
        let s = rows.len();
        prop_assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for a in 0..s {
            let image: f64 = (0..s).map(|b| x[b] * rows[b][a]).sum();
            prop_assert!((image - x[a]).abs() < 1e-10);
        }
    }

    #[test]
    fn unconstrained_oracle_matches_deterministic_maps(
        seed in 0u64..10_000,
        z in simplex(6),
    ) {
        // Without costs every deviation is safe and the optimum sits at a deterministic map.
        let base = random_safe_game(&[3, 2], 1, 0.1, seed).unwrap();
        let game = ConstrainedGame::new(&[3, 2], 0, base.utilities().to_vec(), vec![vec![]; 2]).unwrap();
        let z = CorrelatedStrategy::new(z).unwrap();
        for (i, s) in [(0usize, 3usize), (1, 2)] {
            let r = best_safe_deviation(&game, &DeviationPolytope::all(i, s), &z, i).unwrap();
            let brute = deterministic_maps(i, s)
                .iter()
                .map(|phi| expected_utility(&game, &apply_deviation(&game, &z, phi).unwrap(), i).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((r.best_value - brute).abs() < 1e-9, "{} vs {}", r.best_value, brute);
            prop_assert!(r.gap >= -1e-12);
        }
    }

    #[test]
    fn safe_oracle_witness_is_safe_and_dominates_the_identity(seed in 0u64..10_000) {
        let game = random_safe_game(&[2, 3], 2, 0.1, seed).unwrap();
        let z = CorrelatedStrategy::uniform(6);
        let safety = is_safe(&game, &z, FEASIBILITY_TOL).unwrap();
        for (i, s) in [(0usize, 2usize), (1, 3)] {
            let r = best_safe_deviation(&game, &DeviationPolytope::all(i, s), &z, i).unwrap();
            prop_assert!(r.safety_residuals.iter().all(|&c| c <= 1e-9));
            let costs = expected_costs(&game, &apply_deviation(&game, &z, &r.witness).unwrap(), i).unwrap();
            for (a, b) in costs.iter().zip(&r.safety_residuals) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            if safety.player_safe(i, FEASIBILITY_TOL) {
                prop_assert!(r.gap >= -1e-9);
            }
        }
    }

    #[test]
    fn verifier_epsilon_is_monotone(seed in 0u64..10_000, eps in 0.0f64..0.5) {
        let game = random_safe_game(&[2, 2], 1, 0.1, seed).unwrap();
        let polys = vec![DeviationPolytope::all(0, 2), DeviationPolytope::all(1, 2)];
        let z = CorrelatedStrategy::uniform(4);
        let tight = verify(&game, &polys, &z, eps).unwrap();
        let loose = verify(&game, &polys, &z, eps + 0.1).unwrap();
        prop_assert!(!tight.verdict || loose.verdict);
        prop_assert_eq!(tight.max_gap, loose.max_gap);
    }

    #[test]
    fn game_json_round_trips_exactly(seed in 0u64..10_000) {
        let game = random_marginal_game(&[2, 3, 2], 2, seed).unwrap();
        let text = game_to_json(&game).unwrap();
        prop_assert_eq!(game_from_json(&text).unwrap(), game);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn special_solver_is_an_equilibrium_above_product_grid(seed in 0u64..1000) {
        let game = random_marginal_game(&[2, 2], 1, seed).unwrap();
        let polys = vec![DeviationPolytope::cce(0, 2), DeviationPolytope::cce(1, 2)];
        let obj = LinearObjective::welfare(&game);
        let r = solve_special(&game, &polys, &obj).unwrap();
        prop_assert!(r.final_max_gap <= GAP_TOL);
        prop_assert!(r.max_safety_residual <= FEASIBILITY_TOL);
        prop_assert!(verify(&game, &polys, &r.strategy, 0.0).unwrap().verdict);

        // Safe product strategies on a grid that are equilibria cannot beat the optimum.
        let steps = 20;
        for x in 0..=steps {
            for y in 0..=steps {
                let p = x as f64 / steps as f64;
                let q = y as f64 / steps as f64;
                let z = CorrelatedStrategy::product(game.profiles(), &[vec![p, 1.0 - p], vec![q, 1.0 - q]]).unwrap();
                let report = verify(&game, &polys, &z, 0.0).unwrap();
                if report.verdict {
                    prop_assert!(obj.value(&z) <= r.objective + 1e-9);
                }
            }
        }
    }

    #[test]
    fn learning_is_reproducible_and_safe(seed in 0u64..1000) {
        let game = random_marginal_game(&[2, 3], 1, seed).unwrap();
        let polys = vec![DeviationPolytope::cce(0, 2), DeviationPolytope::cce(1, 3)];
        let a = run_dynamics(&game, &polys, 64, seed).unwrap();
        let b = run_dynamics(&game, &polys, 64, seed).unwrap();
        prop_assert_eq!(a.average.probs(), b.average.probs());
        prop_assert!(is_safe(&game, &a.average, 1e-9).unwrap().safe);
        for c in &a.checkpoints {
            for p in &c.players {
                prop_assert!(p.max_cost_residual <= 1e-9);
            }
        }
    }
}

#[test]
fn example_verdicts_and_gap() {
    let ex = example1();
    let polys = vec![DeviationPolytope::all(0, 2), DeviationPolytope::all(1, 2)];
    assert!(verify(&ex.game, &polys, &ex.z1, 0.0).unwrap().verdict);
    assert!(verify(&ex.game, &polys, &ex.z2, 0.0).unwrap().verdict);
    let r = verify(&ex.game, &polys, &ex.z3, 0.0).unwrap();
    assert!(!r.verdict);
    assert!((r.gap(1) - 1.0 / 3.0).abs() < 1e-9);
    // The midpoint fails although both endpoints pass.
    let mid = ex.z1.mix(&ex.z2, 0.5).unwrap();
    assert_eq!(mid.probs(), ex.z3.probs());
}

#[test]
fn two_by_two_indexing() {
    let index = ProfileIndex::new(&[2, 2]).unwrap();
    let order: Vec<Vec<usize>> = (0..4).map(|p| index.decode(p)).collect();
    assert_eq!(order, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    assert_eq!(index.stride(0), 2);
    assert_eq!(index.stride(1), 1);

    let game = ConstrainedGame::new(&[2, 2], 0, vec![vec![0.0; 4]; 2], vec![vec![]; 2]).unwrap();
    let z = CorrelatedStrategy::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let swap = Deviation::from_rows(0, &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let always_b0 = Deviation::constant_rows(1, &[1.0, 0.0]).unwrap();
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
    assert!(close(apply_deviation(&game, &z, &swap).unwrap().probs(), &[0.3, 0.4, 0.1, 0.2]));
    assert!(close(apply_deviation(&game, &z, &always_b0).unwrap().probs(), &[0.3, 0.0, 0.7, 0.0]));
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(ProfileIndex::new(&[2, 0]).is_err());
    assert!(CorrelatedStrategy::new(vec![0.5, 0.6]).is_err());
    assert!(CorrelatedStrategy::new(vec![f64::NAN, 1.0]).is_err());
    assert!(Deviation::from_rows(0, &[vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
    assert!(ConstrainedGame::new(&[2], 1, vec![vec![0.0; 2]], vec![vec![vec![0.0; 3]]]).is_err());
    let game = random_marginal_game(&[2, 2], 1, 0).unwrap();
    assert!(verify(&game, &[DeviationPolytope::all(0, 2)], &CorrelatedStrategy::uniform(4), 0.0).is_err());
    assert!(verify(&game, &[DeviationPolytope::all(0, 2), DeviationPolytope::all(1, 2)], &CorrelatedStrategy::uniform(3), 0.0).is_err());
}

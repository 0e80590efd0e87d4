//! Euclidean projection of a matrix onto a deviation polytope.
//!
//! Dykstra's alternating projections cycle over the product of row simplices,
//! the hyperplanes formed by paired rows, and the remaining half-spaces. The
//! Dykstra iterate then seeds a small active-set solve of the KKT system so
//! that the returned point sits exactly on its face.

use nalgebra::{DMatrix, DVector};

use crate::deviation::{DeviationPolytope, PolytopeRow};
use crate::error::{Error, Result};
use crate::game::Deviation;

const MOVEMENT_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 10_000;
const ACTIVE_TOL: f64 = 1e-7;
const POLISH_FEASIBILITY: f64 = 1e-12;

/// Euclidean projection of a probability-like vector onto the simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

enum ConvexSet<'a> {
    RowSimplices,
    Hyperplane(&'a PolytopeRow),
    HalfSpace(&'a PolytopeRow),
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

impl ConvexSet<'_> {
    fn project(&self, size: usize, y: &[f64]) -> Vec<f64> {
        match self {
            ConvexSet::RowSimplices => y.chunks(size).flat_map(project_simplex).collect(),
            ConvexSet::Hyperplane(row) | ConvexSet::HalfSpace(row) => {
                let excess = row.eval(y) - row.bound;
                let n = norm_sq(&row.coeffs);
                let is_half = matches!(self, ConvexSet::HalfSpace(_));
                if n == 0.0 || (is_half && excess <= 0.0) {
                    return y.to_vec();
                }
                let step = excess / n;
                y.iter().zip(&row.coeffs).map(|(v, m)| v - step * m).collect()
            }
        }
    }
}

fn is_negation(a: &PolytopeRow, b: &PolytopeRow) -> bool {
    a.bound == -b.bound && a.coeffs.iter().zip(&b.coeffs).all(|(x, y)| *x == -*y)
}

fn classify(rows: &[PolytopeRow]) -> (Vec<&PolytopeRow>, Vec<&PolytopeRow>) {
    let mut paired = vec![false; rows.len()];
    let mut hyperplanes = Vec::new();
    for r in 0..rows.len() {
        if paired[r] {
            continue;
        }
        if let Some(q) = (r + 1..rows.len()).find(|&q| !paired[q] && is_negation(&rows[r], &rows[q])) {
            paired[r] = true;
            paired[q] = true;
            hyperplanes.push(&rows[r]);
        }
    }
    let halfspaces = rows
        .iter()
        .enumerate()
        .filter(|(r, _)| !paired[*r])
        .map(|(_, row)| row)
        .collect();
    (hyperplanes, halfspaces)
}

fn dykstra(size: usize, sets: &[ConvexSet<'_>], point: &[f64]) -> Vec<f64> {
    let d = point.len();
    let mut x = point.to_vec();
    let mut increments = vec![vec![0.0; d]; sets.len()];
    for _ in 0..MAX_SWEEPS {
        let start = x.clone();
        for (set, incr) in sets.iter().zip(increments.iter_mut()) {
            let y: Vec<f64> = x.iter().zip(incr.iter()).map(|(a, b)| a + b).collect();
            let projected = set.project(size, &y);
            for k in 0..d {
                incr[k] = y[k] - projected[k];
            }
            x = projected;
        }
        let movement = x
            .iter()
            .zip(&start)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if movement <= MOVEMENT_TOL {
            break;
        }
    }
    x
}

/// Active-set refinement of the projection of `point` starting from the guess `x`.
struct Polisher<'a> {
    size: usize,
    point: &'a [f64],
    hyperplanes: &'a [&'a PolytopeRow],
    halfspaces: &'a [&'a PolytopeRow],
}

#[derive(Clone, Copy, PartialEq)]
enum Active {
    HalfSpace(usize),
    Zero(usize),
}

impl Polisher<'_> {
    fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in x.chunks(self.size) {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        for &v in x {
            worst = worst.max(-v);
        }
        for row in self.hyperplanes {
            worst = worst.max((row.eval(x) - row.bound).abs());
        }
        for row in self.halfspaces {
            worst = worst.max(row.eval(x) - row.bound);
        }
        worst
    }

    /// Projects `point` onto the affine set of the given active constraints
    /// and returns the point with the multipliers of the active inequalities.
    fn solve(&self, active: &[Active]) -> Option<(Vec<f64>, Vec<f64>)> {
        let d = self.point.len();
        let s = self.size;
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for b in 0..s {
            let mut c = vec![0.0; d];
            c[b * s..(b + 1) * s].iter_mut().for_each(|v| *v = 1.0);
            rows.push((c, 1.0));
        }
        for row in self.hyperplanes {
            rows.push((row.coeffs.clone(), row.bound));
        }
        let fixed = rows.len();
        for act in active {
            match *act {
                Active::HalfSpace(k) => {
                    rows.push((self.halfspaces[k].coeffs.clone(), self.halfspaces[k].bound));
                }
                Active::Zero(k) => {
                    let mut c = vec![0.0; d];
                    c[k] = 1.0;
                    rows.push((c, 0.0));
                }
            }
        }
        let c = DMatrix::from_fn(rows.len(), d, |r, k| rows[r].0[k]);
        let e = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        let p = DVector::from_column_slice(self.point);
        let svd = c.clone().svd(true, true);
        let eps = 1e-11 * svd.singular_values.max().max(1.0);
        let residual = &c * &p - &e;
        let correction = svd.solve(&residual, eps).ok()?;
        let y = &p - correction;
        // Multipliers from C^T lambda = p - y.
        let ct = c.transpose();
        let lambda = ct.svd(true, true).solve(&(&p - &y), eps).ok()?;
        let multipliers = lambda.iter().skip(fixed).copied().collect();
        Some((y.iter().copied().collect(), multipliers))
    }

    fn run(&self, guess: &[f64]) -> Option<Vec<f64>> {
        let mut active: Vec<Active> = Vec::new();
        for (k, row) in self.halfspaces.iter().enumerate() {
            if row.eval(guess) - row.bound >= -ACTIVE_TOL {
                active.push(Active::HalfSpace(k));
            }
        }
        for (k, &v) in guess.iter().enumerate() {
            if v <= ACTIVE_TOL {
                active.push(Active::Zero(k));
            }
        }
        let limit = 4 * (self.point.len() + self.halfspaces.len()) + 8;
        for _ in 0..limit {
            let (y, multipliers) = self.solve(&active)?;
            // Wrong-signed multipliers: HalfSpace needs >= 0, Zero needs <= 0.
            let worst_sign = active
                .iter()
                .zip(&multipliers)
                .enumerate()
                .map(|(pos, (act, &m))| {
                    let wrong = match act {
                        Active::HalfSpace(_) => -m,
                        Active::Zero(_) => m,
                    };
                    (pos, wrong)
                })
                .filter(|&(_, wrong)| wrong > 1e-9)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((pos, _)) = worst_sign {
                active.remove(pos);
                continue;
            }
            // Most violated inactive constraint.
            let mut worst: Option<(Active, f64)> = None;
            for (k, row) in self.halfspaces.iter().enumerate() {
                let v = row.eval(&y) - row.bound;
                if v > POLISH_FEASIBILITY && !active.contains(&Active::HalfSpace(k))
                    && worst.is_none_or(|(_, w)| v > w) {
                        worst = Some((Active::HalfSpace(k), v));
                    }
            }
            for (k, &v) in y.iter().enumerate() {
                if -v > POLISH_FEASIBILITY && !active.contains(&Active::Zero(k))
                    && worst.is_none_or(|(_, w)| -v > w) {
                        worst = Some((Active::Zero(k), -v));
                    }
            }
            match worst {
                Some((act, _)) => active.push(act),
                None => {
                    return (self.violation(&y) <= POLISH_FEASIBILITY).then_some(y);
                }
            }
        }
        None
    }
}

fn clean(size: usize, mut x: Vec<f64>) -> Vec<f64> {
    for row in x.chunks_mut(size) {
        for v in row.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let total: f64 = row.iter().sum();
        if total > 0.0 && total != 1.0 {
            row.iter_mut().for_each(|v| *v /= total);
        }
    }
    x
}

fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Projects the flat row-major matrix `point` onto `poly`.
pub fn project_onto(poly: &DeviationPolytope, point: &[f64]) -> Result<Deviation> {
    let s = poly.size();
    if point.len() != s * s {
        return Err(Error::Dimension {
            what: format!("projection point for player {}", poly.owner()),
            expected: s * s,
            found: point.len(),
        });
    }
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("projection point".into()));
    }
    let (hyperplanes, halfspaces) = classify(poly.rows());
    let mut sets = vec![ConvexSet::RowSimplices];
    sets.extend(hyperplanes.iter().map(|r| ConvexSet::Hyperplane(r)));
    sets.extend(halfspaces.iter().map(|r| ConvexSet::HalfSpace(r)));

    let guess = if sets.len() == 1 {
        return Deviation::new(poly.owner(), s, sets[0].project(s, point));
    } else {
        dykstra(s, &sets, point)
    };

    let polisher = Polisher {
        size: s,
        point,
        hyperplanes: &hyperplanes,
        halfspaces: &halfspaces,
    };
    let candidate = match polisher.run(&guess) {
        Some(y) if distance_sq(&y, point) <= distance_sq(&guess, point) + 1e-9 => clean(s, y),
        _ => clean(s, guess),
    };
    if poly.max_violation(&candidate) > 1e-6 {
        return Err(Error::EmptyPolytope {
            player: poly.owner(),
        });
    }
    Deviation::new(poly.owner(), s, candidate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_examples() {
        assert_eq!(project_simplex(&[1.4, -0.4]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
    }

    #[test]
    fn all_projection_is_row_wise() {
        let poly = DeviationPolytope::all(0, 2);
        let phi = project_onto(&poly, &[1.4, -0.4, 0.3, 0.7]).unwrap();
        assert_eq!(phi.entries(), &[1.0, 0.0, 0.3, 0.7]);
    }

    #[test]
    fn cce_projection_averages_rows() {
        let poly = DeviationPolytope::cce(0, 2);
        let phi = project_onto(&poly, &[0.9, 0.1, 0.3, 0.7]).unwrap();
        for b in 0..2 {
            assert!((phi.get(b, 0) - 0.6).abs() < 1e-12);
            assert!((phi.get(b, 1) - 0.4).abs() < 1e-12);
        }
        // Average (1.2, -0.2) leaves the simplex and is clipped.
        let phi = project_onto(&poly, &[1.5, -0.5, 0.9, 0.1]).unwrap();
        assert!((phi.get(0, 0) - 1.0).abs() < 1e-12 && (phi.get(1, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn members_are_fixed_points() {
        let poly = DeviationPolytope::cce(0, 3);
        let phi = Deviation::constant_rows(0, &[0.2, 0.3, 0.5]).unwrap();
        let out = project_onto(&poly, phi.entries()).unwrap();
        for (a, b) in out.entries().iter().zip(phi.entries()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn halfspace_is_exact() {
        // CCE on two actions with h[0] <= 0.25.
        let row = PolytopeRow {
            coeffs: vec![0.5, 0.0, 0.5, 0.0],
            bound: 0.25,
        };
        let poly = DeviationPolytope::cce(0, 2).with_rows([row]);
        let phi = project_onto(&poly, &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((phi.get(0, 0) - 0.25).abs() < 1e-14, "{phi:?}");
        assert!(poly.max_violation(phi.entries()) < 1e-14);
    }
}

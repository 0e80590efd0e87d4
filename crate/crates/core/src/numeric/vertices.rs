//! Brute-force vertex enumeration for small polytopes.
//!
//! Every subset of inequality rows of the right size is tried as an active
//! set together with all equalities. Exponential in the dimension; meant for
//! cross-checking and for the fixed-safe-set grid oracle on tiny games.

use nalgebra::{DMatrix, DVector};

use super::lp::Constraint;
use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-9;
const DEDUP_TOL: f64 = 1e-7;

pub(crate) fn rank(rows: &[&[f64]], dim: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), dim, |r, c| rows[r][c]);
    let svd = m.svd(false, false);
    let top = svd.singular_values.max();
    svd.singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * top.max(1.0))
        .count()
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Vertices of `{x : E x = f, A x <= b}` in dimension `dim`.
///
/// Fails when more than `max_subsets` active sets would have to be tried.
pub fn enumerate_vertices(
    dim: usize,
    equalities: &[Constraint],
    inequalities: &[Constraint],
    tol: f64,
    max_subsets: usize,
) -> Result<Vec<Vec<f64>>> {
    let eq_rows: Vec<&[f64]> = equalities.iter().map(|c| c.coeffs.as_slice()).collect();
    let eq_rank = rank(&eq_rows, dim);
    let free = dim - eq_rank;
    if free > inequalities.len() {
        // Unbounded or lower-dimensional without enough rows to pin a vertex.
        return Ok(Vec::new());
    }
    let subsets = binomial(inequalities.len(), free);
    if subsets > max_subsets as f64 {
        return Err(Error::InvalidInput(format!(
            "vertex enumeration would try {subsets:.0} active sets (cap {max_subsets})"
        )));
    }

    let feasible = |x: &[f64]| {
        equalities.iter().all(|c| (c.eval(x) - c.rhs).abs() <= tol)
            && inequalities.iter().all(|c| c.eval(x) - c.rhs <= tol)
    };

    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut combo: Vec<usize> = (0..free).collect();
    loop {
        let rows: Vec<&Constraint> = equalities
            .iter()
            .chain(combo.iter().map(|&k| &inequalities[k]))
            .collect();
        let a = DMatrix::from_fn(rows.len(), dim, |r, c| rows[r].coeffs[c]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|c| c.rhs));
        let svd = a.clone().svd(true, true);
        let top = svd.singular_values.max();
        let full_rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > RANK_TOL * top.max(1.0))
            .count()
            == dim;
        if full_rank {
            if let Ok(x) = svd.solve(&b, RANK_TOL * top.max(1.0)) {
                let consistent = (&a * &x - &b).amax() <= tol;
                let x: Vec<f64> = x.iter().copied().collect();
                if consistent
                    && feasible(&x)
                    && !vertices.iter().any(|v| {
                        v.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max) <= DEDUP_TOL
                    })
                {
                    vertices.push(x);
                }
            }
        }
        if free == 0 || !next_combination(&mut combo, inequalities.len()) {
            break;
        }
    }
    Ok(vertices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square() {
        let ineq = vec![
            Constraint::new(vec![1.0, 0.0], 1.0),
            Constraint::new(vec![0.0, 1.0], 1.0),
            Constraint::new(vec![-1.0, 0.0], 0.0),
            Constraint::new(vec![0.0, -1.0], 0.0),
        ];
        let v = enumerate_vertices(2, &[], &ineq, 1e-9, 100).unwrap();
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn simplex_with_redundant_equalities() {
        let eq = vec![
            Constraint::new(vec![1.0, 1.0, 1.0], 1.0),
            Constraint::new(vec![2.0, 2.0, 2.0], 2.0),
        ];
        let ineq: Vec<_> = (0..3)
            .map(|k| {
                let mut c = vec![0.0; 3];
                c[k] = -1.0;
                Constraint::new(c, 0.0)
            })
            .collect();
        let v = enumerate_vertices(3, &eq, &ineq, 1e-9, 100).unwrap();
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn refuses_huge_enumerations() {
        let ineq: Vec<_> = (0..40)
            .map(|k| {
                let mut c = vec![0.0; 20];
                c[k % 20] = if k < 20 { 1.0 } else { -1.0 };
                Constraint::new(c, 1.0)
            })
            .collect();
        assert!(enumerate_vertices(20, &[], &ineq, 1e-9, 1000).is_err());
    }
}

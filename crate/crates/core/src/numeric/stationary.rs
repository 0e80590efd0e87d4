//! Stationary distributions of row-stochastic matrices.

use nalgebra::{DMatrix, DVector};

use crate::game::Deviation;

/// A distribution `x` with `x[a] = sum_b phi[b, a] x[b]`.
///
/// Solves `(phi^T - I) x = 0, 1^T x = 1` in the least-squares sense and
/// returns the minimum-norm solution. For reducible chains that solution
/// weights each closed class inversely to the squared norm of its own
/// stationary vector, so it is non-negative; the identity matrix yields the
/// uniform distribution.
pub fn stationary(phi: &Deviation) -> Vec<f64> {
    stationary_distribution(phi.size(), phi.entries())
}

/// [`stationary`] on a flat row-major `size x size` matrix.
pub fn stationary_distribution(size: usize, phi: &[f64]) -> Vec<f64> {
    if size == 1 {
        return vec![1.0];
    }
    // Constant rows: the common row is the unique fixed point.
    if (1..size).all(|b| phi[b * size..(b + 1) * size] == phi[..size]) {
        return normalize(phi[..size].to_vec());
    }
    let a = DMatrix::from_fn(size + 1, size, |r, c| {
        if r == size {
            1.0
        } else {
            phi[c * size + r] - if r == c { 1.0 } else { 0.0 }
        }
    });
    let mut rhs = DVector::zeros(size + 1);
    rhs[size] = 1.0;
    let svd = a.svd(true, true);
    let top = svd.singular_values.max();
    let x = svd
        .solve(&rhs, 1e-10 * top.max(1.0))
        .expect("SVD computed with both factors");
    let mut x = normalize(x.iter().copied().collect());
    refine(size, phi, &mut x);
    x
}

fn normalize(mut x: Vec<f64>) -> Vec<f64> {
    for v in &mut x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    if total > 0.0 {
        for v in &mut x {
            *v /= total;
        }
    } else {
        let u = 1.0 / x.len() as f64;
        x.iter_mut().for_each(|v| *v = u);
    }
    x
}

/// Infinity-norm residual `|phi^T x - x|`.
pub fn stationary_residual(size: usize, phi: &[f64], x: &[f64]) -> f64 {
    (0..size)
        .map(|a| {
            let pushed: f64 = (0..size).map(|b| phi[b * size + a] * x[b]).sum();
            (pushed - x[a]).abs()
        })
        .fold(0.0, f64::max)
}

/// One least-squares correction step on the residual, kept only if it helps.
fn refine(size: usize, phi: &[f64], x: &mut Vec<f64>) {
    let before = stationary_residual(size, phi, x);
    if before <= 1e-14 {
        return;
    }
    let pushed: Vec<f64> = (0..size)
        .map(|a| (0..size).map(|b| phi[b * size + a] * x[b]).sum())
        .collect();
    let candidate = normalize(pushed);
    if stationary_residual(size, phi, &candidate) < before {
        *x = candidate;
    }
}

//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Sized for the small problems this crate produces (tens to a few hundred
//! variables). Problems are stated as maximization with `<=` and `=` rows and
//! per-variable bounds; the solver rewrites them into standard form
//! `max c.y, A y (<=|=) b, y >= 0` internally.

use serde::Serialize;

use crate::error::{Error, Result};

const REDUCED_COST_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-10;
const PHASE_ONE_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

/// A linear row `coeffs . x (<= | =) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }
}

/// `max objective . x` subject to inequality rows, equality rows and bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub inequalities: Vec<Constraint>,
    pub equalities: Vec<Constraint>,
    /// `(lo, hi)` per variable; infinite values mean unbounded in that direction.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// A maximization problem over `x >= 0` with no rows yet.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            inequalities: Vec::new(),
            equalities: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.inequalities.push(Constraint::new(coeffs, rhs));
        self
    }

    pub fn add_ge(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.inequalities
            .push(Constraint::new(coeffs.into_iter().map(|a| -a).collect(), -rhs));
        self
    }

    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.equalities.push(Constraint::new(coeffs, rhs));
        self
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) -> &mut Self {
        self.bounds[var] = (lo, hi);
        self
    }

    /// Largest violation of any row or bound at `x` (zero when feasible).
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.inequalities {
            worst = worst.max(row.eval(x) - row.rhs);
        }
        for row in &self.equalities {
            worst = worst.max((row.eval(x) - row.rhs).abs());
        }
        for (&v, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - v).max(v - hi);
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.bounds.len() != n {
            return Err(Error::Dimension {
                what: "LP bounds".into(),
                expected: n,
                found: self.bounds.len(),
            });
        }
        for row in self.inequalities.iter().chain(&self.equalities) {
            if row.coeffs.len() != n {
                return Err(Error::Dimension {
                    what: "LP row".into(),
                    expected: n,
                    found: row.coeffs.len(),
                });
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::NonFinite("LP row".into()));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("LP objective".into()));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidInput(format!(
                    "inconsistent bounds [{lo}, {hi}] on LP variable {j}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point in the original variables (empty unless optimal).
    pub point: Vec<f64>,
    pub objective: f64,
    pub max_residual: f64,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        Self {
            status,
            point: Vec::new(),
            objective: match status {
                LpStatus::Unbounded => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            },
            max_residual: f64::INFINITY,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// How an original variable is expressed through non-negative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lo + y`
    Shift { col: usize, lo: f64 },
    /// `x = hi - y`
    Mirror { col: usize, hi: f64 },
    /// `x = y+ - y-`
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    cols: usize,
    objective: Vec<f64>,
    objective_offset: f64,
    /// `(coeffs, rhs, is_equality)`
    rows: Vec<(Vec<f64>, f64, bool)>,
    map: Vec<VarMap>,
}

fn to_standard_form(lp: &LinearProgram) -> StandardForm {
    let mut map = Vec::with_capacity(lp.dim());
    let mut cols = 0;
    let mut upper_rows = Vec::new();
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            map.push(VarMap::Shift { col: cols, lo });
            if hi.is_finite() {
                upper_rows.push((cols, hi - lo));
            }
            cols += 1;
        } else if hi.is_finite() {
            map.push(VarMap::Mirror { col: cols, hi });
            cols += 1;
        } else {
            map.push(VarMap::Split {
                pos: cols,
                neg: cols + 1,
            });
            cols += 2;
        }
    }

    let substitute = |coeffs: &[f64], rhs: f64| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; cols];
        let mut rhs = rhs;
        for (&a, m) in coeffs.iter().zip(&map) {
            if a == 0.0 {
                continue;
            }
            match *m {
                VarMap::Shift { col, lo } => {
                    out[col] += a;
                    rhs -= a * lo;
                }
                VarMap::Mirror { col, hi } => {
                    out[col] -= a;
                    rhs -= a * hi;
                }
                VarMap::Split { pos, neg } => {
                    out[pos] += a;
                    out[neg] -= a;
                }
            }
        }
        (out, rhs)
    };

    let (objective, neg_offset) = substitute(&lp.objective, 0.0);
    let mut rows = Vec::new();
    for row in &lp.inequalities {
        let (c, r) = substitute(&row.coeffs, row.rhs);
        rows.push((c, r, false));
    }
    for (col, width) in upper_rows {
        let mut c = vec![0.0; cols];
        c[col] = 1.0;
        rows.push((c, width, false));
    }
    for row in &lp.equalities {
        let (c, r) = substitute(&row.coeffs, row.rhs);
        rows.push((c, r, true));
    }
    StandardForm {
        cols,
        objective,
        objective_offset: -neg_offset,
        rows,
        map,
    }
}

struct Tableau {
    width: usize,
    /// Row-major constraint rows; the last entry of each row is the rhs.
    data: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs followed by the current objective value.
    cost: Vec<f64>,
    blocked: Vec<bool>,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.basis.len()
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.width + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * (self.width + 1) + self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width + 1;
        let inv = 1.0 / self.at(r, c);
        for k in 0..w {
            self.data[r * w + k] *= inv;
        }
        self.data[r * w + c] = 1.0;
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows() {
            if i == r {
                continue;
            }
            let factor = self.data[i * w + c];
            if factor != 0.0 {
                for k in 0..w {
                    self.data[i * w + k] -= factor * pivot_row[k];
                }
                self.data[i * w + c] = 0.0;
            }
        }
        let factor = self.cost[c];
        if factor != 0.0 {
            for k in 0..w {
                self.cost[k] -= factor * pivot_row[k];
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs Bland's rule to optimality. Returns `false` when unbounded.
    fn optimize(&mut self, pivots: &mut usize) -> Result<bool> {
        loop {
            let entering = (0..self.width).find(|&j| !self.blocked[j] && self.cost[j] > REDUCED_COST_TOL);
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows() {
                let a = self.at(r, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((best, best_ratio)) => {
                            if ratio < best_ratio - 1e-12
                                || (ratio <= best_ratio + 1e-12 && self.basis[r] < self.basis[best])
                            {
                                Some((r, ratio))
                            } else {
                                Some((best, best_ratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leaving else {
                return Ok(false);
            };
            self.pivot(r, c);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::Solver(format!("simplex exceeded {MAX_PIVOTS} pivots")));
            }
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width + 1;
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
    }
}

/// Solves `lp`. Infeasibility and unboundedness are reported through the
/// status, not as errors; errors signal malformed input.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let sf = to_standard_form(lp);
    let n_le = sf.rows.iter().filter(|r| !r.2).count();
    let needs_art: Vec<bool> = sf.rows.iter().map(|(_, rhs, eq)| *eq || *rhs < 0.0).collect();
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let width = sf.cols + n_le + n_art;
    let m = sf.rows.len();

    let mut data = vec![0.0; m * (width + 1)];
    let mut basis = vec![0; m];
    let mut slack = sf.cols;
    let mut art = sf.cols + n_le;
    for (r, (coeffs, rhs, eq)) in sf.rows.iter().enumerate() {
        let row = &mut data[r * (width + 1)..(r + 1) * (width + 1)];
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        for (k, &a) in coeffs.iter().enumerate() {
            row[k] = sign * a;
        }
        row[width] = sign * rhs;
        if !*eq {
            row[slack] = sign;
            if !needs_art[r] {
                basis[r] = slack;
            }
            slack += 1;
        }
        if needs_art[r] {
            row[art] = 1.0;
            basis[r] = art;
            art += 1;
        }
    }

    let mut tableau = Tableau {
        width,
        data,
        basis,
        cost: vec![0.0; width + 1],
        blocked: vec![false; width],
    };
    let art_start = sf.cols + n_le;
    let mut pivots = 0;

    if n_art > 0 {
        // Phase one: maximize -sum(artificials).
        for r in 0..m {
            if tableau.basis[r] >= art_start {
                for k in 0..=width {
                    tableau.cost[k] += tableau.data[r * (width + 1) + k];
                }
            }
        }
        for k in art_start..width {
            tableau.cost[k] = 0.0;
        }
        tableau.optimize(&mut pivots)?;
        let infeasibility = tableau.cost[width];
        let scale = 1.0 + sf.rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
        if infeasibility > PHASE_ONE_TOL * scale {
            return Ok(LpSolution::without_point(LpStatus::Infeasible));
        }
        // Drive remaining artificials out of the basis.
        let mut r = 0;
        while r < tableau.rows() {
            if tableau.basis[r] >= art_start {
                let replacement = (0..art_start)
                    .filter(|&j| tableau.at(r, j).abs() > 1e-9)
                    .max_by(|&a, &b| tableau.at(r, a).abs().total_cmp(&tableau.at(r, b).abs()));
                match replacement {
                    Some(c) => {
                        tableau.pivot(r, c);
                        r += 1;
                    }
                    None => tableau.remove_row(r),
                }
            } else {
                r += 1;
            }
        }
        for k in art_start..width {
            tableau.blocked[k] = true;
        }
    }

    // Phase two.
    let mut full_cost = vec![0.0; width + 1];
    full_cost[..sf.cols].copy_from_slice(&sf.objective);
    tableau.cost = full_cost.clone();
    for r in 0..tableau.rows() {
        let cb = full_cost[tableau.basis[r]];
        if cb != 0.0 {
            for k in 0..=width {
                tableau.cost[k] -= cb * tableau.data[r * (width + 1) + k];
            }
        }
    }
    for r in 0..tableau.rows() {
        tableau.cost[tableau.basis[r]] = 0.0;
    }
    if !tableau.optimize(&mut pivots)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded));
    }

    let mut y = vec![0.0; sf.cols];
    for r in 0..tableau.rows() {
        let b = tableau.basis[r];
        if b < sf.cols {
            y[b] = tableau.rhs(r).max(0.0);
        }
    }
    let point: Vec<f64> = sf
        .map
        .iter()
        .map(|m| match *m {
            VarMap::Shift { col, lo } => lo + y[col],
            VarMap::Mirror { col, hi } => hi - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let objective = lp
        .objective
        .iter()
        .zip(&point)
        .map(|(c, x)| c * x)
        .sum::<f64>();
    debug_assert!((objective - (sf.objective.iter().zip(&y).map(|(c, v)| c * v).sum::<f64>() + sf.objective_offset)).abs() < 1e-6);
    let max_residual = lp.max_residual(&point);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        point,
        objective,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bounded_variable() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add_le(vec![1.0], 3.0);
        let sol = lp_solve(&lp).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.point[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_sum() {
        let mut lp = LinearProgram::maximize(vec![1.0; 4]);
        lp.add_eq(vec![1.0; 4], 1.0);
        let sol = lp_solve(&lp).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!(sol.max_residual < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add_le(vec![1.0], -1.0);
        assert_eq!(lp_solve(&lp).unwrap().status, LpStatus::Infeasible);

        let lp = LinearProgram::maximize(vec![1.0, 0.0]);
        assert_eq!(lp_solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_mirrored_variables() {
        // max t s.t. t <= -2 + x, x <= 1, t free, x in [-inf, 1].
        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.set_bounds(1, f64::NEG_INFINITY, 1.0);
        lp.add_le(vec![1.0, -1.0], -2.0);
        let sol = lp_solve(&lp).unwrap();
        assert!((sol.objective + 1.0).abs() < 1e-12, "{sol:?}");
    }

    #[test]
    fn ge_rows_and_redundant_equalities() {
        // min x + y (as max -x - y) with x + y >= 2, duplicate equality x - y = 0.
        let mut lp = LinearProgram::maximize(vec![-1.0, -1.0]);
        lp.add_ge(vec![1.0, 1.0], 2.0);
        lp.add_eq(vec![1.0, -1.0], 0.0);
        lp.add_eq(vec![2.0, -2.0], 0.0);
        let sol = lp_solve(&lp).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.objective + 2.0).abs() < 1e-12);
        assert!((sol.point[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic cycling example (Beale) for Dantzig's rule.
        let mut lp = LinearProgram::maximize(vec![0.75, -150.0, 0.02, -6.0]);
        lp.add_le(vec![0.25, -60.0, -0.04, 9.0], 0.0);
        lp.add_le(vec![0.5, -90.0, -0.02, 3.0], 0.0);
        lp.add_le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let sol = lp_solve(&lp).unwrap();
        assert!((sol.objective - 0.05).abs() < 1e-9, "{sol:?}");
    }

    #[test]
    fn rejects_inconsistent_bounds() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.set_bounds(0, 2.0, 1.0);
        assert!(lp_solve(&lp).is_err());
    }
}

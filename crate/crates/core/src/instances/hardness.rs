//! Gadget game built from a graph, together with the equilibrium it admits
//! when the graph has a large independent set.
//!
//! Player 0 actions: `a0, a1, a2`, one `a_v` per vertex, then `a_F`.
//! Player 1 actions: one `a_v` per vertex, one `bar a_v` per vertex, then `a_F`.
//! There is one shared cost function per vertex.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{ConstrainedGame, CorrelatedStrategy};

/// A simple undirected graph on vertices `0..vertices`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphInstance {
    vertices: usize,
    edges: Vec<(usize, usize)>,
    independent_set: Option<Vec<usize>>,
}

impl GraphInstance {
    pub fn new(vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            if u >= vertices || v >= vertices {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{vertices}"
                )));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at vertex {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidInput(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Self {
            vertices,
            edges: seen.into_iter().collect(),
            independent_set: None,
        })
    }

    /// Parses one `u v` pair per line (0-indexed). Blank lines and lines
    /// starting with `#` are ignored. Without `vertices`, the count is one
    /// more than the largest index seen.
    pub fn parse_edge_list(text: &str, vertices: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| {
                    Error::InvalidInput(format!("line {}: {s:?} is not a vertex index", lineno + 1))
                })
            };
            if parts.len() != 2 {
                return Err(Error::InvalidInput(format!(
                    "line {}: expected two vertex indices",
                    lineno + 1
                )));
            }
            edges.push((parse(parts[0])?, parse(parts[1])?));
        }
        let n = vertices.unwrap_or_else(|| edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0));
        Self::new(n, &edges)
    }

    pub fn with_independent_set(mut self, set: Vec<usize>) -> Result<Self> {
        self.check_independent(&set)?;
        self.independent_set = Some(set);
        Ok(self)
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn independent_set(&self) -> Option<&[usize]> {
        self.independent_set.as_deref()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    pub fn check_independent(&self, set: &[usize]) -> Result<()> {
        let unique: BTreeSet<usize> = set.iter().copied().collect();
        if unique.len() != set.len() {
            return Err(Error::InvalidInput("independent set repeats a vertex".into()));
        }
        if let Some(&v) = unique.iter().find(|&&v| v >= self.vertices) {
            return Err(Error::InvalidInput(format!("vertex {v} not in the graph")));
        }
        for &(u, v) in &self.edges {
            if unique.contains(&u) && unique.contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "vertices {u} and {v} of the set are adjacent"
                )));
            }
        }
        Ok(())
    }
}

/// Approximation target `alpha` and gap exponent `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GadgetParams {
    pub alpha: f64,
    pub delta: f64,
}

/// Constants of the construction for a graph on `ell` vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GadgetConstants {
    pub ell: usize,
    /// `ell^(1 - delta)`, the size of the planted independent set.
    pub large_set: usize,
    pub gamma: f64,
    pub eta: f64,
    pub epsilon: f64,
    /// `(ell - large_set) / (ell - large_set - 1)`.
    pub kappa: f64,
}

impl GadgetParams {
    pub fn constants(&self, ell: usize) -> Result<GadgetConstants> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidInput(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        let power = (ell as f64).powf(1.0 - self.delta);
        let large_set = power.round();
        if (power - large_set).abs() > 1e-9 * power.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "ell^(1-delta) = {power} is not integral for ell = {ell}, delta = {}",
                self.delta
            )));
        }
        let large_set = large_set as usize;
        if ell < large_set + 2 {
            return Err(Error::InvalidInput(format!(
                "ell - ell^(1-delta) = {} must be at least 2 (kappa <= 2) for ell = {ell}, delta = {}",
                ell as i64 - large_set as i64,
                self.delta
            )));
        }
        let gap = (ell - large_set) as f64;
        let gamma = self.alpha / 8.0;
        let eta = self.alpha / 8.0;
        let kappa = gap / (gap - 1.0);
        if gamma + kappa * eta > 1.0 {
            return Err(Error::InvalidInput(format!(
                "alpha = {} pushes utilities above 1",
                self.alpha
            )));
        }
        Ok(GadgetConstants {
            ell,
            large_set,
            gamma,
            eta,
            epsilon: self.alpha * self.alpha / (128.0 * (ell * ell) as f64),
            kappa,
        })
    }
}

/// Action indices of the gadget for a graph on `ell` vertices.
#[derive(Debug, Clone, Copy)]
pub struct GadgetActions {
    ell: usize,
}

impl GadgetActions {
    pub fn new(ell: usize) -> Self {
        Self { ell }
    }
    pub fn counts(&self) -> [usize; 2] {
        [self.ell + 4, 2 * self.ell + 1]
    }
    pub fn row_a(&self, k: usize) -> usize {
        debug_assert!(k < 3);
        k
    }
    pub fn row_vertex(&self, v: usize) -> usize {
        3 + v
    }
    pub fn row_f(&self) -> usize {
        3 + self.ell
    }
    pub fn col_vertex(&self, v: usize) -> usize {
        v
    }
    pub fn col_bar(&self, v: usize) -> usize {
        self.ell + v
    }
    pub fn col_f(&self) -> usize {
        2 * self.ell
    }
}

pub fn hardness_gadget(graph: &GraphInstance, params: &GadgetParams) -> Result<ConstrainedGame> {
    let ell = graph.vertices();
    let k = params.constants(ell)?;
    let act = GadgetActions::new(ell);
    let [rows, cols] = act.counts();
    let at = |r: usize, c: usize| r * cols + c;
    let (gamma, eta, kappa) = (k.gamma, k.eta, k.kappa);

    let mut u0 = vec![0.0; rows * cols];
    let mut u1 = vec![0.0; rows * cols];
    for c in 0..cols {
        if c == act.col_f() {
            continue;
        }
        u0[at(act.row_a(0), c)] = gamma + 0.5 * eta;
        u1[at(act.row_a(0), c)] = 1.0;
    }
    for v in 0..ell {
        u0[at(act.row_a(1), act.col_vertex(v))] = gamma + eta;
        u0[at(act.row_a(2), act.col_vertex(v))] = gamma;
        u0[at(act.row_a(1), act.col_bar(v))] = gamma;
        u0[at(act.row_a(2), act.col_bar(v))] = gamma + eta;
        for w in 0..ell {
            u0[at(act.row_vertex(v), act.col_vertex(w))] = gamma;
            u0[at(act.row_vertex(v), act.col_bar(w))] = if w == v { gamma } else { gamma + kappa * eta };
        }
    }

    let tiny = -1.0 / (4.0 * (ell * ell) as f64);
    let costs: Vec<Vec<f64>> = (0..ell)
        .map(|v| {
            let mut c = vec![0.0; rows * cols];
            for w in 0..ell {
                if w == v {
                    c[at(act.row_vertex(v), act.col_vertex(v))] = 1.0;
                } else if graph.has_edge(v, w) {
                    c[at(act.row_vertex(v), act.col_vertex(w))] = -1.0;
                }
            }
            for col in 0..cols {
                c[at(act.row_f(), col)] = tiny;
            }
            for row in 0..rows {
                c[at(row, act.col_f())] = tiny;
            }
            c
        })
        .collect();

    ConstrainedGame::new(&act.counts(), ell, vec![u0, u1], vec![costs.clone(), costs])
}

/// Player 0 always plays `a0`; player 1 is spread over `a_v` for `v` in the
/// independent set and over `bar a_v` for the remaining vertices.
pub fn completeness_strategy(
    graph: &GraphInstance,
    params: &GadgetParams,
    independent_set: &[usize],
) -> Result<CorrelatedStrategy> {
    let ell = graph.vertices();
    let k = params.constants(ell)?;
    graph.check_independent(independent_set)?;
    if independent_set.len() != k.large_set {
        return Err(Error::InvalidInput(format!(
            "independent set has {} vertices, expected ell^(1-delta) = {}",
            independent_set.len(),
            k.large_set
        )));
    }
    let act = GadgetActions::new(ell);
    let [rows, cols] = act.counts();
    let mut z = vec![0.0; rows * cols];
    let inside = 1.0 / (2.0 * k.large_set as f64);
    let outside = 1.0 / (2.0 * (ell - k.large_set) as f64);
    let row = act.row_a(0) * cols;
    for v in 0..ell {
        if independent_set.contains(&v) {
            z[row + act.col_vertex(v)] = inside;
        } else {
            z[row + act.col_bar(v)] = outside;
        }
    }
    CorrelatedStrategy::new(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{dot, is_safe};

    fn cycle8() -> GraphInstance {
        let edges: Vec<_> = (0..8).map(|v| (v, (v + 1) % 8)).collect();
        GraphInstance::new(8, &edges).unwrap()
    }

    fn params() -> GadgetParams {
        GadgetParams {
            alpha: 0.5,
            delta: 1.0 / 3.0,
        }
    }

    #[test]
    fn constants_for_eight_vertices() {
        let k = params().constants(8).unwrap();
        assert_eq!(k.large_set, 4);
        assert!((k.kappa - 4.0 / 3.0).abs() < 1e-15);
        assert!((k.gamma - 1.0 / 16.0).abs() < 1e-15);
        assert!((k.epsilon - 0.25 / (128.0 * 64.0)).abs() < 1e-18);
    }

    #[test]
    fn rejects_non_integral_and_small_gaps() {
        assert!(GadgetParams { alpha: 0.5, delta: 0.3 }.constants(8).is_err());
        // ell = 4, delta = 1/2: ell - ell^(1/2) = 2 is the smallest admissible gap.
        assert!(GadgetParams { alpha: 0.5, delta: 0.5 }.constants(4).is_ok());
        // ell = 1: 1^(1 - delta) = 1 leaves no room.
        assert!(GadgetParams { alpha: 0.5, delta: 0.5 }.constants(1).is_err());
    }

    #[test]
    fn gadget_shape_and_entries() {
        let g = hardness_gadget(&cycle8(), &params()).unwrap();
        assert_eq!(g.action_counts(), &[12, 17]);
        assert_eq!(g.constraints(), 8);
        let act = GadgetActions::new(8);
        let idx = g.profiles();
        let alpha = 0.5;
        let p = idx.encode(&[act.row_a(0), act.col_vertex(3)]);
        assert!((g.utility(0)[p] - 3.0 * alpha / 16.0).abs() < 1e-15);
        for col in 0..17 {
            let p = idx.encode(&[act.row_f(), col]);
            for v in 0..8 {
                assert_eq!(g.cost(0, v)[p], -1.0 / 256.0);
            }
        }
        let p = idx.encode(&[act.row_vertex(2), act.col_vertex(3)]);
        assert_eq!(g.cost(1, 2)[p], -1.0);
        let p = idx.encode(&[act.row_vertex(2), act.col_vertex(5)]);
        assert_eq!(g.cost(1, 2)[p], 0.0);
        let p = idx.encode(&[act.row_vertex(2), act.col_vertex(2)]);
        assert_eq!(g.cost(0, 2)[p], 1.0);
    }

    #[test]
    fn completeness_strategy_entries() {
        let graph = cycle8();
        let z = completeness_strategy(&graph, &params(), &[0, 2, 4, 6]).unwrap();
        let nonzero: Vec<f64> = z.probs().iter().copied().filter(|&p| p > 0.0).collect();
        assert_eq!(nonzero.len(), 8);
        assert!(nonzero.iter().all(|&p| (p - 0.125).abs() < 1e-15));
        let g = hardness_gadget(&graph, &params()).unwrap();
        assert!(is_safe(&g, &z, 0.0).unwrap().safe);
        let welfare = dot(g.utility(0), z.probs()) + dot(g.utility(1), z.probs());
        assert!(welfare >= 1.0);
    }

    #[test]
    fn completeness_rejects_bad_sets() {
        let graph = cycle8();
        assert!(completeness_strategy(&graph, &params(), &[0, 1, 4, 6]).is_err());
        assert!(completeness_strategy(&graph, &params(), &[0, 2, 4]).is_err());
    }

    #[test]
    fn edge_list_parsing() {
        let g = GraphInstance::parse_edge_list("# ring\n0 1\n1 2\n\n2 0\n", None).unwrap();
        assert_eq!(g.vertices(), 3);
        assert!(g.has_edge(0, 2));
        assert!(GraphInstance::parse_edge_list("0 0\n", None).is_err());
        assert!(GraphInstance::parse_edge_list("0 x\n", None).is_err());
        assert_eq!(GraphInstance::parse_edge_list("0 1\n", Some(5)).unwrap().vertices(), 5);
    }
}

//! Cost-constrained normal-form games, correlated strategies and deviations.
//!
//! Joint action profiles are stored flat, row-major, with player 0 varying
//! slowest. For a game with action counts `[s_0, ..., s_{n-1}]` the profile
//! `(a_0, ..., a_{n-1})` lives at `sum_i a_i * stride_i` where
//! `stride_{n-1} = 1` and `stride_i = stride_{i+1} * s_{i+1}`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default feasibility tolerance for probabilities, costs and memberships.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Default tolerance for equilibrium gaps.
pub const GAP_TOL: f64 = 1e-6;

/// Negative probabilities down to this value are treated as rounding noise.
pub const NEGATIVE_CLAMP: f64 = -1e-12;

/// Bijection between action tuples and flat profile indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileIndex {
    actions: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl ProfileIndex {
    pub fn new(actions: &[usize]) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidInput("a game needs at least one player".into()));
        }
        if let Some(i) = actions.iter().position(|&s| s == 0) {
            return Err(Error::InvalidInput(format!("player {i} has no actions")));
        }
        let mut strides = vec![1usize; actions.len()];
        for i in (0..actions.len() - 1).rev() {
            strides[i] = strides[i + 1]
                .checked_mul(actions[i + 1])
                .ok_or_else(|| Error::InvalidInput("profile space too large".into()))?;
        }
        let len = strides[0]
            .checked_mul(actions[0])
            .ok_or_else(|| Error::InvalidInput("profile space too large".into()))?;
        Ok(Self {
            actions: actions.to_vec(),
            strides,
            len,
        })
    }

    /// Number of joint profiles.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn players(&self) -> usize {
        self.actions.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.actions
    }

    pub fn actions(&self, player: usize) -> usize {
        self.actions[player]
    }

    pub fn stride(&self, player: usize) -> usize {
        self.strides[player]
    }

    pub fn encode(&self, profile: &[usize]) -> usize {
        debug_assert_eq!(profile.len(), self.actions.len());
        profile
            .iter()
            .zip(&self.strides)
            .map(|(&a, &stride)| a * stride)
            .sum()
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut profile = vec![0; self.actions.len()];
        for (slot, &stride) in profile.iter_mut().zip(&self.strides) {
            *slot = index / stride;
            index %= stride;
        }
        profile
    }

    /// Action of `player` in the profile stored at `index`.
    #[inline]
    pub fn action_of(&self, index: usize, player: usize) -> usize {
        (index / self.strides[player]) % self.actions[player]
    }

    /// Index of the profile obtained by replacing `player`'s action with `action`.
    #[inline]
    pub fn with_action(&self, index: usize, player: usize, action: usize) -> usize {
        let current = self.action_of(index, player);
        index - current * self.strides[player] + action * self.strides[player]
    }

    fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.players() {
            return Err(Error::PlayerIndex {
                player,
                players: self.players(),
            });
        }
        Ok(())
    }
}

/// A normal-form game in which every player also carries `m` cost functions.
///
/// Utilities are in `[0, 1]`, costs in `[-1, 1]`; a correlated strategy is
/// safe for player `i` when every expected cost of `i` is non-positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedGame {
    index: ProfileIndex,
    constraints: usize,
    utilities: Vec<Vec<f64>>,
    costs: Vec<Vec<Vec<f64>>>,
}

impl ConstrainedGame {
    pub fn new(
        actions: &[usize],
        constraints: usize,
        utilities: Vec<Vec<f64>>,
        costs: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let index = ProfileIndex::new(actions)?;
        let n = actions.len();
        if utilities.len() != n {
            return Err(Error::Dimension {
                what: "utilities (players)".into(),
                expected: n,
                found: utilities.len(),
            });
        }
        if costs.len() != n {
            return Err(Error::Dimension {
                what: "costs (players)".into(),
                expected: n,
                found: costs.len(),
            });
        }
        for (i, u) in utilities.iter().enumerate() {
            if u.len() != index.len() {
                return Err(Error::Dimension {
                    what: format!("utilities of player {i}"),
                    expected: index.len(),
                    found: u.len(),
                });
            }
            if let Some(p) = u.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidInput(format!(
                    "utility of player {i} at profile {:?} is {} (must lie in [0, 1])",
                    index.decode(p),
                    u[p]
                )));
            }
        }
        for (i, per_player) in costs.iter().enumerate() {
            if per_player.len() != constraints {
                return Err(Error::Dimension {
                    what: format!("cost functions of player {i}"),
                    expected: constraints,
                    found: per_player.len(),
                });
            }
            for (j, c) in per_player.iter().enumerate() {
                if c.len() != index.len() {
                    return Err(Error::Dimension {
                        what: format!("cost {j} of player {i}"),
                        expected: index.len(),
                        found: c.len(),
                    });
                }
                if let Some(p) = c.iter().position(|v| !(-1.0..=1.0).contains(v)) {
                    return Err(Error::InvalidInput(format!(
                        "cost {j} of player {i} at profile {:?} is {} (must lie in [-1, 1])",
                        index.decode(p),
                        c[p]
                    )));
                }
            }
        }
        Ok(Self {
            index,
            constraints,
            utilities,
            costs,
        })
    }

    pub fn profiles(&self) -> &ProfileIndex {
        &self.index
    }

    pub fn players(&self) -> usize {
        self.index.players()
    }

    pub fn actions(&self, player: usize) -> usize {
        self.index.actions(player)
    }

    pub fn action_counts(&self) -> &[usize] {
        self.index.action_counts()
    }

    /// Number of cost constraints per player.
    pub fn constraints(&self) -> usize {
        self.constraints
    }

    pub fn utility(&self, player: usize) -> &[f64] {
        &self.utilities[player]
    }

    pub fn cost(&self, player: usize, constraint: usize) -> &[f64] {
        &self.costs[player][constraint]
    }

    pub fn utilities(&self) -> &[Vec<f64>] {
        &self.utilities
    }

    pub fn costs(&self) -> &[Vec<Vec<f64>>] {
        &self.costs
    }

    pub fn check_player(&self, player: usize) -> Result<()> {
        self.index.check_player(player)
    }

    pub fn check_strategy(&self, z: &CorrelatedStrategy) -> Result<()> {
        if z.len() != self.index.len() {
            return Err(Error::Dimension {
                what: "correlated strategy (profiles)".into(),
                expected: self.index.len(),
                found: z.len(),
            });
        }
        Ok(())
    }

    pub fn check_deviation(&self, phi: &Deviation) -> Result<()> {
        self.check_player(phi.owner())?;
        let s = self.actions(phi.owner());
        if phi.size() != s {
            return Err(Error::Dimension {
                what: format!("deviation matrix of player {}", phi.owner()),
                expected: s,
                found: phi.size(),
            });
        }
        Ok(())
    }
}

/// A probability distribution over joint action profiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CorrelatedStrategy(Vec<f64>);

impl CorrelatedStrategy {
    /// Validates and normalizes a probability vector.
    ///
    /// Entries in `[-1e-12, 0)` are clamped to zero and the vector is
    /// renormalized; anything more negative, or a total mass further than
    /// `1e-9` from one, is rejected.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("empty correlated strategy".into()));
        }
        for (k, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite(format!("strategy entry {k}")));
            }
            if *p < NEGATIVE_CLAMP {
                return Err(Error::InvalidInput(format!(
                    "strategy entry {k} is negative ({p})"
                )));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > FEASIBILITY_TOL {
            return Err(Error::InvalidInput(format!(
                "strategy mass is {total}, expected 1"
            )));
        }
        if total != 1.0 {
            for p in &mut probs {
                *p /= total;
            }
        }
        Ok(Self(probs))
    }

    pub fn point_mass(len: usize, at: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[at] = 1.0;
        Self(probs)
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0 / len as f64; len])
    }

    /// Product distribution of per-player marginals.
    pub fn product(index: &ProfileIndex, marginals: &[Vec<f64>]) -> Result<Self> {
        if marginals.len() != index.players() {
            return Err(Error::Dimension {
                what: "marginals (players)".into(),
                expected: index.players(),
                found: marginals.len(),
            });
        }
        for (i, x) in marginals.iter().enumerate() {
            if x.len() != index.actions(i) {
                return Err(Error::Dimension {
                    what: format!("marginal of player {i}"),
                    expected: index.actions(i),
                    found: x.len(),
                });
            }
        }
        let probs = (0..index.len())
            .map(|p| {
                marginals
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x[index.action_of(p, i)])
                    .product()
            })
            .collect();
        Self::new(probs)
    }

    /// Convex combination `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &Self, alpha: f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::Dimension {
                what: "strategy mixture".into(),
                expected: self.len(),
                found: other.len(),
            });
        }
        Self::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect(),
        )
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Marginal distribution of `player`'s recommended action.
    pub fn marginal(&self, index: &ProfileIndex, player: usize) -> Vec<f64> {
        let mut x = vec![0.0; index.actions(player)];
        for (p, &mass) in self.0.iter().enumerate() {
            x[index.action_of(p, player)] += mass;
        }
        x
    }
}

/// A row-stochastic matrix `phi[b][a]`: probability of playing `a` when `b`
/// is recommended to `owner`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    owner: usize,
    size: usize,
    #[serde(serialize_with = "serialize_rows")]
    phi: Vec<f64>,
}

fn serialize_rows<S: serde::Serializer>(
    phi: &[f64],
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let size = (phi.len() as f64).sqrt().round() as usize;
    let mut seq = serializer.serialize_seq(Some(size))?;
    for row in phi.chunks(size.max(1)) {
        seq.serialize_element(row)?;
    }
    seq.end()
}

impl Deviation {
    /// Builds a deviation from a flat row-major `size x size` matrix.
    pub fn new(owner: usize, size: usize, mut phi: Vec<f64>) -> Result<Self> {
        if size == 0 || phi.len() != size * size {
            return Err(Error::Dimension {
                what: format!("deviation matrix of player {owner}"),
                expected: size * size,
                found: phi.len(),
            });
        }
        for (k, v) in phi.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("deviation entry {k}")));
            }
            if *v < -FEASIBILITY_TOL || *v > 1.0 + FEASIBILITY_TOL {
                return Err(Error::InvalidInput(format!(
                    "deviation entry ({}, {}) = {v} outside [0, 1]",
                    k / size,
                    k % size
                )));
            }
            *v = v.clamp(0.0, 1.0);
        }
        for (b, row) in phi.chunks(size).enumerate() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > FEASIBILITY_TOL {
                return Err(Error::InvalidInput(format!(
                    "row {b} of the deviation sums to {total}"
                )));
            }
        }
        Ok(Self { owner, size, phi })
    }

    pub fn from_rows(owner: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if let Some(b) = rows.iter().position(|r| r.len() != size) {
            return Err(Error::Dimension {
                what: format!("row {b} of deviation matrix"),
                expected: size,
                found: rows[b].len(),
            });
        }
        Self::new(owner, size, rows.concat())
    }

    pub fn identity(owner: usize, size: usize) -> Self {
        let mut phi = vec![0.0; size * size];
        for b in 0..size {
            phi[b * size + b] = 1.0;
        }
        Self { owner, size, phi }
    }

    /// The deviation that ignores the recommendation and plays `h`.
    pub fn constant_rows(owner: usize, h: &[f64]) -> Result<Self> {
        let size = h.len();
        Self::new(owner, size, h.repeat(size))
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.phi[from * self.size + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.phi[from * self.size..(from + 1) * self.size]
    }

    /// Flat row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.phi
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.phi.chunks(self.size).map(<[f64]>::to_vec).collect()
    }

    /// Convex combination `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &Self, alpha: f64) -> Result<Self> {
        if self.owner != other.owner || self.size != other.size {
            return Err(Error::InvalidInput("mixing deviations of different shapes".into()));
        }
        Self::new(
            self.owner,
            self.size,
            self.phi
                .iter()
                .zip(&other.phi)
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect(),
        )
    }
}

/// `(phi <> z)[a_i, a_-i] = sum_b phi[b, a_i] z[b, a_-i]` on raw slices.
pub(crate) fn push_forward(index: &ProfileIndex, z: &[f64], player: usize, phi: &[f64]) -> Vec<f64> {
    let s = index.actions(player);
    let stride = index.stride(player);
    let mut out = vec![0.0; z.len()];
    for (p, &mass) in z.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let b = index.action_of(p, player);
        let base = p - b * stride;
        let row = &phi[b * s..(b + 1) * s];
        for (a, &w) in row.iter().enumerate() {
            if w != 0.0 {
                out[base + a * stride] += w * mass;
            }
        }
    }
    out
}

/// Coefficients of the linear map `phi -> sum_a T(a) (phi <> z)(a)`.
///
/// Entry `[b, a]` is `sum_{a_-i} T(a, a_-i) z[b, a_-i]`, so that the value of
/// any deviation is the Frobenius product of `phi` with this matrix.
pub fn deviation_coefficients(
    index: &ProfileIndex,
    tensor: &[f64],
    z: &[f64],
    player: usize,
) -> Vec<f64> {
    let s = index.actions(player);
    let stride = index.stride(player);
    let mut coeffs = vec![0.0; s * s];
    for (p, &mass) in z.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let b = index.action_of(p, player);
        let base = p - b * stride;
        for a in 0..s {
            coeffs[b * s + a] += mass * tensor[base + a * stride];
        }
    }
    coeffs
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modification of `z` induced by `phi`.
pub fn apply_deviation(
    game: &ConstrainedGame,
    z: &CorrelatedStrategy,
    phi: &Deviation,
) -> Result<CorrelatedStrategy> {
    game.check_strategy(z)?;
    game.check_deviation(phi)?;
    CorrelatedStrategy::new(push_forward(
        game.profiles(),
        z.probs(),
        phi.owner(),
        phi.entries(),
    ))
}

pub fn expected_utility(game: &ConstrainedGame, z: &CorrelatedStrategy, player: usize) -> Result<f64> {
    game.check_player(player)?;
    game.check_strategy(z)?;
    Ok(dot(game.utility(player), z.probs()))
}

pub fn expected_costs(
    game: &ConstrainedGame,
    z: &CorrelatedStrategy,
    player: usize,
) -> Result<Vec<f64>> {
    game.check_player(player)?;
    game.check_strategy(z)?;
    Ok((0..game.constraints())
        .map(|j| dot(game.cost(player, j), z.probs()))
        .collect())
}

/// Per-player, per-constraint safety residuals (expected costs).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyReport {
    pub safe: bool,
    pub residuals: Vec<Vec<f64>>,
    pub max_residual: f64,
}

impl SafetyReport {
    pub fn player_safe(&self, player: usize, tol: f64) -> bool {
        self.residuals[player].iter().all(|&r| r <= tol)
    }
}

pub fn is_safe(game: &ConstrainedGame, z: &CorrelatedStrategy, tol: f64) -> Result<SafetyReport> {
    game.check_strategy(z)?;
    let residuals: Vec<Vec<f64>> = (0..game.players())
        .map(|i| expected_costs(game, z, i))
        .collect::<Result<_>>()?;
    let max_residual = residuals
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SafetyReport {
        safe: max_residual <= tol,
        residuals,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_game() -> ConstrainedGame {
        // u_1 = 0, u_2(a0, a1) = 1; shared cost.
        let cost = vec![-0.5, 1.0, -1.0, -1.0];
        ConstrainedGame::new(
            &[2, 2],
            1,
            vec![vec![0.0; 4], vec![0.0, 1.0, 0.0, 0.0]],
            vec![vec![cost.clone()], vec![cost]],
        )
        .unwrap()
    }

    #[test]
    fn profile_index_round_trip() {
        for actions in [vec![1], vec![2, 3], vec![3, 1, 4], vec![5, 5, 5]] {
            let idx = ProfileIndex::new(&actions).unwrap();
            for p in 0..idx.len() {
                assert_eq!(idx.encode(&idx.decode(p)), p);
            }
        }
    }

    #[test]
    fn first_player_varies_slowest() {
        let idx = ProfileIndex::new(&[2, 3]).unwrap();
        assert_eq!(idx.decode(1), vec![0, 1]);
        assert_eq!(idx.decode(3), vec![1, 0]);
        assert_eq!(idx.with_action(4, 0, 0), 1);
    }

    #[test]
    fn rejects_out_of_range_entries() {
        let err = ConstrainedGame::new(&[1], 0, vec![vec![1.5]], vec![vec![]]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        let err = ConstrainedGame::new(&[1], 1, vec![vec![0.5]], vec![vec![vec![-2.0]]]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        let err = ConstrainedGame::new(&[2], 0, vec![vec![0.5]], vec![vec![]]);
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn strategy_clamps_tiny_negatives_only() {
        let z = CorrelatedStrategy::new(vec![-1e-13, 0.5, 0.5]).unwrap();
        assert_eq!(z.probs()[0], 0.0);
        assert!(CorrelatedStrategy::new(vec![-1e-6, 0.5, 0.5 + 1e-6]).is_err());
        assert!(CorrelatedStrategy::new(vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn identity_deviation_is_neutral() {
        let game = example_game();
        let z = CorrelatedStrategy::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        for i in 0..2 {
            let out = apply_deviation(&game, &z, &Deviation::identity(i, 2)).unwrap();
            assert_eq!(out, z);
        }
    }

    #[test]
    fn uniform_rows_make_own_marginal_uniform() {
        let game = example_game();
        let z = CorrelatedStrategy::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let phi = Deviation::constant_rows(1, &[0.5, 0.5]).unwrap();
        let out = apply_deviation(&game, &z, &phi).unwrap();
        let own = out.marginal(game.profiles(), 1);
        let other = out.marginal(game.profiles(), 0);
        assert!((own[0] - 0.5).abs() < 1e-15 && (own[1] - 0.5).abs() < 1e-15);
        let before = z.marginal(game.profiles(), 0);
        assert!((other[0] - before[0]).abs() < 1e-15);
    }

    #[test]
    fn point_mass_on_costly_profile_is_unsafe() {
        let game = example_game();
        let z = CorrelatedStrategy::point_mass(4, 1);
        let report = is_safe(&game, &z, FEASIBILITY_TOL).unwrap();
        assert!(!report.safe);
        assert_eq!(report.max_residual, 1.0);
    }

    #[test]
    fn dimension_errors_name_the_player() {
        let game = example_game();
        let z = CorrelatedStrategy::uniform(4);
        let phi = Deviation::identity(1, 3);
        let err = apply_deviation(&game, &z, &phi).unwrap_err();
        assert!(err.to_string().contains("player 1"));
        assert!(matches!(
            expected_utility(&game, &z, 5),
            Err(Error::PlayerIndex { .. })
        ));
    }
}

use crate::game::{ConstrainedGame, CorrelatedStrategy, Deviation};

/// The two-player, two-action game whose constrained equilibria are not convex.
///
/// Player 0 is indifferent everywhere; player 1 earns 1 only at `(a0, a1)`.
/// Both share one cost: `1` at `(a0, a1)`, `-1/2` at `(a0, a0)`, `-1` when
/// player 0 plays `a1`. `z1` and `z2` are equilibria, their midpoint `z3` is
/// not, and `phi2` is player 1's profitable safe deviation at `z3`.
#[derive(Debug, Clone)]
pub struct Example1 {
    pub game: ConstrainedGame,
    pub z1: CorrelatedStrategy,
    pub z2: CorrelatedStrategy,
    pub z3: CorrelatedStrategy,
    pub phi2: Deviation,
}

pub fn example1() -> Example1 {
    // Profile order: (a0,a0), (a0,a1), (a1,a0), (a1,a1).
    let cost = vec![-0.5, 1.0, -1.0, -1.0];
    let game = ConstrainedGame::new(
        &[2, 2],
        1,
        vec![vec![0.0; 4], vec![0.0, 1.0, 0.0, 0.0]],
        vec![vec![cost.clone()], vec![cost]],
    )
    .expect("example game is well formed");
    let z1 = CorrelatedStrategy::new(vec![2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0]).expect("valid z1");
    let z2 = CorrelatedStrategy::point_mass(4, 2);
    let z3 = z1.mix(&z2, 0.5).expect("same shape");
    let phi2 = Deviation::from_rows(1, &[vec![0.0, 1.0], vec![0.0, 1.0]]).expect("valid phi2");
    Example1 {
        game,
        z1,
        z2,
        z3,
        phi2,
    }
}

//! JSON file formats for games, strategies, deviation polytopes and objectives.
//!
//! Numbers are written with the shortest representation that parses back to
//! the same double, so every file round-trips bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::deviation::{DeviationPolytope, PolytopePreset, PolytopeRow};
use crate::error::{Error, Result};
use crate::game::{ConstrainedGame, CorrelatedStrategy};
use crate::special::LinearObjective;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub n: usize,
    pub actions: Vec<usize>,
    pub m: usize,
    pub utilities: Vec<Vec<f64>>,
    pub costs: Vec<Vec<Vec<f64>>>,
}

impl From<&ConstrainedGame> for GameFile {
    fn from(game: &ConstrainedGame) -> Self {
        Self {
            n: game.players(),
            actions: game.action_counts().to_vec(),
            m: game.constraints(),
            utilities: game.utilities().to_vec(),
            costs: game.costs().to_vec(),
        }
    }
}

impl TryFrom<GameFile> for ConstrainedGame {
    type Error = Error;

    fn try_from(file: GameFile) -> Result<Self> {
        if file.n != file.actions.len() {
            return Err(Error::Dimension {
                what: "\"actions\" (one count per player)".into(),
                expected: file.n,
                found: file.actions.len(),
            });
        }
        ConstrainedGame::new(&file.actions, file.m, file.utilities, file.costs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyFile {
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeRowFile {
    #[serde(rename = "M")]
    pub m: Vec<Vec<f64>>,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeFile {
    pub owner: usize,
    pub rows: Vec<PolytopeRowFile>,
}

impl From<&DeviationPolytope> for PolytopeFile {
    fn from(poly: &DeviationPolytope) -> Self {
        let s = poly.size();
        Self {
            owner: poly.owner(),
            rows: poly
                .rows()
                .iter()
                .map(|r| PolytopeRowFile {
                    m: r.coeffs.chunks(s).map(<[f64]>::to_vec).collect(),
                    d: r.bound,
                })
                .collect(),
        }
    }
}

impl PolytopeFile {
    pub fn into_polytope(self, game: &ConstrainedGame) -> Result<DeviationPolytope> {
        game.check_player(self.owner)?;
        let s = game.actions(self.owner);
        let mut rows = Vec::with_capacity(self.rows.len());
        for (r, row) in self.rows.into_iter().enumerate() {
            if row.m.len() != s || row.m.iter().any(|line| line.len() != s) {
                return Err(Error::InvalidInput(format!(
                    "row {r} of the polytope of player {} must be a {s}x{s} matrix",
                    self.owner
                )));
            }
            rows.push(PolytopeRow {
                coeffs: row.m.concat(),
                bound: row.d,
            });
        }
        DeviationPolytope::custom(self.owner, s, rows)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(PolytopeFile),
    Many(Vec<PolytopeFile>),
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::InvalidInput(format!("cannot read {}: {e}", path.display()))
    })
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("malformed {}: {e}", path.display())))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = to_json(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn game_from_json(text: &str) -> Result<ConstrainedGame> {
    let file: GameFile = serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("malformed game: {e}")))?;
    file.try_into()
}

pub fn game_to_json(game: &ConstrainedGame) -> Result<String> {
    to_json(&GameFile::from(game))
}

pub fn load_game(path: &Path) -> Result<ConstrainedGame> {
    parse::<GameFile>(&read(path)?, path)?.try_into()
}

pub fn save_game(path: &Path, game: &ConstrainedGame) -> Result<()> {
    write_json(path, &GameFile::from(game))
}

pub fn load_strategy(path: &Path, game: &ConstrainedGame) -> Result<CorrelatedStrategy> {
    let file: StrategyFile = parse(&read(path)?, path)?;
    let z = CorrelatedStrategy::new(file.z)?;
    game.check_strategy(&z)?;
    Ok(z)
}

pub fn save_strategy(path: &Path, z: &CorrelatedStrategy) -> Result<()> {
    write_json(
        path,
        &StrategyFile {
            z: z.probs().to_vec(),
        },
    )
}

/// Polytopes listed in a file; players without an entry get every deviation.
pub fn load_polytopes(path: &Path, game: &ConstrainedGame) -> Result<Vec<DeviationPolytope>> {
    let files = match parse::<OneOrMany>(&read(path)?, path)? {
        OneOrMany::One(f) => vec![f],
        OneOrMany::Many(fs) => fs,
    };
    let mut polys: Vec<Option<DeviationPolytope>> = vec![None; game.players()];
    for f in files {
        let owner = f.owner;
        let poly = f.into_polytope(game)?;
        if polys.get(owner).is_some_and(Option::is_some) {
            return Err(Error::InvalidInput(format!("two polytopes given for player {owner}")));
        }
        polys[owner] = Some(poly);
    }
    Ok(polys
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.unwrap_or_else(|| DeviationPolytope::all(i, game.actions(i))))
        .collect())
}

/// Resolves `ALL`, `CCE` or `file:PATH` into one polytope per player.
pub fn resolve_polytopes(spec: &str, game: &ConstrainedGame) -> Result<Vec<DeviationPolytope>> {
    if let Some(path) = spec.strip_prefix("file:") {
        return load_polytopes(Path::new(path), game);
    }
    let preset: PolytopePreset = spec.parse()?;
    if preset == PolytopePreset::Custom {
        return Err(Error::InvalidInput("custom polytopes are given as file:PATH".into()));
    }
    Ok((0..game.players())
        .map(|i| DeviationPolytope::preset(i, game.actions(i), preset))
        .collect())
}

pub fn load_objective(path: &Path, game: &ConstrainedGame) -> Result<LinearObjective> {
    let objective: LinearObjective = parse(&read(path)?, path)?;
    let objective = LinearObjective::new(objective.coefficients)?;
    if objective.coefficients.len() != game.profiles().len() {
        return Err(Error::Dimension {
            what: "objective coefficients".into(),
            expected: game.profiles().len(),
            found: objective.coefficients.len(),
        });
    }
    Ok(objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{example1, random_marginal_instance};

    #[test]
    fn game_round_trip_is_exact() {
        for game in [example1().game, random_marginal_instance(3, 2, 2, 17).unwrap()] {
            let back = game_from_json(&game_to_json(&game).unwrap()).unwrap();
            assert_eq!(back, game);
            for (a, b) in back.utilities().iter().flatten().zip(game.utilities().iter().flatten()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn rejects_schema_violations() {
        assert!(game_from_json("{\"n\":1}").is_err());
        let bad_n = r#"{"n":2,"actions":[2],"m":0,"utilities":[[0,0]],"costs":[[]]}"#;
        assert!(game_from_json(bad_n).is_err());
        let out_of_range = r#"{"n":1,"actions":[2],"m":0,"utilities":[[0,2]],"costs":[[]]}"#;
        assert!(game_from_json(out_of_range).is_err());
    }

    #[test]
    fn polytope_files() {
        let dir = std::env::temp_dir().join(format!("ccg-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let game = example1().game;
        let cce = DeviationPolytope::cce(1, 2);
        let path = dir.join("p.json");
        write_json(&path, &PolytopeFile::from(&cce)).unwrap();
        let polys = load_polytopes(&path, &game).unwrap();
        assert_eq!(polys[0].preset_tag(), PolytopePreset::All);
        assert_eq!(polys[1].rows(), cce.rows());
        assert_eq!(resolve_polytopes("cce", &game).unwrap()[1], cce);
        assert!(resolve_polytopes("SWAP", &game).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }
}

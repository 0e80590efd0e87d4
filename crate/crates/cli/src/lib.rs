//! Command-line front end: argument parsing, file ingestion and report output.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ccg_core::instances::{
    completeness_strategy, example1, hardness_gadget, random_marginal_game, random_safe_game, BruteOptions,
    GadgetParams, GraphInstance,
};
use ccg_core::io::{
    load_game, load_objective, load_strategy, resolve_polytopes, save_game, save_strategy, to_json, write_json,
};
use ccg_core::learning::{run_dynamics, LearningTrace};
use ccg_core::{
    best_safe_deviation, strict_feasibility, verify_with, ConstrainedGame, DeviationPolytope, Error,
    LinearObjective, Tolerances, FEASIBILITY_TOL, GAP_TOL,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT_FALSE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Header of the learning trace CSV.
pub const TRACE_HEADER: &str = "t,player,regret,gap_bound,max_cost_residual,utility_avg";

#[derive(Debug, Parser)]
#[command(name = "ccg", version, about = "Constrained Phi-equilibria of cost-constrained games")]
pub struct RunConfig {
    /// Upper bound on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write instance files.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Check a strategy for safety and safe-deviation incentives.
    Verify(VerifyArgs),
    /// Best safe deviation of one player at a strategy.
    BestDev(BestDevArgs),
    /// Optimal equilibrium when safe deviation sets do not depend on the strategy.
    SolveSpecial(SolveArgs),
    /// Run the no-regret dynamics and write a checkpoint trace.
    Learn(LearnArgs),
    /// Grid brute-force search for the best epsilon-equilibrium.
    Oracle(OracleArgs),
    /// Strict feasibility margin of each player at a strategy.
    StrictFeas(StrictArgs),
    /// Run the property and acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// The two-player example with non-convex equilibria.
    Example1 {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Gadget game built from a graph given as an edge list.
    Hardness(HardnessArgs),
    /// Seeded random game.
    Random(RandomArgs),
}

#[derive(Debug, Args)]
pub struct HardnessArgs {
    /// Edge list, one "u v" pair per line, 0-indexed.
    #[arg(long)]
    pub graph: PathBuf,
    /// Vertex count; defaults to one more than the largest index in the list.
    #[arg(long)]
    pub vertices: Option<usize>,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub delta: f64,
    /// Comma-separated independent set; also writes the completeness strategy.
    #[arg(long, value_delimiter = ',')]
    pub independent_set: Option<Vec<usize>>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RandomKind {
    /// Costs depend only on the owner's action.
    Marginal,
    /// Arbitrary costs with a strictly safe action per player.
    Safe,
}

#[derive(Debug, Args)]
pub struct RandomArgs {
    #[arg(long, default_value_t = 2)]
    pub players: usize,
    /// Actions per player.
    #[arg(long, default_value_t = 2)]
    pub actions: usize,
    #[arg(long, default_value_t = 1)]
    pub constraints: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = RandomKind::Marginal)]
    pub kind: RandomKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GameArgs {
    #[arg(long)]
    pub game: PathBuf,
    /// ALL, CCE or file:PATH.
    #[arg(long, default_value = "ALL")]
    pub phi: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long)]
    pub strategy: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Slack on top of eps when judging gaps.
    #[arg(long, default_value_t = GAP_TOL)]
    pub gap_tol: f64,
    /// Largest expected cost counted as safe.
    #[arg(long, default_value_t = FEASIBILITY_TOL)]
    pub safety_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BestDevArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long)]
    pub strategy: PathBuf,
    /// 0-indexed player.
    #[arg(long)]
    pub player: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// JSON file {"coefficients": [...]} or the word "welfare".
    #[arg(long, default_value = "welfare")]
    pub objective: String,
    /// Largest final gap accepted before reporting a solver error.
    #[arg(long, default_value_t = GAP_TOL)]
    pub tol: f64,
    /// Where to write the optimal strategy.
    #[arg(long)]
    pub strategy_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV file receiving one row per player and checkpoint.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also verify the running average at every checkpoint.
    #[arg(long)]
    pub checkpoints: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long, default_value = "welfare")]
    pub objective: String,
    #[arg(long)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Search nodes before giving up with a partial result.
    #[arg(long, default_value_t = ccg_core::instances::brute::DEFAULT_NODE_BUDGET)]
    pub budget: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StrictArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long)]
    pub strategy: PathBuf,
    /// Only this player (default: all).
    #[arg(long)]
    pub player: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 300)]
    pub budget: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Solver(_)
            | Error::IterationCap(_)
            | Error::MasterInfeasible
            | Error::NoSafeDeviation { .. }
            | Error::EmptyPolytope { .. } => EXIT_SOLVER,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

type CmdResult = Result<i32, Failure>;

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => write_json(path, value)?,
        None => {
            let text = to_json(value)?;
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| input_error(format!("cannot write to stdout: {e}")))?;
        }
    }
    Ok(())
}

fn check_tolerance(name: &str, value: f64) -> Result<(), Failure> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(input_error(format!("--{name} must be positive, got {value}")))
    }
}

fn load(args: &GameArgs) -> Result<(ConstrainedGame, Vec<DeviationPolytope>), Failure> {
    let game = load_game(&args.game)?;
    let polys = resolve_polytopes(&args.phi, &game)?;
    Ok((game, polys))
}

fn objective(spec: &str, game: &ConstrainedGame) -> Result<LinearObjective, Failure> {
    if spec.eq_ignore_ascii_case("welfare") {
        Ok(LinearObjective::welfare(game))
    } else {
        Ok(load_objective(Path::new(spec), game)?)
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| input_error(format!("cannot create {}: {e}", dir.display())))
}

fn gen(cmd: GenCommand) -> CmdResult {
    match cmd {
        GenCommand::Example1 { out_dir } => {
            ensure_dir(&out_dir)?;
            let ex = example1();
            save_game(&out_dir.join("game.json"), &ex.game)?;
            save_strategy(&out_dir.join("z1.json"), &ex.z1)?;
            save_strategy(&out_dir.join("z2.json"), &ex.z2)?;
            save_strategy(&out_dir.join("z3.json"), &ex.z3)?;
            write_json(&out_dir.join("phi2.json"), &ex.phi2)?;
        }
        GenCommand::Hardness(args) => {
            let text = fs::read_to_string(&args.graph)
                .map_err(|e| input_error(format!("cannot read {}: {e}", args.graph.display())))?;
            let mut graph = GraphInstance::parse_edge_list(&text, args.vertices)?;
            if let Some(set) = &args.independent_set {
                graph = graph.with_independent_set(set.clone())?;
            }
            let params = GadgetParams {
                alpha: args.alpha,
                delta: args.delta,
            };
            let game = hardness_gadget(&graph, &params)?;
            ensure_dir(&args.out_dir)?;
            save_game(&args.out_dir.join("game.json"), &game)?;
            write_json(&args.out_dir.join("constants.json"), &params.constants(graph.vertices())?)?;
            if let Some(set) = graph.independent_set() {
                let z = completeness_strategy(&graph, &params, set)?;
                save_strategy(&args.out_dir.join("completeness.json"), &z)?;
            }
        }
        GenCommand::Random(args) => {
            let actions = vec![args.actions; args.players];
            let game = match args.kind {
                RandomKind::Marginal => random_marginal_game(&actions, args.constraints, args.seed)?,
                RandomKind::Safe => random_safe_game(&actions, args.constraints, 0.1, args.seed)?,
            };
            save_game(&args.out, &game)?;
        }
    }
    Ok(EXIT_OK)
}

fn verify_cmd(args: VerifyArgs) -> CmdResult {
    check_tolerance("gap-tol", args.gap_tol)?;
    check_tolerance("safety-tol", args.safety_tol)?;
    if !(args.eps.is_finite() && args.eps >= 0.0) {
        return Err(input_error(format!("--eps must be non-negative, got {}", args.eps)));
    }
    let (game, polys) = load(&args.game)?;
    let z = load_strategy(&args.strategy, &game)?;
    let tol = Tolerances {
        gap: args.gap_tol,
        safety: args.safety_tol,
    };
    let report = verify_with(&game, &polys, &z, args.eps, tol)?;
    emit(&report, args.out.as_deref())?;
    Ok(if report.verdict { EXIT_OK } else { EXIT_VERDICT_FALSE })
}

fn best_dev(args: BestDevArgs) -> CmdResult {
    let (game, polys) = load(&args.game)?;
    game.check_player(args.player)?;
    let z = load_strategy(&args.strategy, &game)?;
    let r = best_safe_deviation(&game, &polys[args.player], &z, args.player)?;
    emit(&r, args.out.as_deref())?;
    Ok(EXIT_OK)
}

fn solve(args: SolveArgs) -> CmdResult {
    check_tolerance("tol", args.tol)?;
    let (game, polys) = load(&args.game)?;
    let obj = objective(&args.objective, &game)?;
    let report = ccg_core::solve_special(&game, &polys, &obj)?;
    if let Some(path) = &args.strategy_out {
        save_strategy(path, &report.strategy)?;
    }
    emit(&report, args.out.as_deref())?;
    if report.final_max_gap > args.tol {
        return Err(Failure {
            code: EXIT_SOLVER,
            message: format!("final gap {} exceeds --tol {}", report.final_max_gap, args.tol),
        });
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TraceRow {
    t: usize,
    player: usize,
    regret: f64,
    gap_bound: f64,
    max_cost_residual: f64,
    utility_avg: f64,
}

/// Writes one CSV row per player and checkpoint.
pub fn emit_trace(trace: &LearningTrace, path: &Path) -> Result<(), Failure> {
    let file = fs::File::create(path).map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
    let mut writer = csv::Writer::from_writer(file);
    for c in &trace.checkpoints {
        for (player, p) in c.players.iter().enumerate() {
            writer
                .serialize(TraceRow {
                    t: c.t,
                    player,
                    regret: p.regret,
                    gap_bound: p.gap_bound,
                    max_cost_residual: p.max_cost_residual,
                    utility_avg: p.utility_avg,
                })
                .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    writer
        .flush()
        .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct CheckpointSummary {
    t: usize,
    regrets: Vec<f64>,
    epsilon: f64,
    max_cost_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_gap: Option<f64>,
}

#[derive(Serialize)]
struct LearnSummary {
    rounds: usize,
    seed: u64,
    average: Vec<f64>,
    checkpoints: Vec<CheckpointSummary>,
}

fn learn(args: LearnArgs) -> CmdResult {
    if args.rounds == 0 {
        return Err(input_error("--rounds must be positive"));
    }
    let (game, polys) = load(&args.game)?;
    let trace = run_dynamics(&game, &polys, args.rounds, args.seed)?;
    if let Some(path) = &args.trace {
        emit_trace(&trace, path)?;
    }
    let mut checkpoints = Vec::new();
    for c in &trace.checkpoints {
        let epsilon = c.players.iter().map(|p| p.gap_bound).fold(0.0, f64::max);
        let (verdict, max_gap) = if args.checkpoints {
            let r = verify_with(&game, &polys, &c.average, epsilon, Tolerances::default())?;
            (Some(r.verdict), Some(r.max_gap))
        } else {
            (None, None)
        };
        checkpoints.push(CheckpointSummary {
            t: c.t,
            regrets: c.players.iter().map(|p| p.regret).collect(),
            epsilon,
            max_cost_residual: c.players.iter().map(|p| p.max_cost_residual).fold(f64::NEG_INFINITY, f64::max),
            verdict,
            max_gap,
        });
    }
    emit(
        &LearnSummary {
            rounds: args.rounds,
            seed: args.seed,
            average: trace.average.probs().to_vec(),
            checkpoints,
        },
        args.out.as_deref(),
    )?;
    Ok(EXIT_OK)
}

fn oracle(args: OracleArgs) -> CmdResult {
    if args.grid == 0 {
        return Err(input_error("--grid must be positive"));
    }
    let (game, polys) = load(&args.game)?;
    let obj = objective(&args.objective, &game)?;
    let opts = BruteOptions {
        grid: args.grid,
        epsilon: args.eps,
        node_budget: args.budget,
    };
    let r = ccg_core::instances::brute_oracle_with(&game, &polys, &obj.coefficients, opts)?;
    emit(&r, args.out.as_deref())?;
    Ok(EXIT_OK)
}

fn strict(args: StrictArgs) -> CmdResult {
    let (game, polys) = load(&args.game)?;
    let z = load_strategy(&args.strategy, &game)?;
    let players: Vec<usize> = match args.player {
        Some(i) => {
            game.check_player(i)?;
            vec![i]
        }
        None => (0..game.players()).collect(),
    };
    let results = players
        .into_iter()
        .map(|i| strict_feasibility(&game, &polys[i], &z, i))
        .collect::<Result<Vec<_>, _>>()?;
    emit(&results, args.out.as_deref())?;
    Ok(EXIT_OK)
}

fn selftest(args: SelftestArgs) -> CmdResult {
    let summary = ccg_core::selftest::run_all(args.seed, Duration::from_secs(args.budget));
    for case in &summary.cases {
        eprintln!("{}", case.line());
    }
    emit(&summary, args.out.as_deref())?;
    Ok(if summary.all_passed() { EXIT_OK } else { EXIT_VERDICT_FALSE })
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if let Some(n) = config.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_INPUT;
        }
        // Ignored if a pool already exists (only possible when embedded).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match config.command {
        Command::Gen(cmd) => gen(cmd),
        Command::Verify(a) => verify_cmd(a),
        Command::BestDev(a) => best_dev(a),
        Command::SolveSpecial(a) => solve(a),
        Command::Learn(a) => learn(a),
        Command::Oracle(a) => oracle(a),
        Command::StrictFeas(a) => strict(a),
        Command::Selftest(a) => selftest(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ccg_core::io::PolytopeFile;

    #[test]
    fn error_codes() {
        assert_eq!(Failure::from(Error::MasterInfeasible).code, EXIT_SOLVER);
        assert_eq!(Failure::from(Error::InvalidInput("x".into())).code, EXIT_INPUT);
        assert_eq!(Failure::from(Error::NotFixedSafeSet("x".into())).code, EXIT_INPUT);
    }

    #[test]
    fn unknown_flags_are_input_errors() {
        assert_eq!(dispatch(["ccg", "verify", "--bogus"]), EXIT_INPUT);
        assert_eq!(dispatch(["ccg", "frobnicate"]), EXIT_INPUT);
    }

    #[test]
    fn polytope_file_type_is_exported() {
        let p = PolytopeFile::from(&DeviationPolytope::cce(0, 2));
        assert_eq!(p.rows.len(), 4);
    }
}

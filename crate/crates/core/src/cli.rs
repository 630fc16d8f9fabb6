//! Command-line interface: `solve`, `bench` and `info`.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::game::{
    kuhn_poker, leduc_poker, load_game, matching_pennies, random_game, rock_paper_scissors, Game, GameError, Player,
};
use crate::metrics::ConvergenceRecord;
use crate::operators::{BundleError, GameBundle};
use crate::solver::{run_bundle, Budget, Checkpoints, Solver, SolverConfig, SolverError, UpdateMode, Variant};
use crate::sparse::Backend;
use crate::tfsdp::Tfsdp;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "seqcfr", version, about = "Sequence-form CFR solvers on sparse linear algebra")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a solver and log exploitability at checkpoints as CSV.
    Solve(SolveArgs),
    /// Time iterations over synthetic games of increasing size.
    Bench(BenchArgs),
    /// Print game and decision-process statistics.
    Info(InfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Cfr,
    #[value(name = "cfr+")]
    CfrPlus,
    Dcfr,
    Pcfr,
    #[value(name = "pcfr+")]
    PcfrPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sim,
    Alt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Serial,
    Parallel,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "cfr+")]
    pub variant: VariantArg,
    /// DCFR exponent for positive regrets.
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    pub alpha: f64,
    /// DCFR exponent for negative regrets.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
    /// Averaging exponent; defaults to the variant's usual value.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Update mode; defaults to the variant's usual mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        let variant = match self.variant {
            VariantArg::Cfr => Variant::Cfr,
            VariantArg::CfrPlus => Variant::CfrPlus,
            VariantArg::Dcfr => Variant::Dcfr {
                alpha: self.alpha,
                beta: self.beta,
            },
            VariantArg::Pcfr => Variant::Pcfr,
            VariantArg::PcfrPlus => Variant::PcfrPlus,
        };
        let mut config = SolverConfig::for_variant(variant);
        if let Some(g) = self.gamma {
            config.gamma = g;
        }
        if let Some(m) = self.mode {
            config.mode = match m {
                ModeArg::Sim => UpdateMode::Simultaneous,
                ModeArg::Alt => UpdateMode::Alternating,
            };
        }
        config
    }
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value = "serial")]
    pub backend: BackendArg,
    /// Worker threads for the parallel backend.
    #[arg(long, env = "SEQCFR_WORKERS", default_value_t = 8)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// kuhn, leduc, matching_pennies, rps, a game file, or
    /// random:depth=D,branching=B,merge=M[,seed=S].
    #[arg(long)]
    pub game: String,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub seconds: Option<f64>,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Comma-separated iterations, `every:N`, or `125` for 1,2,5,10,20,...
    #[arg(long, default_value = "125")]
    pub checkpoints: String,
    /// Seed for generated games.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Strategy output path; defaults to the CSV path with a
    /// `.strategy.jsonl` extension.
    #[arg(long)]
    pub strategy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Target decision-process sizes (both players' nodes combined).
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "serial,parallel")]
    pub backends: Vec<BackendArg>,
    #[arg(long, env = "SEQCFR_WORKERS", default_value_t = 8)]
    pub workers: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 8)]
    pub iters: usize,
    #[arg(long, default_value_t = 2)]
    pub warmup: usize,
    #[arg(long, default_value_t = 0.5)]
    pub merge: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long)]
    pub game: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print every decision-process node.
    #[arg(long)]
    pub dump_tfsdp: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        match e {
            GameError::BadParams(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Config(m) => CliError::Usage(m),
            SolverError::Bundle(b) => b.into(),
            SolverError::Sparse(s) => CliError::Internal(s.to_string()),
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}

/// Resolves a game argument to a validated game.
pub fn load_game_spec(spec: &str, seed: u64) -> Result<Game, CliError> {
    match spec {
        "kuhn" => return Ok(kuhn_poker()),
        "leduc" => return Ok(leduc_poker()),
        "matching_pennies" | "mp" => return Ok(matching_pennies()),
        "rps" => return Ok(rock_paper_scissors()),
        _ => {}
    }
    if let Some(params) = spec.strip_prefix("random:") {
        let (mut depth, mut branching, mut merge, mut seed) = (None, None, 0.0, seed);
        for kv in params.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("expected key=value in {kv:?}")))?;
            let bad = || CliError::Usage(format!("bad value for {k}: {v:?}"));
            let v = v.trim();
            match k.trim() {
                "depth" => depth = Some(v.parse::<u32>().map_err(|_| bad())?),
                "branching" => branching = Some(v.parse::<u32>().map_err(|_| bad())?),
                "merge" => merge = v.parse::<f64>().map_err(|_| bad())?,
                "seed" => seed = v.parse::<u64>().map_err(|_| bad())?,
                other => return Err(CliError::Usage(format!("unknown random game parameter {other:?}"))),
            }
        }
        let depth = depth.ok_or_else(|| CliError::Usage("random game needs depth=".into()))?;
        let branching = branching.ok_or_else(|| CliError::Usage("random game needs branching=".into()))?;
        return Ok(random_game(depth, branching, merge, seed)?);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "unknown game {spec:?}: not a built-in name, random:..., or an existing file"
        )));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    load_game(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn parse_checkpoints(s: &str) -> Result<Checkpoints, CliError> {
    let s = s.trim();
    if s == "125" {
        return Ok(Checkpoints::OneTwoFive);
    }
    if let Some(n) = s.strip_prefix("every:") {
        let n: u64 = n
            .parse()
            .map_err(|_| CliError::Usage(format!("bad checkpoint interval {n:?}")))?;
        if n == 0 {
            return Err(CliError::Usage("checkpoint interval must be positive".into()));
        }
        return Ok(Checkpoints::Every(n));
    }
    let list = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<u64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("bad checkpoint list {s:?}")))?;
    if list.is_empty() {
        return Err(CliError::Usage("checkpoint schedule is empty".into()));
    }
    Ok(Checkpoints::At(list))
}

pub fn make_backend(kind: BackendArg, workers: usize) -> Result<Backend, CliError> {
    match kind {
        BackendArg::Serial => Ok(Backend::serial()),
        BackendArg::Parallel => {
            if workers == 0 {
                return Err(CliError::Usage("--workers must be positive".into()));
            }
            Backend::parallel(workers).map_err(|e| CliError::Internal(e.to_string()))
        }
    }
}

#[derive(serde::Serialize)]
struct StrategyLine<'a> {
    player: u8,
    sequence: String,
    infoset: &'a str,
    action: &'a str,
    probability: f64,
}

/// JSON lines, one per non-empty sequence, with behavioral probabilities.
pub fn strategy_jsonl(bundle: &GameBundle, average: &[Vec<f64>; 2]) -> String {
    let mut out = String::new();
    for p in Player::BOTH {
        let t = bundle.tfsdp(p);
        let b = t.behavioral(&average[p.index()]);
        for d in t.decisions() {
            for (a, s) in d.seqs().enumerate() {
                let line = StrategyLine {
                    player: p.number(),
                    sequence: t.seq_label(s),
                    infoset: &d.infoset,
                    action: &d.actions[a],
                    probability: b[s - 1],
                };
                out.push_str(&serde_json::to_string(&line).expect("strategy line serializes"));
                out.push('\n');
            }
        }
    }
    out
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Internal(e.to_string())),
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let budget = Budget {
        iterations: args.iters,
        seconds: args.seconds,
    };
    budget.validate()?;
    let checkpoints = parse_checkpoints(&args.checkpoints)?;
    let config = args.solver.config();
    config.validate()?;
    let backend = make_backend(args.backend.backend, args.backend.workers)?;

    let game = load_game_spec(&args.game, args.seed)?;
    let bundle = GameBundle::new(&game)?;
    let out = run_bundle(&bundle, config, budget, &checkpoints, &backend)?;

    let mut csv = String::from(ConvergenceRecord::CSV_HEADER);
    csv.push('\n');
    for r in &out.records {
        let _ = writeln!(csv, "{r}");
    }
    write_output(args.out.as_deref(), &csv)?;

    let strategy_path = args
        .strategy
        .clone()
        .or_else(|| args.out.as_ref().map(|p| p.with_extension("strategy.jsonl")));
    if let Some(p) = &strategy_path {
        fs::write(p, strategy_jsonl(&bundle, &out.average)).map_err(|e| io_err(p, e))?;
    }

    let last = out.records.last().expect("the final iteration is always recorded");
    eprintln!(
        "{} on {}: {} iterations in {:.3}s, exploitability {:e}",
        config.variant, game.name, out.iterations, out.seconds, last.exploitability
    );
    Ok(())
}

/// Random-game parameters whose decision processes come closest to
/// `target` nodes in total, by exact count over a small search grid.
pub fn random_game_for_size(target: f64, merge: f64, seed: u64) -> Result<(Game, GameBundle), CliError> {
    if !(target >= 1.0 && target.is_finite()) {
        return Err(CliError::Usage(format!("bad size {target}")));
    }
    let mut best: Option<(f64, u32, u32)> = None;
    for branching in 2..=5u32 {
        for depth in 1..=40u32 {
            let est = estimated_tfsdp_nodes(depth, branching, merge);
            if est > target * 8.0 {
                break;
            }
            let err = (est / target).ln().abs();
            if best.map_or(true, |(e, _, _)| err < e) {
                best = Some((err, depth, branching));
            }
        }
    }
    let (_, depth, branching) = best.expect("the grid is non-empty");
    let game = random_game(depth, branching, merge, seed)?;
    let bundle = GameBundle::new(&game)?;
    Ok((game, bundle))
}

/// Expected decision-process size of `random_game(depth, branching, merge)`
/// for both players combined.
///
/// Every sequence has an image node, and decision points that share a parent
/// sequence with another one hang below an observation point, so
/// `|P| = |Σ| + #(decision points under observation points)`. Nodes that
/// share a layer and an own parent sequence form a group; a group of `n`
/// nodes keeps about `1 + (n - 1)(1 - merge)` information sets.
pub fn estimated_tfsdp_nodes(depth: u32, branching: u32, merge: f64) -> f64 {
    let b = branching as f64;
    let mut total = 0.0;
    for first in [0u32, 2] {
        let mut groups = 1.0f64;
        let mut decisions = 0.0;
        let mut observed = 0.0;
        let mut layer = first;
        while layer < depth {
            let per_group = b.powi(layer as i32) / groups;
            let sets = groups * (1.0 + (per_group - 1.0) * (1.0 - merge));
            decisions += sets;
            if per_group > 1.0 && merge < 1.0 {
                observed += sets;
            }
            groups = sets * b;
            layer += 4;
        }
        total += 1.0 + b * decisions + observed;
    }
    total
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    if args.sizes.is_empty() || args.backends.is_empty() {
        return Err(CliError::Usage("empty sweep".into()));
    }
    if args.iters < 8 {
        return Err(CliError::Usage("at least 8 timed iterations are required".into()));
    }
    let config = args.solver.config();
    config.validate()?;

    let mut csv = String::from(
        "nodes,backend,workers,mean_seconds,stderr_seconds,work_per_iteration,peak_bytes,speedup\n",
    );
    for &size in &args.sizes {
        let (_, bundle) = random_game_for_size(size, args.merge, args.seed)?;
        let mut serial_mean = None;
        for &kind in &args.backends {
            let backend = make_backend(kind, args.workers)?;
            let m = measure(&bundle, config, &backend, args.warmup, args.iters)?;
            if kind == BackendArg::Serial {
                serial_mean = Some(m.mean);
            }
            let workers = match kind {
                BackendArg::Serial => 1,
                BackendArg::Parallel => args.workers,
            };
            let speedup = serial_mean.map_or(f64::NAN, |s| s / m.mean);
            let _ = writeln!(
                csv,
                "{},{},{},{:e},{:e},{},{},{:.4}",
                bundle.num_nodes(),
                match kind {
                    BackendArg::Serial => "serial",
                    BackendArg::Parallel => "parallel",
                },
                workers,
                m.mean,
                m.stderr,
                m.work_per_iteration,
                m.peak_bytes,
                speedup
            );
        }
    }
    write_output(args.out.as_deref(), &csv)
}

#[derive(Debug, Clone, Copy)]
pub struct Measurement {
    pub mean: f64,
    pub stderr: f64,
    pub work_per_iteration: u64,
    pub peak_bytes: usize,
}

/// Mean iteration time after `warmup` untimed iterations.
pub fn measure(
    bundle: &GameBundle,
    config: SolverConfig,
    backend: &Backend,
    warmup: usize,
    iters: usize,
) -> Result<Measurement, CliError> {
    let mut solver = Solver::new(bundle, config, backend)?;
    for _ in 0..warmup {
        solver.step()?;
    }
    let before = backend.work();
    let mut times = Vec::with_capacity(iters);
    for _ in 0..iters {
        let t = Instant::now();
        solver.step()?;
        times.push(t.elapsed().as_secs_f64());
    }
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(Measurement {
        mean,
        stderr: (var / n).sqrt(),
        work_per_iteration: (backend.work() - before) / iters as u64,
        peak_bytes: solver.heap_bytes(),
    })
}

pub fn tfsdp_summary(t: &Tfsdp) -> String {
    format!(
        "|P| = {}, |J| = {}, |Sigma| = {}, k = {}, B = {}",
        t.num_nodes(),
        t.num_decisions(),
        t.num_seqs(),
        t.height(),
        t.degree()
    )
}

pub fn cmd_info(args: &InfoArgs) -> Result<(), CliError> {
    let game = load_game_spec(&args.game, args.seed)?;
    let bundle = GameBundle::new(&game)?;
    let mut out = String::new();
    let _ = writeln!(out, "game: {}", game.name);
    let _ = writeln!(out, "game tree nodes: {}", game.len());
    let _ = writeln!(out, "terminal nodes: {}", game.num_terminals());
    for p in Player::BOTH {
        let _ = writeln!(out, "player {}: {}", p.number(), tfsdp_summary(bundle.tfsdp(p)));
    }
    let _ = writeln!(out, "payoff nnz: {}", bundle.payoff.matrix.nnz());
    if args.dump_tfsdp {
        for p in Player::BOTH {
            let _ = writeln!(out, "# player {} decision process: node kind depth parent sequence", p.number());
            out.push_str(&bundle.tfsdp(p).debug_dump());
        }
    }
    write_output(None, &out)
}

/// Runs a parsed command and maps failures to exit codes.
pub fn execute(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Info(a) => cmd_info(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_parsing() {
        assert_eq!(parse_checkpoints("125").unwrap(), Checkpoints::OneTwoFive);
        assert_eq!(parse_checkpoints("every:10").unwrap(), Checkpoints::Every(10));
        assert_eq!(parse_checkpoints("1, 10,100").unwrap(), Checkpoints::At(vec![1, 10, 100]));
        assert!(parse_checkpoints("").is_err());
        assert!(parse_checkpoints("every:0").is_err());
        assert!(parse_checkpoints("x").is_err());
    }

    #[test]
    fn game_specs() {
        assert_eq!(load_game_spec("kuhn", 0).unwrap().len(), 58);
        let g = load_game_spec("random:depth=3,branching=2,merge=0.5,seed=4", 0).unwrap();
        assert_eq!(g.len(), 15);
        assert!(matches!(load_game_spec("random:depth=3", 0), Err(CliError::Usage(_))));
        assert!(matches!(load_game_spec("nope", 0), Err(CliError::Usage(_))));
    }

    #[test]
    fn config_defaults_follow_variant() {
        let cli = Cli::try_parse_from(["seqcfr", "solve", "--game", "kuhn", "--variant", "dcfr", "--iters", "5"]).unwrap();
        let Command::Solve(a) = cli.command else { panic!() };
        let c = a.solver.config();
        assert_eq!(c.variant, Variant::DCFR_DEFAULT);
        assert_eq!(c.gamma, 2.0);
        assert_eq!(c.mode, UpdateMode::Alternating);
    }

    #[test]
    fn size_estimate_tracks_real_games() {
        for (d, b, m) in [(6, 3, 0.0), (8, 2, 0.5), (9, 3, 0.5), (7, 4, 0.2)] {
            let g = random_game(d, b, m, 1).unwrap();
            let real = GameBundle::new(&g).unwrap().num_nodes() as f64;
            let est = estimated_tfsdp_nodes(d, b, m);
            assert!((est / real).ln().abs() < 0.5, "d={d} b={b} m={m}: {est} vs {real}");
        }
    }
}

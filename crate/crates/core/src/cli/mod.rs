//! The `kdmi` command line. Exit codes: 0 success, 1 compute error,
//! 2 usage or validation error.

mod svg;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::assignment::AssignmentMatrix;
use crate::clustering::{dmi_cluster, ClusteringResult, SolverConfig, SolverMode};
use crate::fixtures;
use crate::matrix::DenseMatrix;
use crate::mechanisms::{
    aggregate_answer_matrix, align_labels, kdmi_payments_with, plurality, surprisingly_popular_multitask,
    PaymentConfig, PaymentMode, ReportSet,
};
use crate::simulator::{self, generate_reports, generate_single_task, Scenario, StrategyMatrix};
use crate::single_task::{
    canonical_orientation, estimate_moments_with, spectral_from, surprisingly_popular_from, MomentOptions,
    SingleTaskDataset, SingleTaskError, SpectralOptions, WorldLabel,
};

pub use svg::render as render_svg;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(_) => 1,
            CliError::Usage(_) | CliError::Validation(_) => 2,
        }
    }
}

fn compute(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "kdmi", version, about = "Determinant-maximization clustering and crowd aggregation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster the rows of a CSV point matrix.
    Cluster(ClusterArgs),
    /// Extract answers and compute peer payments from a reports JSON file.
    Aggregate(AggregateArgs),
    /// Aggregate a single question from signals and predictions.
    Single(SingleArgs),
    /// Run a preset or scenario file.
    Simulate(SimulateArgs),
    /// Print a built-in demonstration matrix as CSV.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Auto,
    Exact,
    Kcofactors,
    Brute,
}

impl From<SolverArg> for SolverMode {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => SolverMode::Auto,
            SolverArg::Exact => SolverMode::Exact,
            SolverArg::Kcofactors => SolverMode::KCofactors,
            SolverArg::Brute => SolverMode::BruteForce,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    pub solver: SolverArg,
    /// Total k-cofactors runs, including the deterministic first one.
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    /// Relative rank tolerance.
    #[arg(long, default_value_t = crate::matrix::DEFAULT_RANK_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, CliError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Usage("--tol must be positive".into()));
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(CliError::Usage("--restarts and --max-iters must be positive".into()));
        }
        Ok(SolverConfig {
            mode: self.solver.into(),
            restarts: self.restarts,
            seed: self.seed,
            max_iters: self.max_iters,
            rank_tol: self.tol,
            ..SolverConfig::default()
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    /// CSV of n rows by d columns; an optional header row is skipped.
    pub input: PathBuf,
    /// Output JSON path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also render the clustering of 2d points as SVG.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AggregateArgs {
    /// Reports JSON: {n, options, agents: [{id, answers: {task: option}}]}.
    pub reports: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of `task_index,option_index` used to name the clusters.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Pay on all performed tasks at once instead of two halves.
    #[arg(long)]
    pub single_part: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SingleArgs {
    /// Dataset JSON: {options, records: [{signal, prediction: [..]}]}.
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Additive smoothing of the conditional forecasts (off by default).
    #[arg(long)]
    pub smoothing: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// One of example12, legal_pure, affine_fixture, two_world_spectral.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub preset: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Override the number of agents.
    #[arg(long)]
    pub agents: Option<usize>,
    /// Override the number of single-task trials.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Also check strategy invariance on the expected answer matrices.
    #[arg(long)]
    pub expected: bool,
    /// Where to write generated reports (multi-task scenarios).
    #[arg(long)]
    pub reports_out: Option<PathBuf>,
    /// Metrics JSON path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FixturesArgs {
    /// affine_7x2, transform_T_b, kcofactors_30x2 or dmi_20x3.
    pub name: String,
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code. Messages go to `stdout`/`stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Cluster(a) => cmd_cluster(a, stdout),
        Command::Aggregate(a) => cmd_aggregate(a, stdout),
        Command::Single(a) => cmd_single(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Fixtures(a) => cmd_fixtures(a, stdout),
    }
}

/// Writes via a temporary file in the target directory and a rename, so a
/// failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| compute(format!("{}: {e}", path.display())))?;
    tmp.write_all(contents).map_err(compute)?;
    tmp.persist(path).map_err(|e| compute(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn emit(out: Option<&Path>, value: &impl Serialize, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(compute)?;
    text.push('\n');
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => stdout.write_all(text.as_bytes()).map_err(compute),
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn check_output_dir(path: Option<&PathBuf>) -> Result<(), CliError> {
    if let Some(p) = path {
        match p.parent() {
            Some(d) if !d.as_os_str().is_empty() && !d.is_dir() => {
                Err(CliError::Usage(format!("output directory {} does not exist", d.display())))
            }
            _ => Ok(()),
        }
    } else {
        Ok(())
    }
}

/// Parses comma-separated decimals. A first row that does not parse is
/// taken as a header; anything else that does not parse is an error
/// naming its 1-based row and column.
pub fn parse_csv_matrix(text: &str) -> Result<DenseMatrix, CliError> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| validation(format!("row {}: {e}", r + 1)))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, usize> =
            record.iter().enumerate().map(|(c, v)| v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or(c)).collect();
        match parsed {
            Ok(values) => {
                if let Some(first) = rows.first() {
                    if first.len() != values.len() {
                        return Err(validation(format!(
                            "row {}: expected {} columns, found {}",
                            r + 1,
                            first.len(),
                            values.len()
                        )));
                    }
                }
                rows.push(values);
            }
            Err(_) if r == 0 => continue,
            Err(c) => {
                return Err(validation(format!(
                    "row {}, column {}: not a finite number: {:?}",
                    r + 1,
                    c + 1,
                    &record[c]
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(validation("no data rows"));
    }
    DenseMatrix::from_rows(&rows).map_err(validation)
}

/// Parses `task_index,option_index` pairs with an optional header.
pub fn parse_gold_csv(text: &str) -> Result<BTreeMap<usize, usize>, CliError> {
    let m = parse_csv_matrix(text)?;
    if m.cols() != 2 {
        return Err(validation("gold CSV needs exactly two columns"));
    }
    m.row_iter()
        .enumerate()
        .map(|(r, row)| {
            let as_index = |v: f64| (v >= 0.0 && v.fract() == 0.0).then_some(v as usize);
            match (as_index(row[0]), as_index(row[1])) {
                (Some(t), Some(c)) => Ok((t, c)),
                _ => Err(validation(format!("gold row {}: indices must be non-negative integers", r + 1))),
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct ClusterOutput<'a> {
    k: usize,
    picked_columns: &'a [usize],
    assignment: &'a [usize],
    partition: &'a DenseMatrix,
    score: f64,
    solver_tag: crate::clustering::SolverTag,
    diagnostics: &'a crate::clustering::SolverDiagnostics,
}

impl<'a> From<&'a ClusteringResult> for ClusterOutput<'a> {
    fn from(r: &'a ClusteringResult) -> Self {
        Self {
            k: r.k,
            picked_columns: r.picked_columns.indices(),
            assignment: r.assignment.labels(),
            partition: &r.partition,
            score: r.score,
            solver_tag: r.solver_tag,
            diagnostics: &r.diagnostics,
        }
    }
}

pub fn cmd_cluster(args: &ClusterArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = args.solver.config()?;
    check_output_dir(args.out.as_ref())?;
    check_output_dir(args.svg.as_ref())?;
    let points = parse_csv_matrix(&read_input(&args.input)?)?;
    if args.svg.is_some() && points.cols() != 2 {
        return Err(CliError::Usage(format!("--svg needs 2d points, input has {} columns", points.cols())));
    }
    let result = dmi_cluster(&points, &config).map_err(compute)?;
    emit(args.out.as_deref(), &ClusterOutput::from(&result), stdout)?;
    if let Some(path) = &args.svg {
        write_atomic(path, svg::render(&points, &result.assignment).as_bytes())?;
    }
    Ok(())
}

pub fn cmd_aggregate(args: &AggregateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = args.solver.config()?;
    check_output_dir(args.out.as_ref())?;
    let reports = ReportSet::from_json_str(&read_input(&args.reports)?).map_err(validation)?;
    let gold = match &args.gold {
        Some(p) => Some(parse_gold_csv(&read_input(p)?)?),
        None => None,
    };
    let payment = PaymentConfig {
        seed: args.solver.seed,
        mode: if args.single_part { PaymentMode::SinglePart } else { PaymentMode::TwoPart },
    };
    let outcome = kdmi_payments_with(&reports, &config, &payment).map_err(compute)?;
    let a = aggregate_answer_matrix(&reports).map_err(compute)?;
    let sp = match surprisingly_popular_multitask(&a) {
        Ok(c) => json!(c.labels()),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let alignment = match &gold {
        Some(g) => {
            let perm = align_labels(&outcome.extracted.assignment, g).map_err(validation)?;
            let answers: Vec<usize> = outcome.extracted.assignment.labels().iter().map(|&l| perm[l]).collect();
            let agreement = g.iter().filter(|(&t, &c)| answers[t] == c).count();
            json!({ "permutation": perm, "answers": answers, "gold_agreement": agreement, "gold_size": g.len() })
        }
        None => Value::Null,
    };
    let doc = json!({
        "extraction": ClusterOutput::from(&outcome.extracted),
        "quality": outcome.quality,
        "payments": outcome.agents,
        "surprisingly_popular": sp,
        "plurality": plurality(&a).labels(),
        "alignment": alignment,
    });
    emit(args.out.as_deref(), &doc, stdout)
}

pub fn cmd_single(args: &SingleArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if let Some(eps) = args.smoothing {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(CliError::Usage("--smoothing must be positive".into()));
        }
    }
    check_output_dir(args.out.as_ref())?;
    let dataset = SingleTaskDataset::from_json_str(&read_input(&args.dataset)?).map_err(validation)?;
    let moments =
        estimate_moments_with(&dataset, &MomentOptions { smoothing: args.smoothing }).map_err(|e| match e {
            SingleTaskError::MissingOption(_) | SingleTaskError::ZeroConditional { .. } => validation(e),
            other => compute(other),
        })?;
    let sp = surprisingly_popular_from(&moments).map_err(compute)?;
    let opts = SpectralOptions { seed: args.seed, ..SpectralOptions::default() };
    let (sts_label, sts_degenerate, spectral) = match spectral_from(&moments, &opts) {
        Ok(s) => (s.label, s.label.is_none(), json!(s)),
        Err(e @ SingleTaskError::DegenerateSpectrum { .. }) => (None, true, json!({ "error": e.to_string() })),
        Err(e) => return Err(compute(e)),
    };
    let doc = json!({
        "sp_answer": sp.option,
        "sp_tied": sp.tied,
        "sts_label": sts_label,
        "sts_degenerate": sts_degenerate,
        "diagnostics": { "moments": moments, "spectral": spectral },
    });
    emit(args.out.as_deref(), &doc, stdout)
}

pub fn cmd_fixtures(args: &FixturesArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = fixtures::fixture_csv(&args.name).ok_or_else(|| {
        CliError::Usage(format!("unknown fixture {:?}; known: {}", args.name, fixtures::FIXTURE_NAMES.join(", ")))
    })?;
    stdout.write_all(text.as_bytes()).map_err(compute)
}

/// Agreement of `assignment` with `truth` under the best relabeling.
pub fn recovery_accuracy(assignment: &AssignmentMatrix, truth: &[usize]) -> Option<f64> {
    let gold: BTreeMap<usize, usize> = truth.iter().copied().enumerate().collect();
    let perm = align_labels(assignment, &gold).ok()?;
    let hits = truth.iter().enumerate().filter(|(t, &c)| perm[assignment.label(*t)] == c).count();
    Some(hits as f64 / truth.len() as f64)
}

/// Label a two-world spectral run should return in each world: the world
/// whose signals exceed the other's along the canonical eigen-direction is
/// `plus`.
pub fn expected_world_labels(worlds: &[Vec<f64>]) -> Option<[WorldLabel; 2]> {
    let [first, second] = worlds else { return None };
    let diff: Vec<f64> = first.iter().zip(second).map(|(a, b)| a - b).collect();
    let oriented = canonical_orientation(&diff);
    Some(if oriented == diff { [WorldLabel::Plus, WorldLabel::Minus] } else { [WorldLabel::Minus, WorldLabel::Plus] })
}

fn load_scenario(args: &SimulateArgs) -> Result<Scenario, CliError> {
    match (&args.preset, &args.scenario) {
        (Some(name), _) => simulator::preset(name).ok_or_else(|| {
            CliError::Usage(format!("unknown preset {name:?}; known: {}", simulator::PRESET_NAMES.join(", ")))
        }),
        (None, Some(path)) => {
            serde_json::from_str(&read_input(path)?).map_err(|e| validation(format!("{}: {e}", path.display())))
        }
        (None, None) => Err(CliError::Usage("give --preset or --scenario".into())),
    }
}

pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = args.solver.config()?;
    check_output_dir(args.out.as_ref())?;
    check_output_dir(args.reports_out.as_ref())?;
    let seed = args.solver.seed;
    let metrics = match load_scenario(args)? {
        Scenario::MultiTask { mut world, strategies } => {
            if let Some(m) = args.agents {
                world.m_agents = m;
            }
            world.validate().map_err(validation)?;
            let list = strategies.expand(world.options, world.m_agents).map_err(validation)?;
            let generated = generate_reports(&world, &list, seed).map_err(compute)?;
            if let Some(p) = &args.reports_out {
                write_atomic(p, generated.reports.to_json_string().as_bytes())?;
            }
            let outcome =
                kdmi_payments_with(&generated.reports, &config, &PaymentConfig { seed, ..Default::default() })
                    .map_err(compute)?;
            let paid: Vec<f64> = outcome.payments.clone();
            let mean = paid.iter().sum::<f64>() / paid.len() as f64;
            let mean_strategy = StrategyMatrix::mean(&list).map_err(compute)?;
            let invariance = if args.expected {
                expected_invariance(&world, &generated.truth, &mean_strategy, &config)?
            } else {
                Value::Null
            };
            json!({
                "kind": "multi_task",
                "agents": world.m_agents,
                "tasks": world.n_tasks,
                "soft_truth": generated.soft_truth,
                "k": outcome.extracted.k,
                "extraction_accuracy": recovery_accuracy(&outcome.extracted.assignment, &generated.truth),
                "quality": outcome.quality,
                "mean_strategy_determinant": mean_strategy.determinant(),
                "payments": {
                    "mean": mean,
                    "min": paid.iter().copied().fold(f64::INFINITY, f64::min),
                    "max": paid.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    "unpaid": outcome.agents.iter().filter(|a| a.status != crate::mechanisms::PaymentStatus::Paid).count(),
                },
                "invariance": invariance,
            })
        }
        Scenario::SingleTask { world, agents, trials } => {
            let m = args.agents.unwrap_or(agents);
            let trials = args.trials.unwrap_or(trials);
            world.validate().map_err(validation)?;
            single_task_metrics(&world, m, trials, seed)?
        }
        Scenario::Affine { points, transform, offset } => {
            let moved = points.matmul(&transform).and_then(|p| p.add_row_vector(&offset)).map_err(validation)?;
            let a = dmi_cluster(&points, &config).map_err(compute)?;
            let b = dmi_cluster(&moved, &config).map_err(compute)?;
            json!({
                "kind": "affine",
                "original": a.assignment.labels(),
                "transformed": b.assignment.labels(),
                "identical": a.assignment == b.assignment,
                "score_ratio": b.score / a.score,
            })
        }
    };
    emit(args.out.as_deref(), &metrics, stdout)
}

fn expected_invariance(
    world: &simulator::WorldModel,
    truth: &[usize],
    mean_strategy: &StrategyMatrix,
    config: &SolverConfig,
) -> Result<Value, CliError> {
    let honest = simulator::expected_answer_matrix(world, truth, &StrategyMatrix::identity(world.options))
        .map_err(validation)?;
    let strategic = simulator::expected_answer_matrix(world, truth, mean_strategy).map_err(validation)?;
    let a = dmi_cluster(&honest, config).map_err(compute)?;
    let b = dmi_cluster(&strategic, config).map_err(compute)?;
    Ok(json!({
        "identical": a.assignment == b.assignment,
        "honest_quality": a.score,
        "strategic_quality": b.score,
        "quality_ratio": b.score / a.score,
        "abs_det_strategy": mean_strategy.determinant().abs(),
    }))
}

fn single_task_metrics(
    world: &simulator::SingleTaskWorld,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<Value, CliError> {
    let expected = expected_world_labels(&world.worlds);
    let mix: Vec<f64> =
        (0..world.options()).map(|c| world.worlds.iter().zip(&world.prior).map(|(w, p)| p * w[c]).sum()).collect();
    let sp_expected: Vec<usize> = world
        .worlds
        .iter()
        .map(|w| crate::mechanisms::sp_choice(w, &mix).map(|c| c.option))
        .collect::<Result<_, _>>()
        .map_err(validation)?;
    let (mut sp_hits, mut sts_hits, mut degenerate, mut failures) = (0usize, 0usize, 0usize, 0usize);
    let mut worst_residual = 0.0f64;
    for trial in 0..trials {
        let (d, realized) = generate_single_task(world, m, seed.wrapping_add(trial as u64)).map_err(compute)?;
        let moments = match estimate_moments_with(&d, &MomentOptions::default()) {
            Ok(mo) => mo,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        if surprisingly_popular_from(&moments).map_err(compute)?.option == sp_expected[realized] {
            sp_hits += 1;
        }
        match spectral_from(&moments, &SpectralOptions { seed: trial as u64, ..SpectralOptions::default() }) {
            Ok(s) => {
                worst_residual = worst_residual.max(s.residual / s.eigenvalue.abs());
                if expected.is_some_and(|e| s.label == Some(e[realized])) {
                    sts_hits += 1;
                }
            }
            Err(SingleTaskError::DegenerateSpectrum { .. }) => degenerate += 1,
            Err(e) => return Err(compute(e)),
        }
    }
    let t = trials.max(1) as f64;
    Ok(json!({
        "kind": "single_task",
        "agents": m,
        "trials": trials,
        "sp_accuracy": sp_hits as f64 / t,
        "sts_accuracy": expected.map(|_| sts_hits as f64 / t),
        "sts_degenerate": degenerate,
        "moment_failures": failures,
        "worst_relative_residual": worst_residual,
    }))
}

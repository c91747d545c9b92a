//! Seeded synthetic worlds for both elicitation settings.
//!
//! Randomness comes from ChaCha8 streams of one seed: stream 0 draws the
//! task states and stream `i + 1` drives agent `i`, so per-agent work can
//! run in parallel without changing any result.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixtures;
use crate::matrix::{determinant, DenseMatrix, MatrixError};
use crate::mechanisms::{AgentReport, ReportSet};
use crate::single_task::{SignalRecord, SingleTaskDataset};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("infeasible task assignment: {0}")]
    InfeasibleAssignment(String),
}

const SIMPLEX_TOL: f64 = 1e-12;

fn on_simplex(v: &[f64]) -> bool {
    v.iter().all(|&x| x.is_finite() && x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}

/// Where task states come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StateSource {
    /// Each task picks one of `states` with probability proportional to
    /// `weights`; the pick is the task's ground truth.
    Finite { states: Vec<Vec<f64>>, weights: Vec<f64> },
    /// Each task state is a Dirichlet draw; ground truth is its argmax.
    Dirichlet { alpha: Vec<f64> },
}

/// How agents are matched to tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TaskAssignment {
    /// A uniform subset of exactly `size` tasks.
    FixedSize { size: usize },
    /// Each task independently with probability `p`, redrawn until at least
    /// `2C` tasks are assigned.
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub options: usize,
    pub source: StateSource,
    pub n_tasks: usize,
    pub m_agents: usize,
    pub assignment: TaskAssignment,
}

impl WorldModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let c = self.options;
        if c < 2 || self.n_tasks == 0 || self.m_agents == 0 {
            return Err(SimError::InvalidWorld("need C >= 2, n >= 1 and m >= 1".into()));
        }
        match &self.source {
            StateSource::Finite { states, weights } => {
                if states.is_empty() || states.len() != weights.len() {
                    return Err(SimError::InvalidWorld("states and weights must be non-empty and equally long".into()));
                }
                if let Some(s) = states.iter().position(|s| s.len() != c || !on_simplex(s)) {
                    return Err(SimError::InvalidWorld(format!("state {s} is not a distribution over {c} options")));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(SimError::InvalidWorld("weights must be non-negative with a positive sum".into()));
                }
            }
            StateSource::Dirichlet { alpha } => {
                if alpha.len() != c || alpha.iter().any(|a| !a.is_finite() || *a <= 0.0) {
                    return Err(SimError::InvalidWorld(format!("alpha needs {c} positive entries")));
                }
            }
        }
        let floor = 2 * c;
        match self.assignment {
            TaskAssignment::FixedSize { size } if size < floor || size > self.n_tasks => Err(
                SimError::InfeasibleAssignment(format!("task-set size {size} must lie in {floor}..={}", self.n_tasks)),
            ),
            TaskAssignment::Bernoulli { p } if !(p > 0.0 && p <= 1.0) => {
                Err(SimError::InfeasibleAssignment(format!("probability {p} is outside (0, 1]")))
            }
            TaskAssignment::Bernoulli { .. } if self.n_tasks < floor => {
                Err(SimError::InfeasibleAssignment(format!("{} tasks cannot give anyone {floor}", self.n_tasks)))
            }
            _ => Ok(()),
        }
    }
}

/// Row-stochastic `C x C` matrix: an agent with signal `c` reports `c'`
/// with probability `S[c][c']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseMatrix", into = "DenseMatrix")]
pub struct StrategyMatrix(DenseMatrix);

impl TryFrom<DenseMatrix> for StrategyMatrix {
    type Error = SimError;

    fn try_from(m: DenseMatrix) -> Result<Self, SimError> {
        Self::new(m)
    }
}

impl From<StrategyMatrix> for DenseMatrix {
    fn from(s: StrategyMatrix) -> Self {
        s.0
    }
}

impl StrategyMatrix {
    pub fn new(m: DenseMatrix) -> Result<Self, SimError> {
        if !m.is_square() {
            return Err(SimError::InvalidStrategy("strategy must be square".into()));
        }
        if let Some(r) = m.row_iter().position(|row| !on_simplex(row)) {
            return Err(SimError::InvalidStrategy(format!("row {r} is not a probability distribution")));
        }
        Ok(Self(m))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, SimError> {
        Self::new(DenseMatrix::from_rows(rows)?)
    }

    pub fn identity(c: usize) -> Self {
        Self(DenseMatrix::identity(c))
    }

    /// Every signal is reported as `option`.
    pub fn constant(c: usize, option: usize) -> Self {
        let mut m = DenseMatrix::zeros(c, c);
        for r in 0..c {
            m[(r, option)] = 1.0;
        }
        Self(m)
    }

    /// Reports are uniform noise.
    pub fn uniform(c: usize) -> Self {
        Self(DenseMatrix::new(c, c, vec![1.0 / c as f64; c * c]).expect("square"))
    }

    /// `(1 - noise) I + noise J / C`.
    pub fn noisy_identity(c: usize, noise: f64) -> Result<Self, SimError> {
        let mut m = DenseMatrix::identity(c).scale(1.0 - noise);
        for v in (0..c * c).map(|i| (i / c, i % c)) {
            m[v] += noise / c as f64;
        }
        Self::new(m)
    }

    /// The three-option strategy of the worked example.
    pub fn example() -> Self {
        Self::from_rows(&fixtures::EXAMPLE_STRATEGY).expect("row-stochastic constant")
    }

    pub fn options(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn determinant(&self) -> f64 {
        determinant(&self.0).expect("square")
    }

    /// Applying `self` and then `next`.
    pub fn then(&self, next: &StrategyMatrix) -> Result<Self, SimError> {
        Self::new(self.0.matmul(&next.0)?)
    }

    /// Entrywise average, the strategy of a randomly chosen agent.
    pub fn mean(strategies: &[StrategyMatrix]) -> Result<Self, SimError> {
        let first = strategies.first().ok_or_else(|| SimError::InvalidStrategy("no strategies".into()))?;
        let c = first.options();
        let mut sum = DenseMatrix::zeros(c, c);
        for s in strategies {
            if s.options() != c {
                return Err(SimError::InvalidStrategy("strategies differ in size".into()));
            }
            for (a, b) in (0..c * c).map(|i| (i / c, i % c)).zip(s.0.as_slice()) {
                sum[a] += b;
            }
        }
        Ok(Self(sum.scale(1.0 / strategies.len() as f64)))
    }
}

/// Generated reports together with the world that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedReports {
    pub reports: ReportSet,
    /// State index (finite source) or argmax of the state (Dirichlet).
    pub truth: Vec<usize>,
    pub states: Vec<Vec<f64>>,
    /// Truth is an argmax of a continuous state rather than a state index.
    pub soft_truth: bool,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b }).0
}

fn draw_states(w: &WorldModel, rng: &mut ChaCha8Rng) -> Result<(Vec<Vec<f64>>, Vec<usize>), SimError> {
    match &w.source {
        StateSource::Finite { states, weights } => {
            let pick = WeightedIndex::new(weights).map_err(|e| SimError::InvalidWorld(e.to_string()))?;
            let truth: Vec<usize> = (0..w.n_tasks).map(|_| pick.sample(rng)).collect();
            Ok((truth.iter().map(|&s| states[s].clone()).collect(), truth))
        }
        StateSource::Dirichlet { alpha } => {
            let gammas = alpha
                .iter()
                .map(|&a| Gamma::new(a, 1.0).map_err(|e| SimError::InvalidWorld(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let states: Vec<Vec<f64>> = (0..w.n_tasks)
                .map(|_| {
                    let g: Vec<f64> = gammas.iter().map(|d| d.sample(rng)).collect();
                    let z: f64 = g.iter().sum();
                    g.iter().map(|x| x / z).collect()
                })
                .collect();
            let truth = states.iter().map(|s| argmax(s)).collect();
            Ok((states, truth))
        }
    }
}

const MAX_ASSIGNMENT_DRAWS: usize = 10_000;

fn draw_tasks(w: &WorldModel, rng: &mut ChaCha8Rng) -> Result<Vec<usize>, SimError> {
    match w.assignment {
        TaskAssignment::FixedSize { size } => {
            let mut tasks = index::sample(rng, w.n_tasks, size).into_vec();
            tasks.sort_unstable();
            Ok(tasks)
        }
        TaskAssignment::Bernoulli { p } => {
            for _ in 0..MAX_ASSIGNMENT_DRAWS {
                let tasks: Vec<usize> = (0..w.n_tasks).filter(|_| rng.random_bool(p)).collect();
                if tasks.len() >= 2 * w.options {
                    return Ok(tasks);
                }
            }
            Err(SimError::InfeasibleAssignment(format!(
                "no task set of size >= {} after {MAX_ASSIGNMENT_DRAWS} draws",
                2 * w.options
            )))
        }
    }
}

fn row_samplers(m: &DenseMatrix) -> Result<Vec<WeightedIndex<f64>>, SimError> {
    m.row_iter().map(|r| WeightedIndex::new(r).map_err(|e| SimError::InvalidStrategy(e.to_string()))).collect()
}

/// Draws task states, task sets, signals and strategic reports.
pub fn generate_reports(
    w: &WorldModel,
    strategies: &[StrategyMatrix],
    seed: u64,
) -> Result<GeneratedReports, SimError> {
    w.validate()?;
    if strategies.len() != w.m_agents {
        return Err(SimError::InvalidStrategy(format!("{} strategies for {} agents", strategies.len(), w.m_agents)));
    }
    if let Some(i) = strategies.iter().position(|s| s.options() != w.options) {
        return Err(SimError::InvalidStrategy(format!("strategy of agent {i} has the wrong size")));
    }
    let (states, truth) = draw_states(w, &mut stream(seed, 0))?;
    let signal_samplers = states
        .iter()
        .map(|s| WeightedIndex::new(s).map_err(|e| SimError::InvalidWorld(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;

    let agents = strategies
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = stream(seed, i as u64 + 1);
            let report = row_samplers(s.matrix())?;
            let answers: BTreeMap<usize, usize> = draw_tasks(w, &mut rng)?
                .into_iter()
                .map(|t| {
                    let signal = signal_samplers[t].sample(&mut rng);
                    (t, report[signal].sample(&mut rng))
                })
                .collect();
            Ok(AgentReport { id: i.to_string(), answers })
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    let reports = ReportSet::new(w.n_tasks, w.options, agents).map_err(|e| SimError::InvalidWorld(e.to_string()))?;
    Ok(GeneratedReports { reports, truth, states, soft_truth: matches!(w.source, StateSource::Dirichlet { .. }) })
}

/// Rows `a_t S` for a finite-source world whose tasks carry state indices
/// `labels`: the answer matrix in the limit of infinitely many agents.
pub fn expected_answer_matrix(
    w: &WorldModel,
    labels: &[usize],
    mean_strategy: &StrategyMatrix,
) -> Result<DenseMatrix, SimError> {
    let StateSource::Finite { states, .. } = &w.source else {
        return Err(SimError::InvalidWorld("expected matrices need a finite state source".into()));
    };
    if let Some(&l) = labels.iter().find(|&&l| l >= states.len()) {
        return Err(SimError::InvalidWorld(format!("state label {l} is out of range")));
    }
    let rows: Vec<&Vec<f64>> = labels.iter().map(|&l| &states[l]).collect();
    Ok(DenseMatrix::from_rows(&rows)?.matmul(mean_strategy.matrix())?)
}

/// How single-task agents forecast others' answers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PredictionRule {
    /// Bayesian posterior-predictive given the agent's own signal.
    #[default]
    Posterior,
    /// Posterior-predictive shrunk toward uniform by `shrink`.
    Distorted { shrink: f64 },
}

/// A single question asked in one of several possible worlds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTaskWorld {
    /// Signal distribution in each world.
    pub worlds: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
    #[serde(default)]
    pub prediction: PredictionRule,
}

impl SingleTaskWorld {
    pub fn options(&self) -> usize {
        self.worlds.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let c = self.options();
        if c < 2 || self.worlds.len() != self.prior.len() {
            return Err(SimError::InvalidWorld("need at least two options and one prior weight per world".into()));
        }
        if self.worlds.iter().any(|w| w.len() != c || !on_simplex(w)) || !on_simplex(&self.prior) {
            return Err(SimError::InvalidWorld("worlds and prior must be distributions".into()));
        }
        if let PredictionRule::Distorted { shrink } = self.prediction {
            if !(0.0..=1.0).contains(&shrink) {
                return Err(SimError::InvalidWorld("shrink must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Forecast of an agent holding `signal`.
    pub fn prediction_for(&self, signal: usize) -> Vec<f64> {
        let c = self.options();
        let post: Vec<f64> = self.worlds.iter().zip(&self.prior).map(|(w, p)| p * w[signal]).collect();
        let z: f64 = post.iter().sum();
        let mut pred: Vec<f64> =
            (0..c).map(|c2| self.worlds.iter().zip(&post).map(|(w, p)| p / z * w[c2]).sum()).collect();
        if let PredictionRule::Distorted { shrink } = self.prediction {
            pred.iter_mut().for_each(|p| *p = (1.0 - shrink) * *p + shrink / c as f64);
        }
        // Renormalize away rounding so the dataset's sum check is exact.
        let s: f64 = pred.iter().sum();
        pred.iter_mut().for_each(|p| *p /= s);
        pred
    }
}

/// Draws the realized world, then `m` signals from it.
pub fn generate_single_task(
    world: &SingleTaskWorld,
    m: usize,
    seed: u64,
) -> Result<(SingleTaskDataset, usize), SimError> {
    world.validate()?;
    let mut rng = stream(seed, 0);
    let realized =
        WeightedIndex::new(&world.prior).map_err(|e| SimError::InvalidWorld(e.to_string()))?.sample(&mut rng);
    let signals = WeightedIndex::new(&world.worlds[realized]).map_err(|e| SimError::InvalidWorld(e.to_string()))?;
    let predictions: Vec<Vec<f64>> = (0..world.options()).map(|c| world.prediction_for(c)).collect();
    let records = (0..m)
        .map(|_| {
            let signal = signals.sample(&mut rng);
            SignalRecord { signal, prediction: predictions[signal].clone() }
        })
        .collect();
    let dataset =
        SingleTaskDataset::new(world.options(), records).map_err(|e| SimError::InvalidWorld(e.to_string()))?;
    Ok((dataset, realized))
}

/// Strategies of a multi-task population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StrategySpec {
    Honest,
    /// Every agent uses the same matrix.
    Shared {
        matrix: StrategyMatrix,
    },
    /// One matrix per agent.
    PerAgent {
        matrices: Vec<StrategyMatrix>,
    },
}

impl StrategySpec {
    pub fn expand(&self, options: usize, m: usize) -> Result<Vec<StrategyMatrix>, SimError> {
        let list = match self {
            StrategySpec::Honest => vec![StrategyMatrix::identity(options); m],
            StrategySpec::Shared { matrix } => vec![matrix.clone(); m],
            StrategySpec::PerAgent { matrices } => matrices.clone(),
        };
        if list.len() != m || list.iter().any(|s| s.options() != options) {
            return Err(SimError::InvalidStrategy(format!("need {m} strategies of size {options}")));
        }
        Ok(list)
    }
}

/// A runnable simulation description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Scenario {
    MultiTask {
        world: WorldModel,
        strategies: StrategySpec,
    },
    SingleTask {
        world: SingleTaskWorld,
        agents: usize,
        trials: usize,
    },
    /// A point cloud and an invertible affine map of it.
    Affine {
        points: DenseMatrix,
        transform: DenseMatrix,
        offset: Vec<f64>,
    },
}

pub const PRESET_NAMES: [&str; 4] = ["example12", "legal_pure", "affine_fixture", "two_world_spectral"];

fn pure_states(c: usize) -> StateSource {
    StateSource::Finite { states: DenseMatrix::identity(c).to_rows(), weights: vec![1.0; c] }
}

/// Three pure states answered through the example strategy.
pub fn example12_world(m_agents: usize) -> WorldModel {
    WorldModel {
        options: 3,
        source: pure_states(3),
        n_tasks: 60,
        m_agents,
        assignment: TaskAssignment::FixedSize { size: 30 },
    }
}

/// Two worlds with mirrored binary signal distributions.
pub fn two_world_spectral() -> SingleTaskWorld {
    SingleTaskWorld {
        worlds: vec![vec![0.97, 0.03], vec![0.03, 0.97]],
        prior: vec![0.5, 0.5],
        prediction: PredictionRule::Posterior,
    }
}

pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "example12" => Some(Scenario::MultiTask {
            world: example12_world(1000),
            strategies: StrategySpec::Shared { matrix: StrategyMatrix::example() },
        }),
        "legal_pure" => Some(Scenario::MultiTask { world: example12_world(1000), strategies: StrategySpec::Honest }),
        "affine_fixture" => {
            let (transform, offset) = fixtures::transform_t_b();
            Some(Scenario::Affine { points: fixtures::affine_7x2(), transform, offset })
        }
        "two_world_spectral" => Some(Scenario::SingleTask { world: two_world_spectral(), agents: 500, trials: 500 }),
        _ => None,
    }
}

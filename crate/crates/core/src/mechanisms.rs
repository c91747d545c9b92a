//! Multi-task aggregation and peer payments.
//!
//! Every agent answers a subset of `n` tasks, each with one of `C` options.
//! The row-normalized answer matrix is clustered with DMI-clustering to
//! extract one answer cluster per task. Agent `i` is paid by comparing her
//! reports with a clustering learned only from tasks she did not perform,
//! which keeps the reference independent of her own answers.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::AssignmentMatrix;
use crate::clustering::{dmi_cluster, ClusterError, ClusteringResult, SolverConfig};
use crate::matrix::{determinant, idxmax, DenseMatrix, MatrixError};
use crate::schema::{self, SchemaError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanismError {
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("task {0} has no answers")]
    UnansweredTask(usize),
    #[error("agent {agent} performed {performed} tasks; at least {required} are needed")]
    InsufficientTasks { agent: usize, performed: usize, required: usize },
    #[error("option {0} is never reported")]
    DeadOption(usize),
    #[error("answer matrix has rank {rank} but {options} options")]
    RankDeficient { rank: usize, options: usize },
    #[error("gold labels are empty")]
    EmptyGold,
    #[error("label alignment supports at most 8 clusters, got {0}")]
    TooManyClusters(usize),
    #[error("gold label {option} for task {task} is outside 0..{k}")]
    GoldOutOfRange { task: usize, option: usize, k: usize },
    #[error("invalid report set: {0}")]
    Invalid(String),
}

/// One agent's answers, keyed by task index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentReport {
    pub id: String,
    pub answers: BTreeMap<usize, usize>,
}

/// All reports for `n` tasks with `options` answer options.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSet {
    n: usize,
    options: usize,
    agents: Vec<AgentReport>,
}

impl ReportSet {
    pub fn new(n: usize, options: usize, agents: Vec<AgentReport>) -> Result<Self, MechanismError> {
        if n == 0 || options == 0 {
            return Err(MechanismError::Invalid("need at least one task and one option".into()));
        }
        for (i, a) in agents.iter().enumerate() {
            for (&t, &c) in &a.answers {
                if t >= n || c >= options {
                    return Err(MechanismError::Invalid(format!(
                        "agent {i} answers task {t} with option {c}; tasks are 0..{n}, options 0..{options}"
                    )));
                }
            }
        }
        Ok(Self { n, options, agents })
    }

    /// Parses `{n, options, agents: [{id, answers: {task: option}}]}`.
    /// Agent ids may be strings or numbers.
    pub fn from_json_str(text: &str) -> Result<Self, SchemaError> {
        let root = schema::parse(text)?;
        let obj = schema::object(&root, "")?;
        let n = schema::index(schema::field(obj, "n", "")?, "/n")?;
        let options = schema::index(schema::field(obj, "options", "")?, "/options")?;
        if n == 0 {
            return Err(SchemaError::new("/n", "must be positive"));
        }
        if options == 0 {
            return Err(SchemaError::new("/options", "must be positive"));
        }
        let list = schema::array(schema::field(obj, "agents", "")?, "/agents")?;
        let mut agents = Vec::with_capacity(list.len());
        for (i, a) in list.iter().enumerate() {
            let ptr = schema::child("/agents", i);
            let ao = schema::object(a, &ptr)?;
            let id_ptr = schema::child(&ptr, "id");
            let id = match schema::field(ao, "id", &ptr)? {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(num) => num.to_string(),
                _ => return Err(SchemaError::new(id_ptr, "expected a string or number")),
            };
            let ans_ptr = schema::child(&ptr, "answers");
            let mut answers = BTreeMap::new();
            for (key, value) in schema::object(schema::field(ao, "answers", &ptr)?, &ans_ptr)? {
                let p = schema::child(&ans_ptr, key);
                let t: usize =
                    key.parse().map_err(|_| SchemaError::new(&p, "task key must be a non-negative integer"))?;
                if t >= n {
                    return Err(SchemaError::new(&p, format!("task index must be below n = {n}")));
                }
                let c = schema::index(value, &p)?;
                if c >= options {
                    return Err(SchemaError::new(&p, format!("option must be below {options}")));
                }
                answers.insert(t, c);
            }
            agents.push(AgentReport { id, answers });
        }
        Ok(Self { n, options, agents })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report sets always serialize")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn options(&self) -> usize {
        self.options
    }

    pub fn agents(&self) -> &[AgentReport] {
        &self.agents
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    /// `T_i`, ascending.
    pub fn performed(&self, agent: usize) -> Vec<usize> {
        self.agents[agent].answers.keys().copied().collect()
    }

    /// `R_i`: one-hot rows on performed tasks, zero rows elsewhere.
    pub fn report_matrix(&self, agent: usize) -> DenseMatrix {
        let mut r = DenseMatrix::zeros(self.n, self.options);
        for (&t, &c) in &self.agents[agent].answers {
            r[(t, c)] = 1.0;
        }
        r
    }

    /// `Σ_i R_i`.
    pub fn answer_counts(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.n, self.options);
        for agent in &self.agents {
            for (&t, &c) in &agent.answers {
                a[(t, c)] += 1.0;
            }
        }
        a
    }
}

/// Row-normalized `Σ_i R_i`.
pub fn aggregate_answer_matrix(r: &ReportSet) -> Result<DenseMatrix, MechanismError> {
    let (a, zero_rows) = r.answer_counts().row_normalized();
    match zero_rows.first() {
        Some(&t) => Err(MechanismError::UnansweredTask(t)),
        None => Ok(a),
    }
}

/// DMI-clustering of the aggregated answer matrix.
pub fn extract_knowledge(r: &ReportSet, config: &SolverConfig) -> Result<ClusteringResult, MechanismError> {
    Ok(dmi_cluster(&aggregate_answer_matrix(r)?, config)?)
}

/// How an agent's performed tasks enter the payment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentMode {
    /// Product of the determinants on two disjoint halves of `T_i`.
    #[default]
    TwoPart,
    /// A single determinant over all of `T_i`.
    SinglePart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PaymentConfig {
    /// Seeds the split of each agent's tasks.
    pub seed: u64,
    pub mode: PaymentMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PaymentStatus {
    Paid,
    /// Some performed task had no other answers; paid 0.
    LeaveOneOutUnanswered {
        tasks: Vec<usize>,
    },
    /// The leave-one-out answer matrix has fewer than `C` clusters; paid 0.
    RankDeficient {
        k: usize,
    },
    /// Clustering the leave-one-out matrix failed; paid 0.
    ClusteringFailed {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPayment {
    pub id: String,
    pub payment: f64,
    pub status: PaymentStatus,
    /// `T_i`, ascending.
    pub tasks: Vec<usize>,
    /// Cluster label of each task in `tasks` under the leave-one-out partition.
    pub clustering: Option<Vec<usize>>,
    /// Maps leave-one-out cluster labels onto the extraction's labels
    /// (best agreement on `T_i`).
    pub label_permutation: Option<Vec<usize>>,
    /// Determinant on each part (one entry in single-part mode).
    pub part_determinants: Vec<f64>,
}

impl AgentPayment {
    fn zero(id: &str, tasks: Vec<usize>, status: PaymentStatus) -> Self {
        Self {
            id: id.to_string(),
            payment: 0.0,
            status,
            tasks,
            clustering: None,
            label_permutation: None,
            part_determinants: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismOutcome {
    pub extracted: ClusteringResult,
    pub payments: Vec<f64>,
    pub agents: Vec<AgentPayment>,
    /// DMI-score of the extraction; `None` when the answer matrix has
    /// rank below `C`.
    pub quality: Option<f64>,
}

fn check_task_floor(r: &ReportSet) -> Result<(), MechanismError> {
    let required = 2 * r.options;
    for i in 0..r.agent_count() {
        let performed = r.agents[i].answers.len();
        if performed < required {
            return Err(MechanismError::InsufficientTasks { agent: i, performed, required });
        }
    }
    Ok(())
}

/// Runs extraction and pays every agent.
pub fn kdmi_payments(r: &ReportSet, config: &SolverConfig, seed: u64) -> Result<MechanismOutcome, MechanismError> {
    kdmi_payments_with(r, config, &PaymentConfig { seed, mode: PaymentMode::TwoPart })
}

pub fn kdmi_payments_with(
    r: &ReportSet,
    config: &SolverConfig,
    payment: &PaymentConfig,
) -> Result<MechanismOutcome, MechanismError> {
    check_task_floor(r)?;
    let counts = r.answer_counts();
    let extracted = extract_knowledge(r, config)?;
    let agents: Vec<AgentPayment> = (0..r.agent_count())
        .into_par_iter()
        .map(|i| pay_agent(r, &counts, i, config, payment, Some(&extracted)))
        .collect::<Result<_, _>>()?;
    let quality = (extracted.k == r.options).then_some(extracted.score);
    Ok(MechanismOutcome { payments: agents.iter().map(|a| a.payment).collect(), agents, extracted, quality })
}

/// Payment of a single agent, without running the global extraction.
pub fn agent_payment(
    r: &ReportSet,
    agent: usize,
    config: &SolverConfig,
    payment: &PaymentConfig,
) -> Result<AgentPayment, MechanismError> {
    let performed = r.agents[agent].answers.len();
    if performed < 2 * r.options {
        return Err(MechanismError::InsufficientTasks { agent, performed, required: 2 * r.options });
    }
    pay_agent(r, &r.answer_counts(), agent, config, payment, None)
}

fn pay_agent(
    r: &ReportSet,
    counts: &DenseMatrix,
    i: usize,
    config: &SolverConfig,
    payment: &PaymentConfig,
    extracted: Option<&ClusteringResult>,
) -> Result<AgentPayment, MechanismError> {
    let id = r.agents[i].id.as_str();
    let tasks = r.performed(i);
    let others: Vec<usize> = (0..r.n).filter(|t| !r.agents[i].answers.contains_key(t)).collect();

    let mut loo = counts.clone();
    for (&t, &c) in &r.agents[i].answers {
        loo[(t, c)] -= 1.0;
    }
    let (loo, zero_rows) = loo.row_normalized();
    if let Some(&t) = zero_rows.iter().find(|t| !r.agents[i].answers.contains_key(t)) {
        return Err(MechanismError::UnansweredTask(t));
    }
    if !zero_rows.is_empty() {
        return Ok(AgentPayment::zero(id, tasks, PaymentStatus::LeaveOneOutUnanswered { tasks: zero_rows }));
    }
    if others.is_empty() {
        let status = PaymentStatus::ClusteringFailed { reason: "agent performed every task".into() };
        return Ok(AgentPayment::zero(id, tasks, status));
    }

    let reference = match dmi_cluster(&loo.select_rows(&others)?, config) {
        Ok(res) => res,
        Err(e) => {
            let status = PaymentStatus::ClusteringFailed { reason: e.to_string() };
            return Ok(AgentPayment::zero(id, tasks, status));
        }
    };
    if reference.k != r.options {
        return Ok(AgentPayment::zero(id, tasks, PaymentStatus::RankDeficient { k: reference.k }));
    }
    let own = loo.select_rows(&tasks)?.with_ones_column().select_columns(reference.picked_columns.indices())?;
    let c_i = idxmax(&own.matmul(&reference.partition)?);

    let report = r.report_matrix(i).select_rows(&tasks)?;
    let positions: Vec<usize> = (0..tasks.len()).collect();
    let parts: Vec<Vec<usize>> = match payment.mode {
        PaymentMode::SinglePart => vec![positions],
        PaymentMode::TwoPart => {
            let mut shuffled = positions;
            let mut rng = ChaCha8Rng::seed_from_u64(payment.seed);
            rng.set_stream(i as u64);
            shuffled.shuffle(&mut rng);
            let second = shuffled.split_off(shuffled.len().div_ceil(2));
            vec![shuffled, second]
        }
    };
    let mut part_determinants = Vec::with_capacity(parts.len());
    for part in &parts {
        let joint = c_i.restricted(part).aggregate(&report.select_rows(part)?);
        part_determinants.push(determinant(&joint)?);
    }

    let label_permutation = match extracted {
        Some(ex) => {
            let gold: BTreeMap<usize, usize> =
                tasks.iter().enumerate().map(|(pos, &t)| (pos, ex.assignment.label(t))).collect();
            Some(align_labels(&c_i, &gold)?)
        }
        None => None,
    };
    Ok(AgentPayment {
        id: id.to_string(),
        payment: part_determinants.iter().product(),
        status: PaymentStatus::Paid,
        tasks,
        clustering: Some(c_i.into_labels()),
        label_permutation,
        part_determinants,
    })
}

/// Result of the surprisingly-popular rule on one answer row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpChoice {
    pub option: usize,
    /// Another option attains the same ratio within 1e-12 relative.
    pub tied: bool,
}

/// `argmax_c a_c / prior_c`; ties go to the lowest index.
pub fn sp_choice(shares: &[f64], prior: &[f64]) -> Result<SpChoice, MechanismError> {
    if shares.len() != prior.len() || shares.is_empty() {
        return Err(MechanismError::Invalid("shares and prior must have equal non-zero length".into()));
    }
    if let Some(c) = prior.iter().position(|&p| p <= 0.0) {
        return Err(MechanismError::DeadOption(c));
    }
    let ratios: Vec<f64> = shares.iter().zip(prior).map(|(a, p)| a / p).collect();
    let (option, best) =
        ratios.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (c, &v)| if v > acc.1 { (c, v) } else { acc });
    let tied = ratios.iter().enumerate().any(|(c, &v)| c != option && (best - v).abs() <= 1e-12 * best.abs().max(1.0));
    Ok(SpChoice { option, tied })
}

/// Per-task `argmax_c a_tc / ā_c`, i.e. `idxmax` of the column-normalized
/// answer matrix.
pub fn surprisingly_popular_multitask(a: &DenseMatrix) -> Result<AssignmentMatrix, MechanismError> {
    let normalized = a.column_normalized().map_err(MechanismError::DeadOption)?;
    Ok(idxmax(&normalized))
}

/// Per-task majority answer.
pub fn plurality(a: &DenseMatrix) -> AssignmentMatrix {
    idxmax(a)
}

/// Surprisingly-popular as a special case of DMI-clustering: a matrix `D`
/// with `idxmax(ncol(A) D)` equal to the DMI assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatedSp {
    pub d: DenseMatrix,
    pub dmi: ClusteringResult,
    pub reclassified: AssignmentMatrix,
    /// `reclassified` equals the DMI assignment row for row.
    pub reproduced: bool,
}

/// Column-normalizing by `s_c` and multiplying by `diag(s) D*` undoes
/// itself, so `D = diag(s) D*` where `D*` is the DMI partition.
pub fn rotated_sp_check(a: &DenseMatrix, config: &SolverConfig) -> Result<RotatedSp, MechanismError> {
    let sums = a.column_sums();
    let ncol = a.column_normalized().map_err(MechanismError::DeadOption)?;
    let dmi = dmi_cluster(a, config)?;
    let all: Vec<usize> = (0..a.cols()).collect();
    if dmi.picked_columns.indices() != all.as_slice() {
        return Err(MechanismError::RankDeficient { rank: dmi.k, options: a.cols() });
    }
    let d = DenseMatrix::diagonal(&sums).matmul(&dmi.partition)?;
    let reclassified = idxmax(&ncol.matmul(&d)?);
    let reproduced = reclassified == dmi.assignment;
    Ok(RotatedSp { d, dmi, reclassified, reproduced })
}

/// Lexicographic successor; false when `p` is the last permutation.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Permutation `perm` (cluster `c` becomes option `perm[c]`) agreeing with
/// the most gold labels; the lexicographically first among ties.
pub fn align_labels(c: &AssignmentMatrix, gold: &BTreeMap<usize, usize>) -> Result<Vec<usize>, MechanismError> {
    let k = c.k();
    if gold.is_empty() {
        return Err(MechanismError::EmptyGold);
    }
    if k > 8 {
        return Err(MechanismError::TooManyClusters(k));
    }
    let mut agree = vec![vec![0usize; k]; k];
    for (&task, &option) in gold {
        if option >= k {
            return Err(MechanismError::GoldOutOfRange { task, option, k });
        }
        if task >= c.n() {
            return Err(MechanismError::Invalid(format!("gold task {task} is outside 0..{}", c.n())));
        }
        agree[c.label(task)][option] += 1;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = (0, perm.clone());
    let mut first = true;
    loop {
        let score: usize = perm.iter().enumerate().map(|(cl, &o)| agree[cl][o]).sum();
        if first || score > best.0 {
            best = (score, perm.clone());
            first = false;
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn agent(id: &str, answers: &[(usize, usize)]) -> AgentReport {
        AgentReport { id: id.into(), answers: answers.iter().copied().collect() }
    }

    #[test]
    fn aggregation_examples() {
        let one = ReportSet::new(3, 2, vec![agent("a", &[(0, 1), (1, 1), (2, 1)])]).unwrap();
        let a = aggregate_answer_matrix(&one).unwrap();
        assert!(a.row_iter().all(|r| r == [0.0, 1.0]));

        let two = ReportSet::new(1, 2, vec![agent("a", &[(0, 0)]), agent("b", &[(0, 1)])]).unwrap();
        assert_eq!(aggregate_answer_matrix(&two).unwrap().row(0), &[0.5, 0.5]);

        let gap = ReportSet::new(2, 2, vec![agent("a", &[(0, 0)])]).unwrap();
        assert_eq!(aggregate_answer_matrix(&gap), Err(MechanismError::UnansweredTask(1)));
    }

    #[test]
    fn sp_worked_numbers() {
        let c = sp_choice(&[0.56, 0.40, 0.04], &[0.70, 0.26, 0.04]).unwrap();
        assert_eq!(c, SpChoice { option: 1, tied: false });
        let prior = [0.527, 0.393, 0.08];
        assert_eq!(sp_choice(&[0.56, 0.34, 0.10], &prior).unwrap().option, 2);
        assert_eq!(sp_choice(&[0.46, 0.44, 0.10], &prior).unwrap().option, 2);
        let tie = sp_choice(&[0.2, 0.8], &[0.2, 0.8]).unwrap();
        assert_eq!(tie, SpChoice { option: 0, tied: true });
        assert_eq!(sp_choice(&[1.0, 0.0], &[0.5, 0.0]), Err(MechanismError::DeadOption(1)));
    }

    #[test]
    fn dead_option_is_reported() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.5, 0.0]]).unwrap();
        assert_eq!(surprisingly_popular_multitask(&a), Err(MechanismError::DeadOption(1)));
    }

    #[test]
    fn alignment_examples() {
        let c = AssignmentMatrix::from_labels(vec![0, 1, 2, 0], 3).unwrap();
        let gold: BTreeMap<_, _> = [(0, 2), (1, 0), (2, 1)].into();
        assert_eq!(align_labels(&c, &gold).unwrap(), vec![2, 0, 1]);
        let identity: BTreeMap<_, _> = [(0, 0), (1, 1), (2, 2)].into();
        assert_eq!(align_labels(&c, &identity).unwrap(), vec![0, 1, 2]);
        // Tasks 0 and 3 share a cluster but disagree: both 0->0 and 0->1 score 2.
        let conflict: BTreeMap<_, _> = [(0, 0), (3, 1), (2, 2)].into();
        assert_eq!(align_labels(&c, &conflict).unwrap(), vec![0, 1, 2]);
        assert_eq!(align_labels(&c, &BTreeMap::new()), Err(MechanismError::EmptyGold));
    }

    #[test]
    fn permutations_are_lexicographic() {
        let mut p = vec![0, 1, 2];
        let mut all = vec![p.clone()];
        while next_permutation(&mut p) {
            all.push(p.clone());
        }
        assert_eq!(all.len(), 6);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rotated_sp_on_simplex_fixture() {
        let r = rotated_sp_check(&fixtures::dmi_20x3(), &SolverConfig::default()).unwrap();
        assert!(r.reproduced);
    }

    #[test]
    fn json_round_trip_and_pointers() {
        let text = r#"{"n": 2, "options": 2, "agents": [{"id": 7, "answers": {"0": 1, "1": 0}}]}"#;
        let r = ReportSet::from_json_str(text).unwrap();
        assert_eq!(r.agents()[0].id, "7");
        assert_eq!(ReportSet::from_json_str(&r.to_json_string()).unwrap(), r);

        let bad = r#"{"n": 2, "options": 2, "agents": [{"id": "a", "answers": {"0": 5}}]}"#;
        assert_eq!(ReportSet::from_json_str(bad).unwrap_err().pointer, "/agents/0/answers/0");
        let missing = r#"{"n": 2, "agents": []}"#;
        assert_eq!(ReportSet::from_json_str(missing).unwrap_err().pointer, "/options");
    }

    #[test]
    fn insufficient_tasks_abort() {
        let r = ReportSet::new(
            4,
            2,
            vec![agent("a", &[(0, 0), (1, 1), (2, 0)]), agent("b", &[(0, 0), (1, 1), (2, 0), (3, 1)])],
        )
        .unwrap();
        let err = kdmi_payments(&r, &SolverConfig::default(), 0).unwrap_err();
        assert_eq!(err, MechanismError::InsufficientTasks { agent: 0, performed: 3, required: 4 });
    }
}

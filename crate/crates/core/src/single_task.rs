//! Aggregation of a single multiple-choice question from signals and
//! predictions.
//!
//! Each agent reports her answer and a forecast of everybody else's
//! answers. Averaging forecasts per answer gives `Pr[c'|c]`, from which
//! the prior `v` and the joint `M` are reconstructed. Surprisingly-popular
//! compares the observed shares with `v`; the spectral variant projects
//! `a - v` onto the top eigenvector of `M - vᵀv`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{DenseMatrix, MatrixError};
use crate::mechanisms::{sp_choice, SpChoice};
use crate::schema::{self, SchemaError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SingleTaskError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("no agent reported option {0}")]
    MissingOption(usize),
    #[error("Pr[{c}|{given}] is zero, so the prior of {c} cannot be reconstructed")]
    ZeroConditional { c: usize, given: usize },
    #[error("top eigenvalue {top:.3e} is not separated from {second:.3e}")]
    DegenerateSpectrum { top: f64, second: f64 },
    #[error("power iteration did not converge in {iterations} iterations")]
    NonConvergence { iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub signal: usize,
    pub prediction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTaskDataset {
    options: usize,
    records: Vec<SignalRecord>,
}

const PREDICTION_SUM_TOL: f64 = 1e-9;

fn check_record(r: &SignalRecord, options: usize) -> Result<(), String> {
    if r.signal >= options {
        return Err(format!("signal {} is outside 0..{options}", r.signal));
    }
    if r.prediction.len() != options {
        return Err(format!("prediction has {} entries, expected {options}", r.prediction.len()));
    }
    if r.prediction.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err("prediction entries must be finite and non-negative".into());
    }
    let sum: f64 = r.prediction.iter().sum();
    if (sum - 1.0).abs() > PREDICTION_SUM_TOL {
        return Err(format!("prediction sums to {sum}, not 1"));
    }
    Ok(())
}

impl SingleTaskDataset {
    pub fn new(options: usize, records: Vec<SignalRecord>) -> Result<Self, SingleTaskError> {
        if options < 2 {
            return Err(SingleTaskError::Invalid("need at least two options".into()));
        }
        for (i, r) in records.iter().enumerate() {
            check_record(r, options).map_err(|m| SingleTaskError::Invalid(format!("record {i}: {m}")))?;
        }
        Ok(Self { options, records })
    }

    /// Parses `{options, records: [{signal, prediction: [..]}]}`.
    pub fn from_json_str(text: &str) -> Result<Self, SchemaError> {
        let root = schema::parse(text)?;
        let obj = schema::object(&root, "")?;
        let options = schema::index(schema::field(obj, "options", "")?, "/options")?;
        if options < 2 {
            return Err(SchemaError::new("/options", "need at least two options"));
        }
        let list = schema::array(schema::field(obj, "records", "")?, "/records")?;
        let mut records = Vec::with_capacity(list.len());
        for (i, rec) in list.iter().enumerate() {
            let ptr = schema::child("/records", i);
            let ro = schema::object(rec, &ptr)?;
            let signal = schema::index(schema::field(ro, "signal", &ptr)?, &schema::child(&ptr, "signal"))?;
            let pptr = schema::child(&ptr, "prediction");
            let prediction = schema::array(schema::field(ro, "prediction", &ptr)?, &pptr)?
                .iter()
                .enumerate()
                .map(|(j, v)| schema::number(v, &schema::child(&pptr, j)))
                .collect::<Result<Vec<_>, _>>()?;
            let record = SignalRecord { signal, prediction };
            check_record(&record, options).map_err(|m| SchemaError::new(&ptr, m))?;
            records.push(record);
        }
        Ok(Self { options, records })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("datasets always serialize")
    }

    pub fn options(&self) -> usize {
        self.options
    }

    pub fn records(&self) -> &[SignalRecord] {
        &self.records
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentOptions {
    /// Additive smoothing of every conditional, `(p + ε) / (1 + Cε)`.
    pub smoothing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    /// Observed answer frequencies `a`.
    pub answer_shares: Vec<f64>,
    /// Row `c` is `Pr[· | c]`.
    pub conditional: DenseMatrix,
    /// Reconstructed `Pr[c]`, normalized to sum to 1.
    pub prior: Vec<f64>,
    /// Raw reconstructed prior sum minus 1; zero for consistent forecasts.
    pub prior_sum_defect: f64,
    /// `joint[c][c'] = Pr[c'|c] Pr[c]`.
    pub joint: DenseMatrix,
    /// `joint - vᵀv`.
    pub covariance: DenseMatrix,
    /// Largest `|Σ_c joint[c][c'] - Pr[c']|`; zero for consistent forecasts.
    pub marginal_defect: f64,
    /// Some joint entry is negative.
    pub negative_joint: bool,
}

pub fn estimate_moments(d: &SingleTaskDataset) -> Result<MomentEstimates, SingleTaskError> {
    estimate_moments_with(d, &MomentOptions::default())
}

pub fn estimate_moments_with(d: &SingleTaskDataset, opts: &MomentOptions) -> Result<MomentEstimates, SingleTaskError> {
    let c_count = d.options;
    let mut counts = vec![0usize; c_count];
    let mut conditional = DenseMatrix::zeros(c_count, c_count);
    for r in &d.records {
        counts[r.signal] += 1;
        for (slot, p) in conditional.row_mut(r.signal).iter_mut().zip(&r.prediction) {
            *slot += p;
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(SingleTaskError::MissingOption(c));
    }
    for (c, &n) in counts.iter().enumerate() {
        for v in conditional.row_mut(c) {
            *v /= n as f64;
            if let Some(eps) = opts.smoothing {
                *v = (*v + eps) / (1.0 + c_count as f64 * eps);
            }
        }
    }

    let mut raw_prior = vec![0.0; c_count];
    for (c, slot) in raw_prior.iter_mut().enumerate() {
        let mut sum = 0.0;
        for given in 0..c_count {
            let back = conditional[(given, c)];
            if back <= 0.0 {
                return Err(SingleTaskError::ZeroConditional { c, given });
            }
            sum += conditional[(c, given)] / back;
        }
        *slot = 1.0 / sum;
    }
    let total: f64 = raw_prior.iter().sum();
    let prior: Vec<f64> = raw_prior.iter().map(|p| p / total).collect();

    let mut joint = DenseMatrix::zeros(c_count, c_count);
    let mut covariance = DenseMatrix::zeros(c_count, c_count);
    for c in 0..c_count {
        for c2 in 0..c_count {
            joint[(c, c2)] = conditional[(c, c2)] * prior[c];
            covariance[(c, c2)] = joint[(c, c2)] - prior[c] * prior[c2];
        }
    }
    let marginal_defect = (0..c_count)
        .map(|c2| ((0..c_count).map(|c| joint[(c, c2)]).sum::<f64>() - prior[c2]).abs())
        .fold(0.0, f64::max);
    let n = d.records.len() as f64;
    Ok(MomentEstimates {
        answer_shares: counts.iter().map(|&k| k as f64 / n).collect(),
        negative_joint: joint.as_slice().iter().any(|&v| v < 0.0),
        conditional,
        prior,
        prior_sum_defect: total - 1.0,
        joint,
        covariance,
        marginal_defect,
    })
}

/// `argmax_c a_c / v_c` with the reconstructed prior `v`.
pub fn surprisingly_popular_single(d: &SingleTaskDataset) -> Result<SpChoice, SingleTaskError> {
    surprisingly_popular_from(&estimate_moments(d)?)
}

pub fn surprisingly_popular_from(m: &MomentEstimates) -> Result<SpChoice, SingleTaskError> {
    sp_choice(&m.answer_shares, &m.prior).map_err(|e| SingleTaskError::Invalid(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldLabel {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    /// Convergence when `‖Cov e - λ e‖ ≤ tol · |λ|`.
    pub tol: f64,
    pub max_iters: usize,
    /// Minimum `λ₁ - λ₂` relative to the spectral scale.
    pub gap_tol: f64,
    /// Seeds the power-iteration start vector.
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 10_000, gap_tol: 1e-8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOutcome {
    /// `None` when `a - v` is orthogonal to the eigenvector.
    pub label: Option<WorldLabel>,
    pub projection: f64,
    /// Unit eigenvector, oriented so its largest-magnitude entry is positive.
    pub eigenvector: Vec<f64>,
    pub eigenvalue: f64,
    pub second_eigenvalue: f64,
    pub gap: f64,
    /// `‖Cov e - λ e‖`.
    pub residual: f64,
    pub iterations: usize,
    /// Largest `|Cov - Covᵀ|` entry before symmetrization.
    pub asymmetry: f64,
    pub asymmetry_flagged: bool,
}

/// Covariances below this (in max-abs) carry no direction at all.
const ZERO_COVARIANCE: f64 = 1e-12;
const PROJECTION_TIE: f64 = 1e-12;
const ORIENTATION_TIE: f64 = 1e-6;

pub fn spectral_truth_serum(d: &SingleTaskDataset) -> Result<SpectralOutcome, SingleTaskError> {
    spectral_from(&estimate_moments(d)?, &SpectralOptions::default())
}

pub fn spectral_from(m: &MomentEstimates, opts: &SpectralOptions) -> Result<SpectralOutcome, SingleTaskError> {
    let cov = &m.covariance;
    let c = cov.rows();
    let mut sym = DenseMatrix::zeros(c, c);
    let mut asymmetry = 0.0f64;
    for i in 0..c {
        for j in 0..c {
            sym[(i, j)] = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            asymmetry = asymmetry.max((cov[(i, j)] - cov[(j, i)]).abs());
        }
    }
    let scale = inf_norm(&sym);
    if scale <= ZERO_COVARIANCE {
        return Err(SingleTaskError::DegenerateSpectrum { top: 0.0, second: 0.0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (lambda, mut e, iterations) = top_eigenpair(&sym, opts, scale * f64::EPSILON, &mut rng)?;

    // Send e to the bottom of the spectrum so the next top pair is λ₂.
    let mut deflated = sym.clone();
    for i in 0..c {
        for j in 0..c {
            deflated[(i, j)] -= (lambda + scale) * e[i] * e[j];
        }
    }
    // λ₂ only feeds the gap test, so accuracy relative to the scale suffices.
    let (second, _, _) = top_eigenpair(&deflated, opts, scale, &mut rng)?;
    let gap = lambda - second;
    if gap < opts.gap_tol * scale {
        return Err(SingleTaskError::DegenerateSpectrum { top: lambda, second });
    }

    orient(&mut e);
    let residual = residual_norm(&sym, &e, lambda);
    let projection: f64 = e.iter().zip(m.answer_shares.iter().zip(&m.prior)).map(|(e, (a, v))| e * (a - v)).sum();
    let label = if projection.abs() <= PROJECTION_TIE {
        None
    } else if projection > 0.0 {
        Some(WorldLabel::Plus)
    } else {
        Some(WorldLabel::Minus)
    };
    Ok(SpectralOutcome {
        label,
        projection,
        eigenvector: e,
        eigenvalue: lambda,
        second_eigenvalue: second,
        gap,
        residual,
        iterations,
        asymmetry,
        asymmetry_flagged: asymmetry > 1e-6,
    })
}

fn inf_norm(m: &DenseMatrix) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn mat_vec(m: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    m.row_iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

fn residual_norm(m: &DenseMatrix, e: &[f64], lambda: f64) -> f64 {
    mat_vec(m, e).iter().zip(e).map(|(me, x)| (me - lambda * x).powi(2)).sum::<f64>().sqrt()
}

/// Largest algebraic eigenpair of a symmetric matrix by power iteration on
/// `m + σI`, `σ = ‖m‖∞`, which makes every shifted eigenvalue non-negative.
/// Stops once the residual is below `tol · max(|λ|, floor)`.
fn top_eigenpair(
    m: &DenseMatrix,
    opts: &SpectralOptions,
    floor: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<f64>, usize), SingleTaskError> {
    let c = m.rows();
    let sigma = inf_norm(m);
    let mut x: Vec<f64> = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
    if normalize(&mut x) == 0.0 {
        x[0] = 1.0;
    }
    for it in 1..=opts.max_iters {
        let mx = mat_vec(m, &x);
        let lambda: f64 = mx.iter().zip(&x).map(|(a, b)| a * b).sum();
        let res = mx.iter().zip(&x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        if res <= opts.tol * lambda.abs().max(floor) {
            return Ok((lambda, x, it));
        }
        let mut next: Vec<f64> = mx.iter().zip(&x).map(|(a, b)| a + sigma * b).collect();
        if normalize(&mut next) == 0.0 {
            return Ok((lambda, x, it));
        }
        x = next;
    }
    Err(SingleTaskError::NonConvergence { iterations: opts.max_iters })
}

/// `v` flipped so its largest-magnitude entry is positive, the orientation
/// applied to the eigenvector before labeling.
pub fn canonical_orientation(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    orient(&mut out);
    out
}

/// Flips `e` so its largest-magnitude entry is positive; entries within a
/// relative 1e-6 of the largest count as tied and the lowest index wins.
fn orient(e: &mut [f64]) {
    let max = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(lead) = e.iter().position(|v| v.abs() >= max * (1.0 - ORIENTATION_TIE)) {
        if e[lead] < 0.0 {
            e.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

//! Simulation lab: heterogeneous populations, Poisson sampling, exact
//! expected r-SACs and the relative-error metric.

mod experiment;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::counts::FrequencyHistogram;
use crate::numeric::poisson_survival;

pub(crate) use experiment::{population_for, replicate_stream};
pub use experiment::{
    classify_cv, model_population, replicate_sample, run_experiment, CvClassification, ExperimentConfig, ExperimentReport, MethodScore,
    ModelResult,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("population needs at least 2 species, got {0}")]
    TooSmall(usize),
    #[error("probabilities must be non-negative and sum to 1 (sum = {0})")]
    BadProbabilities(f64),
    #[error("estimate grid is {est_rows}x{est_cols} but truth is {truth_rows}x{truth_cols}")]
    ShapeMismatch {
        est_rows: usize,
        est_cols: usize,
        truth_rows: usize,
        truth_cols: usize,
    },
    #[error("unknown model '{0}'")]
    UnknownModel(String),
}

/// Rate distributions of the six simulation models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PopulationModel {
    Homogeneous,
    NegBinomial { shape: f64, scale: f64 },
    LogNormal { mu: f64, sigma: f64 },
    /// `lambda_i ∝ 1 / (i + offset)^exponent`
    Zipf { offset: f64, exponent: f64 },
}

/// Named models: P, NB1, NB2, LN, Z, ZM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelName {
    P,
    Nb1,
    Nb2,
    Ln,
    Z,
    Zm,
}

impl ModelName {
    pub const ALL: [ModelName; 6] = [
        ModelName::P,
        ModelName::Nb1,
        ModelName::Nb2,
        ModelName::Ln,
        ModelName::Z,
        ModelName::Zm,
    ];

    pub fn model(self) -> PopulationModel {
        match self {
            ModelName::P => PopulationModel::Homogeneous,
            ModelName::Nb1 => PopulationModel::NegBinomial { shape: 1.0, scale: 1.0 },
            ModelName::Nb2 => PopulationModel::NegBinomial { shape: 0.01, scale: 1.0 },
            ModelName::Ln => PopulationModel::LogNormal { mu: 0.0, sigma: 1.0 },
            ModelName::Z => PopulationModel::Zipf { offset: 100.0, exponent: 1.0 },
            ModelName::Zm => PopulationModel::Zipf { offset: 100.0, exponent: 1.1 },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelName::P => "P",
            ModelName::Nb1 => "NB1",
            ModelName::Nb2 => "NB2",
            ModelName::Ln => "LN",
            ModelName::Z => "Z",
            ModelName::Zm => "ZM",
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelName {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| SimError::UnknownModel(s.to_string()))
    }
}

/// Per-species Poisson rates, normalised so they sum to the species count.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector {
    rates: Vec<f64>,
}

impl RateVector {
    /// Rescales `raw` so that `sum = len`.
    pub fn normalized(mut raw: Vec<f64>) -> Result<Self, SimError> {
        if raw.len() < 2 {
            return Err(SimError::TooSmall(raw.len()));
        }
        let l = raw.len() as f64;
        let sum: f64 = raw.iter().sum();
        raw.iter_mut().for_each(|v| *v *= l / sum);
        Ok(Self { rates: raw })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

pub fn draw_population<R: Rng + ?Sized>(
    model: PopulationModel,
    l: usize,
    rng: &mut R,
) -> Result<RateVector, SimError> {
    if l < 2 {
        return Err(SimError::TooSmall(l));
    }
    let raw: Vec<f64> = match model {
        PopulationModel::Homogeneous => vec![1.0; l],
        PopulationModel::NegBinomial { shape, scale } => {
            let g = Gamma::new(shape, scale).expect("positive gamma parameters");
            (0..l).map(|_| g.sample(rng)).collect()
        }
        PopulationModel::LogNormal { mu, sigma } => {
            let d = LogNormal::new(mu, sigma).expect("valid lognormal parameters");
            (0..l).map(|_| d.sample(rng)).collect()
        }
        PopulationModel::Zipf { offset, exponent } => (1..=l)
            .map(|i| (i as f64 + offset).powf(-exponent))
            .collect(),
    };
    RateVector::normalized(raw)
}

/// Histogram of independent `Poisson(lambda_i t)` counts.
pub fn sample_poisson<R: Rng + ?Sized>(rates: &RateVector, t: f64, rng: &mut R) -> FrequencyHistogram {
    let mut hist = FrequencyHistogram::new();
    for &lambda in rates.rates() {
        let mu = lambda * t;
        if !(mu > 0.0) {
            continue;
        }
        let k = Poisson::new(mu).expect("finite positive mean").sample(rng);
        if k >= 1.0 {
            hist.add(k as u64, 1);
        }
    }
    hist
}

/// `sum_i P(Pois(lambda_i t) >= r)`
pub fn true_rsac(rates: &RateVector, r: usize, t: f64) -> f64 {
    let grid = truth_grid(rates, r, &[t]);
    grid[r - 1][0]
}

const TRUTH_CHUNK: usize = 4096;

/// `grid[r - 1][k] = sum_i P(Pois(lambda_i ts[k]) >= r)`.
///
/// Species are processed in fixed-size chunks in parallel and the chunk sums
/// are added in chunk order, so the result is identical for any thread count.
pub fn truth_grid(rates: &RateVector, r_max: usize, ts: &[f64]) -> Vec<Vec<f64>> {
    let partials: Vec<Vec<f64>> = rates
        .rates()
        .par_chunks(TRUTH_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; r_max * ts.len()];
            let mut sf = Vec::with_capacity(r_max);
            for &lambda in chunk {
                for (k, &t) in ts.iter().enumerate() {
                    poisson_survival(lambda * t, r_max, &mut sf);
                    for (a, v) in acc[k * r_max..(k + 1) * r_max].iter_mut().zip(&sf) {
                        *a += v;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; r_max * ts.len()];
    for p in partials {
        for (a, b) in total.iter_mut().zip(p) {
            *a += b;
        }
    }
    (0..r_max)
        .map(|r| (0..ts.len()).map(|k| total[k * r_max + r]).collect())
        .collect()
}

/// Standard deviation (denominator `L - 1`) over mean.
pub fn cv_empirical(rates: &[f64]) -> f64 {
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var.sqrt() / mean
}

/// Neumaier summation, so long probability vectors are not rejected for
/// round-off alone.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `E[C] = 1 - sum p_i (1 - p_i)^N`
pub fn expected_coverage(p: &[f64], n: u64) -> Result<f64, SimError> {
    let sum = compensated_sum(p);
    if p.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
        return Err(SimError::BadProbabilities(sum));
    }
    let n = n as f64;
    Ok(1.0 - p.iter().map(|&pi| pi * (n * (-pi).ln_1p()).exp()).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeError {
    /// `None` where the truth row is identically zero.
    pub per_r: Vec<Option<f64>>,
    pub mean: f64,
    /// Multiplicities skipped because their truth row is zero.
    pub skipped: Vec<usize>,
}

/// Per-r `||est - truth||_2 / ||truth||_2` over the t-grid, and the mean
/// over the rows with non-zero truth.
pub fn relative_error(est: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<RelativeError, SimError> {
    let cols = |g: &[Vec<f64>]| g.first().map_or(0, Vec::len);
    if est.len() != truth.len()
        || cols(est) != cols(truth)
        || est.iter().chain(truth).any(|row| row.len() != cols(truth))
    {
        return Err(SimError::ShapeMismatch {
            est_rows: est.len(),
            est_cols: cols(est),
            truth_rows: truth.len(),
            truth_cols: cols(truth),
        });
    }
    let mut per_r = Vec::with_capacity(truth.len());
    let mut skipped = Vec::new();
    for (r, (e, t)) in est.iter().zip(truth).enumerate() {
        let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            per_r.push(None);
            skipped.push(r + 1);
            continue;
        }
        let diff = e
            .iter()
            .zip(t)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        per_r.push(Some(diff / norm));
    }
    let kept: Vec<f64> = per_r.iter().flatten().copied().collect();
    let mean = if kept.is_empty() {
        f64::NAN
    } else {
        kept.iter().sum::<f64>() / kept.len() as f64
    };
    Ok(RelativeError { per_r, mean, skipped })
}

//! Replicated comparison of all methods against exact truth curves.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    cv_empirical, draw_population, expected_coverage, relative_error, sample_poisson, truth_grid,
    ModelName, RateVector, SimError,
};
use crate::counts::{FrequencyHistogram, RandomSource};
use crate::estimator::DEFAULT_M_MAX;
use crate::methods::{FittedCurve, Method};
use crate::uncertainty::estimate_cv;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub population_size: usize,
    pub replicates: usize,
    pub seed: u64,
    pub r_max: usize,
    /// The time grid is `1, 2, ..., t_max`.
    pub t_max: usize,
    pub models: Vec<ModelName>,
    pub methods: Vec<Method>,
    pub m_max: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            population_size: 100_000,
            replicates: 50,
            seed: 1,
            r_max: 100,
            t_max: 100,
            models: ModelName::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            m_max: DEFAULT_M_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodScore {
    pub method: Method,
    /// Mean over successful replicates of the mean relative error.
    pub mean: f64,
    pub sd: f64,
    pub ok: usize,
    /// Replicates where the method could not be fitted or evaluated.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelResult {
    pub model: String,
    pub cv: f64,
    pub coverage: f64,
    pub scores: Vec<MethodScore>,
}

impl ModelResult {
    pub fn score(&self, method: Method) -> Option<&MethodScore> {
        self.scores.iter().find(|s| s.method == method)
    }

    /// Method with the lowest mean error among those that succeeded at least once.
    pub fn best(&self) -> Option<Method> {
        self.scores
            .iter()
            .filter(|s| s.ok > 0)
            .min_by(|a, b| a.mean.total_cmp(&b.mean))
            .map(|s| s.method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub results: Vec<ModelResult>,
}

impl ExperimentReport {
    pub fn model(&self, name: ModelName) -> Option<&ModelResult> {
        self.results.iter().find(|r| r.model == name.label())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("model\tcv\tcoverage\tmethod\tmean_error\tsd_error\tok\tfailed\n");
        for res in &self.results {
            for s in &res.scores {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    res.model, res.cv, res.coverage, s.method, s.mean, s.sd, s.ok, s.failed
                )
                .expect("writing to a String");
            }
        }
        out
    }
}

fn model_index(name: ModelName) -> u64 {
    ModelName::ALL.iter().position(|&m| m == name).expect("listed model") as u64
}

/// Substream holding the population draw of a model.
pub(crate) fn population_stream(name: ModelName) -> u64 {
    (model_index(name) << 32) | 0xFFFF_FFFF
}

/// Substream of replicate `rep` of a model.
pub(crate) fn replicate_stream(name: ModelName, rep: usize) -> u64 {
    (model_index(name) << 32) | rep as u64
}

pub(crate) fn population_for(name: ModelName, l: usize, source: &RandomSource) -> Result<RateVector, SimError> {
    let mut src = source.substream(population_stream(name));
    draw_population(name.model(), l, src.rng())
}

/// The population [`run_experiment`] and [`classify_cv`] draw for `name`
/// under `seed`.
pub fn model_population(name: ModelName, l: usize, seed: u64) -> Result<RateVector, SimError> {
    population_for(name, l, &RandomSource::new(seed))
}

/// The sample replicate `rep` sees, given the population from
/// [`model_population`] with the same `seed`.
pub fn replicate_sample(name: ModelName, rates: &RateVector, seed: u64, rep: usize) -> FrequencyHistogram {
    let mut src = RandomSource::new(seed).substream(replicate_stream(name, rep));
    sample_poisson(rates, 1.0, src.rng())
}

fn coverage_of(rates: &RateVector) -> Result<f64, SimError> {
    let total: f64 = rates.rates().iter().sum();
    let p: Vec<f64> = rates.rates().iter().map(|v| v / total).collect();
    let n = total.round() as u64;
    expected_coverage(&p, n)
}

/// Draws one population per model, samples it at `t = 1` once per replicate
/// and scores every method against the exact curves on the `r x t` grid.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, SimError> {
    let source = RandomSource::new(config.seed);
    let ts: Vec<f64> = (1..=config.t_max).map(|t| t as f64).collect();
    let mut results = Vec::with_capacity(config.models.len());
    for &name in &config.models {
        let rates = population_for(name, config.population_size, &source)?;
        let truth = truth_grid(&rates, config.r_max, &ts);
        let per_rep: Vec<Vec<Option<f64>>> = (0..config.replicates)
            .into_par_iter()
            .map(|rep| {
                let mut src = source.substream(replicate_stream(name, rep));
                let hist = sample_poisson(&rates, 1.0, src.rng());
                config
                    .methods
                    .iter()
                    .map(|&method| {
                        let grid = FittedCurve::fit(method, &hist, config.m_max)
                            .ok()?
                            .grid(config.r_max, &ts)
                            .ok()?;
                        let err = relative_error(&grid, &truth).ok()?.mean;
                        err.is_finite().then_some(err)
                    })
                    .collect()
            })
            .collect();
        let scores = config
            .methods
            .iter()
            .enumerate()
            .map(|(k, &method)| {
                let errs: Vec<f64> = per_rep.iter().filter_map(|row| row[k]).collect();
                let ok = errs.len();
                let mean = errs.iter().sum::<f64>() / ok as f64;
                let sd = if ok > 1 {
                    (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (ok - 1) as f64).sqrt()
                } else {
                    0.0
                };
                MethodScore {
                    method,
                    mean,
                    sd,
                    ok,
                    failed: config.replicates - ok,
                }
            })
            .collect();
        results.push(ModelResult {
            model: name.label().to_string(),
            cv: cv_empirical(rates.rates()),
            coverage: coverage_of(&rates)?,
            scores,
        });
    }
    Ok(ExperimentReport { results })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CvClassification {
    pub heterogeneous: usize,
    pub homogeneous: usize,
    /// Samples whose ZTNB fit failed.
    pub failed: usize,
}

/// Classifies `samples` Poisson samples of a model by the fitted CV.
pub fn classify_cv(
    name: ModelName,
    population_size: usize,
    samples: usize,
    seed: u64,
) -> Result<CvClassification, SimError> {
    let source = RandomSource::new(seed);
    let rates = population_for(name, population_size, &source)?;
    let fitted: Vec<Option<f64>> = (0..samples)
        .into_par_iter()
        .map(|rep| {
            let mut src = source.substream(replicate_stream(name, rep));
            let hist = sample_poisson(&rates, 1.0, src.rng());
            estimate_cv(&hist).ok().map(|c| c.cv)
        })
        .collect();
    let mut out = CvClassification {
        heterogeneous: 0,
        homogeneous: 0,
        failed: 0,
    };
    for cv in fitted {
        match cv {
            Some(cv) if cv > 1.0 => out.heterogeneous += 1,
            Some(_) => out.homogeneous += 1,
            None => out.failed += 1,
        }
    }
    Ok(out)
}

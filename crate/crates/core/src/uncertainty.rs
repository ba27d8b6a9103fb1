//! Bootstrap variance, lognormal confidence intervals and the CV-based
//! method switch.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::baselines::{fit_ztnb, BaselineError, ZtnbFit};
use crate::counts::{bootstrap_resample, FrequencyHistogram, RandomSource};
use crate::estimator::{construct, ConstructionReport, EstimatorError, RsacEstimator};
use crate::methods::{FittedCurve, Method};

/// Replicates used when the caller does not choose.
pub const DEFAULT_REPLICATES: usize = 100;
pub const DEFAULT_LEVEL: f64 = 0.95;
/// Construction attempts allowed per replicate before giving up.
pub const ATTEMPTS_PER_REPLICATE: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UncertaintyError {
    #[error("need at least 2 bootstrap replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("bootstrap replicate {replicate} failed {attempts} constructions in a row")]
    TooManyFailures { replicate: usize, attempts: usize },
    #[error("lognormal interval needs a positive point estimate, got {0}")]
    NonPositivePoint(f64),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub point: f64,
    pub mean: f64,
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicates: usize,
    pub level: f64,
}

impl BootstrapSummary {
    pub fn se(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// `z` with `P(|Z| <= z) = level`.
pub fn normal_quantile(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// Multiplicative lognormal interval `[mu / C, mu C]` with
/// `C = exp(z sqrt(ln(1 + var / mu^2)))`.
pub fn lognormal_ci(point: f64, variance: f64, level: f64) -> Result<(f64, f64), UncertaintyError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(UncertaintyError::InvalidLevel(level));
    }
    if !(point > 0.0) {
        return Err(UncertaintyError::NonPositivePoint(point));
    }
    let c = (normal_quantile(level) * (variance / (point * point)).ln_1p().sqrt()).exp();
    Ok((point / c, point * c))
}

/// Sample mean and variance (denominator `n - 1`).
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

pub fn summarize(point: f64, values: &[f64], level: f64) -> Result<BootstrapSummary, UncertaintyError> {
    if values.len() < 2 {
        return Err(UncertaintyError::TooFewReplicates(values.len()));
    }
    let (mean, variance) = mean_variance(values);
    let (ci_low, ci_high) = lognormal_ci(point, variance, level)?;
    Ok(BootstrapSummary {
        point,
        mean,
        variance,
        ci_low,
        ci_high,
        replicates: values.len(),
        level,
    })
}

/// The estimator on the original histogram and on `B` resampled histograms.
#[derive(Debug, Clone)]
pub struct BootstrapEnsemble {
    pub estimator: RsacEstimator,
    pub report: ConstructionReport,
    pub replicates: Vec<RsacEstimator>,
    /// Resamples whose construction failed and were redrawn.
    pub redrawn: usize,
}

impl BootstrapEnsemble {
    /// Point estimate, bootstrap moments and lognormal interval at `(r, t)`.
    pub fn summary(&self, r: u32, t: f64, level: f64) -> Result<BootstrapSummary, UncertaintyError> {
        let point = self.estimator.try_evaluate(r, t)?;
        let values = self
            .replicates
            .iter()
            .map(|e| e.try_evaluate(r, t))
            .collect::<Result<Vec<_>, _>>()?;
        summarize(point, &values, level)
    }
}

/// Builds `replicates` bootstrap estimators. Replicate `i` draws from
/// `source.substream(i)`, so the result does not depend on scheduling.
/// Each resample is built with `m_max` set to the original convergent order;
/// failed constructions are redrawn up to
/// [`ATTEMPTS_PER_REPLICATE`] times per replicate.
pub fn bootstrap_ensemble(
    hist: &FrequencyHistogram,
    m_max: usize,
    replicates: usize,
    source: &RandomSource,
) -> Result<BootstrapEnsemble, UncertaintyError> {
    if replicates < 2 {
        return Err(UncertaintyError::TooFewReplicates(replicates));
    }
    let (estimator, report) = construct(hist, m_max)?;
    let hint = report.nominal_m.max(1);
    let results: Vec<Result<(RsacEstimator, usize), UncertaintyError>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut sub = source.substream(i as u64);
            for attempt in 0..ATTEMPTS_PER_REPLICATE {
                let Ok(resample) = bootstrap_resample(hist, &mut sub) else {
                    continue;
                };
                if let Ok((est, _)) = construct(&resample, hint) {
                    return Ok((est, attempt));
                }
            }
            Err(UncertaintyError::TooManyFailures {
                replicate: i,
                attempts: ATTEMPTS_PER_REPLICATE,
            })
        })
        .collect();
    let mut out = Vec::with_capacity(replicates);
    let mut redrawn = 0;
    for r in results {
        let (est, failures) = r?;
        redrawn += failures;
        out.push(est);
    }
    Ok(BootstrapEnsemble {
        estimator,
        report,
        replicates: out,
        redrawn,
    })
}

/// Refits `method` on `replicates` resampled histograms with the same
/// substream and redraw policy as [`bootstrap_ensemble`].
pub fn bootstrap_curves(
    method: Method,
    hist: &FrequencyHistogram,
    m_max: usize,
    replicates: usize,
    source: &RandomSource,
) -> Result<Vec<FittedCurve>, UncertaintyError> {
    if replicates < 2 {
        return Err(UncertaintyError::TooFewReplicates(replicates));
    }
    (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut sub = source.substream(i as u64);
            for _ in 0..ATTEMPTS_PER_REPLICATE {
                let Ok(resample) = bootstrap_resample(hist, &mut sub) else {
                    continue;
                };
                if let Ok(curve) = FittedCurve::fit(method, &resample, m_max) {
                    return Ok(curve);
                }
            }
            Err(UncertaintyError::TooManyFailures {
                replicate: i,
                attempts: ATTEMPTS_PER_REPLICATE,
            })
        })
        .collect()
}

/// One-shot bootstrap summary at `(r, t)` with the default order cap.
pub fn bootstrap_summary(
    hist: &FrequencyHistogram,
    r: u32,
    t: f64,
    replicates: usize,
    level: f64,
    source: &RandomSource,
) -> Result<BootstrapSummary, UncertaintyError> {
    let ensemble = bootstrap_ensemble(hist, crate::estimator::DEFAULT_M_MAX, replicates, source)?;
    ensemble.summary(r, t, level)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvEstimate {
    pub cv: f64,
    /// Fitted negative binomial shape.
    pub k: f64,
}

/// `1 / sqrt(k)` from a zero-truncated negative binomial fit.
pub fn estimate_cv(hist: &FrequencyHistogram) -> Result<CvEstimate, UncertaintyError> {
    let fit = fit_ztnb(hist)?;
    Ok(cv_from_fit(&fit))
}

pub fn cv_from_fit(fit: &ZtnbFit) -> CvEstimate {
    CvEstimate {
        cv: fit.cv(),
        k: fit.alpha,
    }
}

/// The estimator when the fitted CV exceeds 1, the ZTNB curve otherwise.
pub fn choose_method(cv: f64) -> Method {
    if cv > 1.0 {
        Method::Rfa
    } else {
        Method::Ztnb
    }
}

#[derive(Debug, Clone)]
pub struct BestPractice {
    pub method: Method,
    /// Absent when the ZTNB fit itself failed.
    pub cv: Option<CvEstimate>,
    pub curve: FittedCurve,
}

/// Picks by the fitted CV and falls back to the other method when the chosen
/// one cannot be built. Fails only if neither can.
pub fn best_practice(hist: &FrequencyHistogram, m_max: usize) -> Result<BestPractice, UncertaintyError> {
    let fit = fit_ztnb(hist);
    let cv = fit.as_ref().ok().map(cv_from_fit);
    let rfa = || construct(hist, m_max).map(|(e, _)| FittedCurve::Rfa(e));
    let (method, curve) = match (&fit, cv.as_ref().map(|c| choose_method(c.cv))) {
        (Ok(f), Some(Method::Ztnb)) => (Method::Ztnb, FittedCurve::Ztnb(f.clone())),
        (Ok(f), _) => match rfa() {
            Ok(c) => (Method::Rfa, c),
            Err(_) => (Method::Ztnb, FittedCurve::Ztnb(f.clone())),
        },
        (Err(_), _) => (Method::Rfa, rfa()?),
    };
    Ok(BestPractice { method, cv, curve })
}

//! The r-SAC estimator `Psi_{r,m}(t) = sum_i c_i (t / (t - x_i))^r`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counts::{tail_sums, FrequencyHistogram, TailSums};
use crate::pade::{
    convergent, partial_fractions, phi_coefficients, qd_continued_fraction, remove_defects,
    Defect, PadeError, DEFECT_THRESHOLD,
};

/// Largest order tried when the caller has no preference.
pub const DEFAULT_M_MAX: usize = 10;

/// Relative size of an imaginary residue that still counts as rounding noise.
pub const IMAG_TOLERANCE: f64 = 1e-9;

/// Grid for the monotonicity check of `Psi_1`: `t = 1 + 0.05 k`, `k = 0..=1980`.
pub const MONOTONE_GRID_STEP: f64 = 0.05;
pub const MONOTONE_GRID_POINTS: usize = 1981;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("histogram has no species")]
    EmptyHistogram,
    #[error("construction needs N1 > 0 and N2 > 0 (N1 = {n1}, N2 = {n2})")]
    InsufficientData { n1: f64, n2: f64 },
    #[error("m_max must be at least 1")]
    InvalidOrder,
    #[error("sampling effort must be a finite non-negative number, got {0}")]
    InvalidTime(f64),
    #[error("r must be at least 1")]
    InvalidMultiplicity,
    #[error("imaginary residue {imag:e} exceeds tolerance for value {value:e}")]
    InconsistentConjugates { imag: f64, value: f64 },
    #[error("terms are not closed under conjugation")]
    NotConjugateClosed,
    #[error("estimator has no terms")]
    NoTerms,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub c: Complex64,
    /// Pole in the `t` domain.
    pub x: Complex64,
}

/// Why a particular order was not accepted.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    /// The continued fraction stopped before reaching this order.
    QdTruncated,
    /// A pole has non-negative real part.
    UnstablePole(Complex64),
    /// `Psi_1` decreases somewhere on the grid; holds the first offending `t`.
    NotIncreasing(f64),
    DefectDegenerate,
    Numeric(PadeError),
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rejection::QdTruncated => write!(f, "continued fraction truncated"),
            Rejection::UnstablePole(x) => write!(f, "pole {x} has non-negative real part"),
            Rejection::NotIncreasing(t) => write!(f, "Psi_1 decreases at t = {t}"),
            Rejection::DefectDegenerate => write!(f, "defect removal left no poles"),
            Rejection::Numeric(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstructionReport {
    /// Number of terms in the accepted estimator.
    pub accepted_m: usize,
    /// Convergent order `m` before defect cancellation.
    pub nominal_m: usize,
    /// Upper bound actually searched, `min(m_max, floor(j_max / 2))`.
    pub m_cap: usize,
    pub rejections: Vec<(usize, Rejection)>,
    pub defects: Vec<Defect>,
    pub m1_fallback: bool,
    pub saturated: bool,
}

/// An accepted `Psi_{r,m}`. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EstimatorRecord", into = "EstimatorRecord")]
pub struct RsacEstimator {
    terms: Vec<Term>,
    nominal_m: usize,
    tail: Vec<f64>,
    saturated: bool,
}

#[derive(Serialize, Deserialize)]
struct TermRecord {
    c: [f64; 2],
    x: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct EstimatorRecord {
    m: usize,
    #[serde(default)]
    nominal_m: Option<usize>,
    #[serde(default)]
    saturated: bool,
    #[serde(default)]
    tail_sums: Vec<f64>,
    terms: Vec<TermRecord>,
}

impl From<RsacEstimator> for EstimatorRecord {
    fn from(est: RsacEstimator) -> Self {
        EstimatorRecord {
            m: est.m(),
            nominal_m: Some(est.nominal_m),
            saturated: est.saturated,
            tail_sums: est.tail,
            terms: est
                .terms
                .iter()
                .map(|t| TermRecord {
                    c: [t.c.re, t.c.im],
                    x: [t.x.re, t.x.im],
                })
                .collect(),
        }
    }
}

impl TryFrom<EstimatorRecord> for RsacEstimator {
    type Error = EstimatorError;

    fn try_from(rec: EstimatorRecord) -> Result<Self, Self::Error> {
        let terms: Vec<Term> = rec
            .terms
            .iter()
            .map(|t| Term {
                c: Complex64::new(t.c[0], t.c[1]),
                x: Complex64::new(t.x[0], t.x[1]),
            })
            .collect();
        if terms.len() != rec.m {
            return Err(EstimatorError::NoTerms);
        }
        let mut est = RsacEstimator::from_terms(terms)?;
        est.nominal_m = rec.nominal_m.unwrap_or(rec.m);
        est.saturated = rec.saturated;
        est.tail = rec.tail_sums;
        Ok(est)
    }
}

fn is_conjugate_closed(terms: &[Term]) -> bool {
    terms.iter().all(|t| {
        if t.x.im == 0.0 {
            return t.c.im.abs() <= IMAG_TOLERANCE * t.c.norm();
        }
        terms.iter().any(|u| {
            (u.x - t.x.conj()).norm() <= IMAG_TOLERANCE * t.x.norm()
                && (u.c - t.c.conj()).norm() <= IMAG_TOLERANCE * t.c.norm().max(f64::MIN_POSITIVE)
        })
    })
}

impl RsacEstimator {
    /// Wraps arbitrary terms. Only conjugate closure is checked; the
    /// stability and monotonicity gates are not applied.
    pub fn from_terms(terms: Vec<Term>) -> Result<Self, EstimatorError> {
        if terms.is_empty() {
            return Err(EstimatorError::NoTerms);
        }
        if !is_conjugate_closed(&terms) {
            return Err(EstimatorError::NotConjugateClosed);
        }
        let nominal_m = terms.len();
        Ok(Self {
            terms,
            nominal_m,
            tail: Vec::new(),
            saturated: false,
        })
    }

    /// `Psi == level` for every `r` and `t > 0`.
    pub fn constant(level: f64) -> Self {
        Self {
            terms: vec![Term {
                c: Complex64::new(level, 0.0),
                x: Complex64::new(0.0, 0.0),
            }],
            nominal_m: 1,
            tail: Vec::new(),
            saturated: true,
        }
    }

    /// First-order estimator `S1^2/S2 * (t / (t + (S1 - S2)/S2))^r`.
    pub fn first_order(s1: f64, s2: f64) -> Self {
        Self {
            terms: vec![Term {
                c: Complex64::new(s1 * s1 / s2, 0.0),
                x: Complex64::new(-(s1 - s2) / s2, 0.0),
            }],
            nominal_m: 1,
            tail: Vec::new(),
            saturated: false,
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Number of terms.
    pub fn m(&self) -> usize {
        self.terms.len()
    }

    pub fn nominal_m(&self) -> usize {
        self.nominal_m
    }

    /// Tail sums the estimator was built from.
    pub fn tail_sums(&self) -> &[f64] {
        &self.tail
    }

    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    /// `Psi_{r,m}(t)`. `Psi(0) = 0` for every `r >= 1`.
    pub fn try_evaluate(&self, r: u32, t: f64) -> Result<f64, EstimatorError> {
        if r == 0 {
            return Err(EstimatorError::InvalidMultiplicity);
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(EstimatorError::InvalidTime(t));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let mut sum = Complex64::new(0.0, 0.0);
        let mut scale = 0.0;
        for term in &self.terms {
            let w = (Complex64::new(t, 0.0) / (t - term.x)).powi(r as i32);
            let v = term.c * w;
            scale += v.norm();
            sum += v;
        }
        if sum.im.abs() > IMAG_TOLERANCE * scale {
            return Err(EstimatorError::InconsistentConjugates {
                imag: sum.im,
                value: sum.re,
            });
        }
        Ok(sum.re)
    }

    /// Like [`try_evaluate`](Self::try_evaluate) for an estimator known to be
    /// well formed.
    ///
    /// # Panics
    /// On `r = 0`, negative `t`, or broken conjugate structure.
    pub fn evaluate(&self, r: u32, t: f64) -> f64 {
        match self.try_evaluate(r, t) {
            Ok(v) => v,
            Err(e) => panic!("evaluate(r = {r}, t = {t}): {e}"),
        }
    }

    /// `lim_{t -> inf} Psi = sum c_i`.
    pub fn asymptote(&self) -> f64 {
        self.terms.iter().map(|t| t.c.re).sum()
    }

    /// `sum |c_i|`, the bound on `|Psi|` for stable estimators.
    pub fn abs_coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.c.norm()).sum()
    }

    /// `d Psi_1 / dt = -sum c_i x_i / (t - x_i)^2`.
    pub fn derivative_psi1(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| -term.c * term.x / (t - term.x).powi(2))
            .sum::<Complex64>()
            .re
    }

    /// First grid point where `Psi_1` decreases.
    pub fn first_decrease(&self) -> Option<f64> {
        (0..MONOTONE_GRID_POINTS)
            .map(|k| 1.0 + MONOTONE_GRID_STEP * k as f64)
            .find(|&t| !(self.derivative_psi1(t) >= 0.0))
    }

    /// Whether `Psi_1` is non-decreasing on `t = 1, 1.05, ..., 100`.
    pub fn is_increasing(&self) -> bool {
        self.first_decrease().is_none()
    }

    /// Whether every pole lies strictly in the left half plane.
    pub fn stability_gate(&self) -> bool {
        self.terms.iter().all(|t| t.x.re < 0.0)
    }
}

/// Runs the construction on the histogram's tail sums.
pub fn construct(
    hist: &FrequencyHistogram,
    m_max: usize,
) -> Result<(RsacEstimator, ConstructionReport), EstimatorError> {
    if hist.is_empty() || hist.species() == 0 {
        return Err(EstimatorError::EmptyHistogram);
    }
    if m_max == 0 {
        return Err(EstimatorError::InvalidOrder);
    }
    let len = (hist.max_multiplicity() as usize).min(2 * m_max).max(2);
    construct_from_tail_sums(&tail_sums(hist, len), m_max)
}

/// Tail sums that are all equal (every species seen equally often) give the
/// constant estimator directly.
///
/// Otherwise searches `m = m_cap, m_cap - 1, ..., 1` for the first estimator whose
/// poles all have negative real part and whose `Psi_1` is increasing, with
/// `m_cap = min(m_max, floor(j_max / 2))` where `j_max` is the last positive
/// tail sum. The first-order closed form ends the search.
pub fn construct_from_tail_sums(
    tail: &TailSums,
    m_max: usize,
) -> Result<(RsacEstimator, ConstructionReport), EstimatorError> {
    if m_max == 0 {
        return Err(EstimatorError::InvalidOrder);
    }
    let j_max = tail.last_positive();
    if j_max == 0 {
        return Err(EstimatorError::EmptyHistogram);
    }
    let m_cap = m_max.min(j_max / 2);
    let mut report = ConstructionReport {
        m_cap,
        ..Default::default()
    };
    let s1 = tail.get(1);

    if j_max >= 2 && tail.get(j_max) == s1 {
        let mut est = RsacEstimator::constant(s1);
        est.tail = tail.values()[..j_max].to_vec();
        report.saturated = true;
        report.accepted_m = 1;
        report.nominal_m = 1;
        return Ok((est, report));
    }

    let (n1, n2) = (s1 - tail.get(2), tail.get(2) - tail.get(3));
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(EstimatorError::InsufficientData { n1, n2 });
    }
    let used = tail.values()[..2 * m_cap].to_vec();

    if m_cap >= 2 {
        if let Some((terms, nominal, defects)) = search_orders(tail, m_cap, &mut report) {
            report.accepted_m = terms.len();
            report.nominal_m = nominal;
            report.defects = defects;
            let est = RsacEstimator {
                terms,
                nominal_m: nominal,
                tail: used,
                saturated: false,
            };
            return Ok((est, report));
        }
    }

    let mut est = RsacEstimator::first_order(s1, tail.get(2));
    est.tail = used;
    report.accepted_m = 1;
    report.nominal_m = 1;
    report.m1_fallback = true;
    Ok((est, report))
}

fn search_orders(
    tail: &TailSums,
    m_cap: usize,
    report: &mut ConstructionReport,
) -> Option<(Vec<Term>, usize, Vec<Defect>)> {
    let cf = match phi_coefficients(tail, 2 * m_cap).and_then(|ps| qd_continued_fraction(&ps)) {
        Ok(cf) => cf,
        Err(e) => {
            for m in (2..=m_cap).rev() {
                report.rejections.push((m, Rejection::Numeric(e.clone())));
            }
            return None;
        }
    };
    let reachable = cf.max_order().min(m_cap);
    for m in (reachable + 1..=m_cap).rev() {
        report.rejections.push((m, Rejection::QdTruncated));
    }
    for m in (2..=reachable).rev() {
        match try_order(&cf, m) {
            Ok((terms, defects)) => return Some((terms, m, defects)),
            Err(reason) => report.rejections.push((m, reason)),
        }
    }
    None
}

fn try_order(
    cf: &crate::pade::ContinuedFraction,
    m: usize,
) -> Result<(Vec<Term>, Vec<Defect>), Rejection> {
    let rf = convergent(cf, 2 * m).map_err(Rejection::Numeric)?;
    let (reduced, defects) = remove_defects(&rf, DEFECT_THRESHOLD).map_err(|e| match e {
        PadeError::DefectDegenerate => Rejection::DefectDegenerate,
        other => Rejection::Numeric(other),
    })?;
    let terms: Vec<Term> = partial_fractions(&reduced)
        .map_err(Rejection::Numeric)?
        .into_iter()
        .map(|(c, x)| Term { c, x })
        .collect();
    if let Some(bad) = terms.iter().find(|t| !(t.x.re < 0.0)) {
        return Err(Rejection::UnstablePole(bad.x));
    }
    let candidate = RsacEstimator {
        terms,
        nominal_m: m,
        tail: Vec::new(),
        saturated: false,
    };
    if let Some(t) = candidate.first_decrease() {
        return Err(Rejection::NotIncreasing(t));
    }
    Ok((candidate.terms, defects))
}

/// Truncated power series
/// `Phi_r(t) = t^r sum_i (-1)^i (t - 1)^i C(r - 1 + i, r - 1) S_{r+i}`,
/// summed over every available tail sum. Diverges for `t > 2`.
pub fn phi_r_power_series(tail: &TailSums, r: usize, t: f64) -> f64 {
    if r == 0 || r > tail.len() {
        return 0.0;
    }
    let u = t - 1.0;
    let mut binom = 1.0;
    let mut power = 1.0;
    let mut sum = 0.0;
    for i in 0..=(tail.len() - r) {
        if i > 0 {
            binom *= (r - 1 + i) as f64 / i as f64;
            power *= -u;
        }
        sum += power * binom * tail.get(r + i);
    }
    t.powi(r as i32) * sum
}

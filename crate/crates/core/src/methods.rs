//! A common interface over the estimator and the five baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    bbc_u, chao1_unseen, fit_logseries, fit_ztnb, fit_ztp, logseries_tail, BaselineError,
    LogseriesFit, ZtnbFit, ZtpFit,
};
use crate::counts::FrequencyHistogram;
use crate::estimator::{construct, EstimatorError, RsacEstimator};
use crate::numeric::{nb_survival_all, poisson_survival};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rfa,
    Ztp,
    Ztnb,
    Ls,
    Bbc,
    Cs,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Rfa,
        Method::Ztp,
        Method::Ztnb,
        Method::Ls,
        Method::Bbc,
        Method::Cs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rfa => "rfa",
            Method::Ztp => "ztp",
            Method::Ztnb => "ztnb",
            Method::Ls => "ls",
            Method::Bbc => "bbc",
            Method::Cs => "cs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MethodError {
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

#[derive(Debug, Clone)]
pub struct BbcCurve {
    classes: Vec<(f64, f64)>,
    n1: f64,
    s1: f64,
    u: f64,
}

#[derive(Debug, Clone)]
pub struct CsCurve {
    n1: f64,
    s1: f64,
    n0: f64,
}

/// A fitted r-SAC from any method.
#[derive(Debug, Clone)]
pub enum FittedCurve {
    Rfa(RsacEstimator),
    Ztp(ZtpFit),
    Ztnb(ZtnbFit),
    Ls(LogseriesFit),
    Bbc(BbcCurve),
    Cs(CsCurve),
}

impl FittedCurve {
    pub fn fit(method: Method, hist: &FrequencyHistogram, m_max: usize) -> Result<Self, MethodError> {
        Ok(match method {
            Method::Rfa => FittedCurve::Rfa(construct(hist, m_max)?.0),
            Method::Ztp => FittedCurve::Ztp(fit_ztp(hist)?),
            Method::Ztnb => FittedCurve::Ztnb(fit_ztnb(hist)?),
            Method::Ls => FittedCurve::Ls(fit_logseries(hist)?),
            Method::Bbc => FittedCurve::Bbc(BbcCurve {
                u: bbc_u(hist)?,
                classes: hist.iter().map(|(j, n)| (j as f64, n as f64)).collect(),
                n1: hist.count(1) as f64,
                s1: hist.species() as f64,
            }),
            Method::Cs => FittedCurve::Cs(CsCurve {
                n0: chao1_unseen(hist)?,
                n1: hist.count(1) as f64,
                s1: hist.species() as f64,
            }),
        })
    }

    pub fn method(&self) -> Method {
        match self {
            FittedCurve::Rfa(_) => Method::Rfa,
            FittedCurve::Ztp(_) => Method::Ztp,
            FittedCurve::Ztnb(_) => Method::Ztnb,
            FittedCurve::Ls(_) => Method::Ls,
            FittedCurve::Bbc(_) => Method::Bbc,
            FittedCurve::Cs(_) => Method::Cs,
        }
    }

    /// Values for `r = 1..=r_max` at a single `t`.
    pub fn curve_at(&self, r_max: usize, t: f64) -> Result<Vec<f64>, MethodError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(EstimatorError::InvalidTime(t).into());
        }
        if matches!(self, FittedCurve::Bbc(_) | FittedCurve::Cs(_)) && t < 1.0 {
            return Err(BaselineError::InvalidTime(t).into());
        }
        let mut out = Vec::with_capacity(r_max);
        match self {
            FittedCurve::Rfa(est) => {
                for r in 1..=r_max {
                    out.push(est.try_evaluate(r as u32, t)?);
                }
            }
            FittedCurve::Ztp(fit) => {
                poisson_survival(fit.lambda * t, r_max, &mut out);
                let scale = fit.s1 / -(-fit.lambda).exp_m1();
                out.iter_mut().for_each(|v| *v *= scale);
            }
            FittedCurve::Ztnb(fit) => {
                nb_survival_all(fit.alpha, fit.beta * t, r_max, &mut out);
                let scale = fit.s1 / (1.0 - fit.p0());
                out.iter_mut().for_each(|v| *v *= scale);
            }
            FittedCurve::Ls(fit) => {
                let nt = fit.n * t;
                let x = nt / (fit.alpha + nt);
                out.extend((1..=r_max).map(|r| logseries_tail(fit.alpha, x, r)));
            }
            FittedCurve::Bbc(c) => {
                out.resize(r_max, c.s1);
                let mut sf = Vec::with_capacity(r_max);
                for &(j, n) in &c.classes {
                    poisson_survival(j * t, r_max, &mut sf);
                    let base = (-j).exp_m1();
                    for (o, s) in out.iter_mut().zip(&sf) {
                        *o += n * (s + base);
                    }
                }
                poisson_survival(c.n1 * t / c.u, r_max, &mut sf);
                let base = (-c.n1 / c.u).exp_m1();
                for (o, s) in out.iter_mut().zip(&sf) {
                    *o += c.u * (s + base);
                }
            }
            FittedCurve::Cs(c) => {
                let ln_mu = (c.n1 * t / c.n0).ln();
                let shift = -c.n1 * (t - 1.0) / c.n0;
                let mut ln_term = shift;
                let mut head = 0.0;
                for i in 0..r_max {
                    if i > 0 {
                        ln_term += ln_mu - (i as f64).ln();
                    }
                    head += ln_term.exp();
                    out.push(c.s1 + c.n0 * (1.0 - head));
                }
            }
        }
        Ok(out)
    }

    /// Single value `E[S_r(t)]`.
    pub fn value(&self, r: usize, t: f64) -> Result<f64, MethodError> {
        if let FittedCurve::Rfa(est) = self {
            return Ok(est.try_evaluate(r as u32, t)?);
        }
        Ok(self.curve_at(r, t)?[r - 1])
    }

    /// `grid[r - 1][k]` holds the estimate at `r` and `ts[k]`.
    pub fn grid(&self, r_max: usize, ts: &[f64]) -> Result<Vec<Vec<f64>>, MethodError> {
        let mut grid = vec![Vec::with_capacity(ts.len()); r_max];
        for &t in ts {
            for (row, v) in grid.iter_mut().zip(self.curve_at(r_max, t)?) {
                row.push(v);
            }
        }
        Ok(grid)
    }
}

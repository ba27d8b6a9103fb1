//! Parametric and semi-parametric comparison estimators, each extended to
//! the number of species seen at least `r` times, plus closed-form truths.

mod ztnb;

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::counts::FrequencyHistogram;
use crate::numeric::{brent, grow_bracket, nb_survival, poisson_sf, poisson_survival};

pub use ztnb::{fit_ztnb, rsac_ztnb, ZtnbFit, ZTNB_MAX_ITERATIONS, ZTNB_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("histogram has no species")]
    Empty,
    #[error("mean count per species is {mean}, the zero-truncated Poisson fit needs more than 1")]
    MeanTooSmall { mean: f64 },
    #[error("all species share one multiplicity, the negative binomial is not identifiable")]
    SingleMultiplicity,
    #[error("logseries needs S1 < N (S1 = {s1}, N = {n})")]
    LogseriesUndefined { s1: f64, n: f64 },
    #[error("BBC needs N1 > sum N_i e^-i (N1 = {n1}, sum = {weighted})")]
    BbcUndefined { n1: f64, weighted: f64 },
    #[error("no doubletons, N0 cannot be estimated")]
    NoDoubletons,
    #[error("no singletons")]
    NoSingletons,
    #[error("extrapolation needs t >= 1, got {0}")]
    InvalidTime(f64),
    #[error("{0} root solver failed to converge")]
    NoConvergence(&'static str),
}

/// Relative tolerance for the scalar root solves.
const ROOT_TOL: f64 = 1e-14;

fn require_extrapolation(t: f64) -> Result<(), BaselineError> {
    if t >= 1.0 && t.is_finite() {
        Ok(())
    } else {
        Err(BaselineError::InvalidTime(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZtpFit {
    /// Poisson rate per unit of sampling effort.
    pub lambda: f64,
    pub s1: f64,
}

/// Solves `lambda / (1 - e^-lambda) = N / S1`.
pub fn fit_ztp(hist: &FrequencyHistogram) -> Result<ZtpFit, BaselineError> {
    let s1 = hist.species() as f64;
    if s1 == 0.0 {
        return Err(BaselineError::Empty);
    }
    let mean = hist.individuals() as f64 / s1;
    if !(mean > 1.0) {
        return Err(BaselineError::MeanTooSmall { mean });
    }
    let lambda = ztp_rate(mean).ok_or(BaselineError::NoConvergence("ZTP"))?;
    Ok(ZtpFit { lambda, s1 })
}

/// Root of `lambda / (1 - e^-lambda) = mean` for `mean > 1`.
pub fn ztp_rate(mean: f64) -> Option<f64> {
    let f = |l: f64| {
        if l == 0.0 {
            1.0 - mean
        } else {
            l / -(-l).exp_m1() - mean
        }
    };
    brent(f, 0.0, mean, ROOT_TOL)
}

/// `S1 / (1 - e^-lambda) * P(Pois(lambda t) >= r)`
pub fn rsac_ztp(fit: &ZtpFit, r: usize, t: f64) -> f64 {
    fit.s1 / -(-fit.lambda).exp_m1() * poisson_sf(r, fit.lambda * t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogseriesFit {
    pub alpha: f64,
    /// Number of individuals in the initial sample.
    pub n: f64,
}

/// Solves `S1 = alpha ln(1 + N / alpha)`.
pub fn fit_logseries(hist: &FrequencyHistogram) -> Result<LogseriesFit, BaselineError> {
    let s1 = hist.species() as f64;
    let n = hist.individuals() as f64;
    if s1 == 0.0 {
        return Err(BaselineError::Empty);
    }
    if !(s1 < n) {
        return Err(BaselineError::LogseriesUndefined { s1, n });
    }
    let f = |a: f64| a * (n / a).ln_1p() - s1;
    let (lo, hi) =
        grow_bracket(&f, 1e-6 * s1, 1e6 * s1, 30).ok_or(BaselineError::NoConvergence("logseries"))?;
    let alpha = brent(f, lo, hi, ROOT_TOL).ok_or(BaselineError::NoConvergence("logseries"))?;
    Ok(LogseriesFit { alpha, n })
}

/// `alpha * sum_{i >= r} x^i / i`.
///
/// Uses `-ln(1 - x) - sum_{i < r} x^i / i` when the subtraction keeps at
/// least three significant digits, and sums the series directly otherwise
/// (until a term drops below `1e-12` of the running total).
pub fn logseries_tail(alpha: f64, x: f64, r: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let r = r.max(1);
    let full = -(-x).ln_1p();
    let mut head = 0.0;
    let mut p = 1.0;
    for i in 1..r {
        p *= x;
        head += p / i as f64;
    }
    let closed = full - head;
    if closed > 1e-3 * full {
        return alpha * closed;
    }
    let mut sum = 0.0;
    let mut p = x.powi(r as i32);
    let mut i = r;
    loop {
        let term = p / i as f64;
        sum += term;
        if term < 1e-12 * sum || term == 0.0 {
            break;
        }
        p *= x;
        i += 1;
    }
    alpha * sum
}

/// `alpha * sum_{i >= r} x_t^i / i` with `x_t = N t / (alpha + N t)`.
pub fn rsac_ls(fit: &LogseriesFit, r: usize, t: f64) -> f64 {
    let nt = fit.n * t;
    logseries_tail(fit.alpha, nt / (fit.alpha + nt), r)
}

fn weighted_exp_sum(hist: &FrequencyHistogram) -> f64 {
    hist.iter()
        .map(|(j, n)| n as f64 * (-(j as f64)).exp())
        .sum()
}

/// Solves `U (1 - e^{-N1/U}) = sum_i N_i e^-i`.
pub fn bbc_u(hist: &FrequencyHistogram) -> Result<f64, BaselineError> {
    let n1 = hist.count(1) as f64;
    let weighted = weighted_exp_sum(hist);
    if !(n1 > weighted) {
        return Err(BaselineError::BbcUndefined { n1, weighted });
    }
    let f = |u: f64| -u * (-n1 / u).exp_m1() - weighted;
    let s1 = hist.species() as f64;
    let (lo, hi) =
        grow_bracket(&f, 1e-6 * s1, 1e6 * s1, 30).ok_or(BaselineError::NoConvergence("BBC"))?;
    brent(f, lo, hi, ROOT_TOL).ok_or(BaselineError::NoConvergence("BBC"))
}

/// Generalised BBC estimator
///
/// `S1 + sum_i N_i (e^-i - P(Pois(i t) < r)) + U (e^{-N1/U} - P(Pois(N1 t / U) < r))`.
pub fn rsac_bbc(hist: &FrequencyHistogram, r: usize, t: f64) -> Result<f64, BaselineError> {
    require_extrapolation(t)?;
    let u = bbc_u(hist)?;
    Ok(bbc_with_u(hist, u, r, t))
}

/// [`rsac_bbc`] with `U` already solved.
pub fn bbc_with_u(hist: &FrequencyHistogram, u: f64, r: usize, t: f64) -> f64 {
    let n1 = hist.count(1) as f64;
    let mut total = hist.species() as f64;
    for (j, n) in hist.iter() {
        let j = j as f64;
        // e^-i - (1 - sf) = sf - (1 - e^-i)
        total += n as f64 * (poisson_sf(r, j * t) + (-j).exp_m1());
    }
    let mu = n1 * t / u;
    total + u * (poisson_sf(r, mu) + (-n1 / u).exp_m1())
}

/// Chao1 lower bound `N1^2 / (2 N2)` on the number of unseen species.
pub fn chao1_unseen(hist: &FrequencyHistogram) -> Result<f64, BaselineError> {
    let n1 = hist.count(1) as f64;
    let n2 = hist.count(2) as f64;
    if n2 == 0.0 {
        return Err(BaselineError::NoDoubletons);
    }
    if n1 == 0.0 {
        return Err(BaselineError::NoSingletons);
    }
    Ok(n1 * n1 / (2.0 * n2))
}

/// `S1 + N0 (1 - sum_{i<r} (N1 t / N0)^i / i! e^{-N1 (t - 1) / N0})`
pub fn rsac_cs(hist: &FrequencyHistogram, r: usize, t: f64) -> Result<f64, BaselineError> {
    require_extrapolation(t)?;
    let n0 = chao1_unseen(hist)?;
    Ok(cs_with_n0(hist, n0, r, t))
}

/// [`rsac_cs`] with an explicit `N0`.
pub fn cs_with_n0(hist: &FrequencyHistogram, n0: f64, r: usize, t: f64) -> f64 {
    let n1 = hist.count(1) as f64;
    let s1 = hist.species() as f64;
    let ln_mu = (n1 * t / n0).ln();
    let shift = -n1 * (t - 1.0) / n0;
    let head: f64 = (0..r)
        .map(|i| (i as f64 * ln_mu - ln_gamma(i as f64 + 1.0) + shift).exp())
        .sum();
    s1 + n0 * (1.0 - head)
}

/// `L * P(Pois(lambda t) >= r)`
pub fn true_rsac_homogeneous(l: f64, lambda: f64, r: usize, t: f64) -> f64 {
    l * poisson_sf(r, lambda * t)
}

/// Expected r-SAC of `L` homogeneous species over `r = 1..=r_max`.
pub fn true_rsac_homogeneous_all(l: f64, lambda: f64, r_max: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::new();
    poisson_survival(lambda * t, r_max, &mut out);
    out.iter_mut().for_each(|v| *v *= l);
    out
}

/// `L * P(NB(alpha, beta t) >= r)`
pub fn true_rsac_nb(l: f64, alpha: f64, beta: f64, r: usize, t: f64) -> f64 {
    l * nb_survival(r, alpha, beta * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    fn sample_hist() -> FrequencyHistogram {
        FrequencyHistogram::from_pairs([(1, 120), (2, 45), (3, 20), (4, 9), (6, 5), (11, 2), (30, 1)])
    }

    #[test]
    fn ztp_unit_rate() {
        let lambda = ztp_rate(1.0 / (1.0 - (-1.0f64).exp())).unwrap();
        assert!((lambda - 1.0).abs() < 1e-12);
        let fit = ZtpFit { lambda: 1.0, s1: 632.0 };
        let want = 632.0 / (1.0 - (-1.0f64).exp()) * (1.0 - 3.0 * (-2.0f64).exp());
        assert!(close(rsac_ztp(&fit, 2, 2.0), want, 1e-12));
    }

    #[test]
    fn ztp_fit_on_histogram() {
        let hist = sample_hist();
        let fit = fit_ztp(&hist).unwrap();
        let mean = hist.individuals() as f64 / hist.species() as f64;
        assert!(close(fit.lambda / -(-fit.lambda).exp_m1(), mean, 1e-12));
        assert!(close(rsac_ztp(&fit, 1, 1.0), hist.species() as f64, 1e-12));
        let flat = FrequencyHistogram::from_pairs([(1, 10)]);
        assert!(matches!(fit_ztp(&flat), Err(BaselineError::MeanTooSmall { .. })));
    }

    #[test]
    fn logseries_examples() {
        let want = 100.0 * (std::f64::consts::LN_2 - 0.5 - 0.125);
        assert!(close(logseries_tail(100.0, 0.5, 3), want, 1e-12));
        assert!((logseries_tail(100.0, 0.5, 3) - 6.8147).abs() < 1e-4);
        let hist = sample_hist();
        let fit = fit_logseries(&hist).unwrap();
        let s1 = hist.species() as f64;
        assert!(close(rsac_ls(&fit, 1, 1.0), s1, 1e-10));
        for &t in &[1.0, 3.0, 50.0] {
            let x = fit.n * t / (fit.alpha + fit.n * t);
            let want = fit.alpha * (1.0 + fit.n * t / fit.alpha).ln();
            assert!(close(rsac_ls(&fit, 1, t), want, 1e-12));
            assert!(close(logseries_tail(fit.alpha, x, 1), want, 1e-12));
        }
        let bad = FrequencyHistogram::from_pairs([(1, 10)]);
        assert!(matches!(
            fit_logseries(&bad),
            Err(BaselineError::LogseriesUndefined { .. })
        ));
    }

    #[test]
    fn logseries_tail_paths_agree() {
        for &x in &[0.1f64, 0.5, 0.9, 0.999] {
            for r in [1usize, 2, 5, 20, 60] {
                let mut direct = 0.0f64;
                let mut p = x.powi(r as i32);
                let mut i = r;
                while p / i as f64 > 1e-18 * direct.max(1e-300) && i < 200_000 {
                    direct += p / i as f64;
                    p *= x;
                    i += 1;
                }
                assert!(close(logseries_tail(1.0, x, r), direct, 1e-8), "x={x} r={r}");
            }
        }
    }

    #[test]
    fn bbc_examples() {
        let single = FrequencyHistogram::from_pairs([(1, 100)]);
        let u = bbc_u(&single).unwrap();
        let residual = u * (1.0 - (-100.0 / u).exp()) - 100.0 * (-1.0f64).exp();
        assert!(residual.abs() < 1e-10 * 100.0);
        assert!(bbc_u(&FrequencyHistogram::from_pairs([(1, 1)])).is_ok());
        let hist = sample_hist();
        assert!(close(rsac_bbc(&hist, 1, 1.0).unwrap(), hist.species() as f64, 1e-12));
        assert!(matches!(rsac_bbc(&hist, 1, 0.5), Err(BaselineError::InvalidTime(_))));
        let doubles = FrequencyHistogram::from_pairs([(2, 10)]);
        assert!(matches!(bbc_u(&doubles), Err(BaselineError::BbcUndefined { .. })));
    }

    #[test]
    fn cs_examples() {
        let hist = FrequencyHistogram::from_pairs([(1, 8), (2, 4)]);
        assert_eq!(chao1_unseen(&hist).unwrap(), 8.0);
        let h10 = FrequencyHistogram::from_pairs([(1, 10), (2, 1), (5, 3)]);
        let s1 = h10.species() as f64;
        let got = cs_with_n0(&h10, 50.0, 1, 3.0);
        assert!(close(got, s1 + 50.0 * (1.0 - (-20.0f64 / 50.0).exp()), 1e-12));
        let hist = sample_hist();
        assert!(close(rsac_cs(&hist, 1, 1.0).unwrap(), hist.species() as f64, 1e-12));
        // interpolates S2 at t = 1
        let s2 = (hist.species() - hist.count(1)) as f64;
        assert!(close(rsac_cs(&hist, 2, 1.0).unwrap(), s2, 1e-12));
        assert_eq!(
            rsac_cs(&FrequencyHistogram::from_pairs([(1, 3), (3, 1)]), 1, 2.0),
            Err(BaselineError::NoDoubletons)
        );
    }

    #[test]
    fn truth_closed_forms() {
        for &t in &[0.5, 1.0, 7.0] {
            assert!(close(
                true_rsac_homogeneous(100.0, 0.3, 1, t),
                100.0 * -(-0.3 * t).exp_m1(),
                1e-12
            ));
            assert!(close(
                true_rsac_nb(100.0, 0.7, 2.0, 1, t),
                100.0 * (1.0 - (1.0 + 2.0 * t).powf(-0.7)),
                1e-12
            ));
        }
        let flat16 = true_rsac_homogeneous(100.0, 0.5, 16, 10.0);
        // 100 P(Pois(5) >= 16): well under one species
        assert!((flat16 - 0.0069).abs() < 0.0001, "{flat16}");
        let all = true_rsac_homogeneous_all(100.0, 0.5, 16, 10.0);
        assert!(close(all[15], flat16, 1e-12));
    }

    #[test]
    fn baselines_are_monotone_on_grids() {
        let hist = sample_hist();
        let ztp = fit_ztp(&hist).unwrap();
        let ls = fit_logseries(&hist).unwrap();
        let nb = fit_ztnb(&hist).unwrap();
        let u = bbc_u(&hist).unwrap();
        let n0 = chao1_unseen(&hist).unwrap();
        let methods: Vec<Box<dyn Fn(usize, f64) -> f64>> = vec![
            Box::new(|r, t| rsac_ztp(&ztp, r, t)),
            Box::new(|r, t| rsac_ls(&ls, r, t)),
            Box::new(|r, t| rsac_ztnb(&nb, r, t)),
            Box::new(|r, t| bbc_with_u(&hist, u, r, t)),
            Box::new(|r, t| cs_with_n0(&hist, n0, r, t)),
        ];
        for (k, f) in methods.iter().enumerate() {
            let s1 = hist.species() as f64;
            assert!(close(f(1, 1.0), s1, 1e-9), "method {k}");
            for r in [1usize, 2, 5] {
                let mut prev = f64::NEG_INFINITY;
                for i in 0..=99 {
                    let v = f(r, 1.0 + i as f64);
                    assert!(v >= prev - 1e-9 * v.abs(), "method {k} r={r} t={}", 1 + i);
                    prev = v;
                }
            }
            for &t in &[1.0, 10.0, 100.0] {
                for r in 1..20 {
                    assert!(f(r + 1, t) <= f(r, t) + 1e-9 * f(r, t).abs(), "method {k} r={r} t={t}");
                }
            }
        }
    }
}

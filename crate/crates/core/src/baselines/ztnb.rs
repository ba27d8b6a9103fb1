//! Zero-truncated negative binomial fitted by EM over the unobserved zero class.

use statrs::function::gamma::{digamma, ln_gamma};

use super::BaselineError;
use crate::counts::FrequencyHistogram;
use crate::numeric::{nb_survival, trigamma};

pub const ZTNB_MAX_ITERATIONS: usize = 10_000;
/// EM stops once the log-likelihood improves by less than this.
pub const ZTNB_TOLERANCE: f64 = 1e-10;

const ALPHA_MIN: f64 = 1e-8;
const ALPHA_MAX: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct ZtnbFit {
    /// Shape (size) `alpha`.
    pub alpha: f64,
    /// Scale `beta`; the untruncated mean is `alpha * beta`.
    pub beta: f64,
    pub s1: f64,
    /// Zero-truncated log-likelihood after each EM iteration, starting with
    /// the initial parameters.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

impl ZtnbFit {
    /// Probability of a zero count, `(1 + beta)^-alpha`.
    pub fn p0(&self) -> f64 {
        (-self.alpha * self.beta.ln_1p()).exp()
    }

    /// Coefficient of variation of the latent gamma rates, `1 / sqrt(alpha)`.
    pub fn cv(&self) -> f64 {
        1.0 / self.alpha.sqrt()
    }
}

struct Data {
    pairs: Vec<(f64, f64)>,
    s1: f64,
    total: f64,
}

fn zt_loglik(d: &Data, alpha: f64, beta: f64) -> f64 {
    let ln_odds = (beta / (1.0 + beta)).ln();
    let ln_p0 = -alpha * beta.ln_1p();
    let body: f64 = d
        .pairs
        .iter()
        .map(|&(j, n)| n * (ln_gamma(j + alpha) - ln_gamma(alpha) - ln_gamma(j + 1.0) + j * ln_odds))
        .sum();
    body + d.s1 * ln_p0 - d.s1 * (-ln_p0.exp_m1()).ln()
}

/// `psi(j + a) - psi(a)` and `psi'(j + a) - psi'(a)` for integer `j >= 1`.
fn psi_diffs(j: f64, a: f64) -> (f64, f64) {
    if j <= 64.0 {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        let mut k = 0.0;
        while k < j {
            let v = 1.0 / (a + k);
            d1 += v;
            d2 -= v * v;
            k += 1.0;
        }
        (d1, d2)
    } else {
        let inv = 1.0 / a;
        (
            inv + digamma(j + a) - digamma(1.0 + a),
            trigamma(j + a) - inv * inv - trigamma(1.0 + a),
        )
    }
}

/// Score of the complete-data likelihood in `alpha` with `beta` profiled out,
/// and its derivative.
fn score(d: &Data, n: f64, mu: f64, alpha: f64) -> (f64, f64) {
    let mut g = -n * (mu / alpha).ln_1p();
    let mut dg = n * mu / (alpha * (alpha + mu));
    for &(j, cnt) in &d.pairs {
        let (d1, d2) = psi_diffs(j, alpha);
        g += cnt * d1;
        dg += cnt * d2;
    }
    (g, dg)
}

/// Complete-data maximum likelihood for `alpha`: Newton steps safeguarded by
/// bisection in `ln alpha`.
fn m_step_alpha(d: &Data, n: f64, mu: f64, start: f64) -> f64 {
    let (g_hi, _) = score(d, n, mu, ALPHA_MAX);
    if g_hi >= 0.0 {
        return ALPHA_MAX;
    }
    let (g_lo, _) = score(d, n, mu, ALPHA_MIN);
    if g_lo <= 0.0 {
        return ALPHA_MIN;
    }
    let (mut lo, mut hi) = (ALPHA_MIN, ALPHA_MAX);
    let mut a = start.clamp(ALPHA_MIN, ALPHA_MAX);
    for _ in 0..200 {
        let (g, dg) = score(d, n, mu, a);
        if g == 0.0 {
            return a;
        }
        if g > 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let newton = a - g / dg;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            (lo * hi).sqrt()
        };
        if (next - a).abs() <= 1e-13 * a || hi / lo - 1.0 < 1e-13 {
            return next;
        }
        a = next;
    }
    a
}

/// EM starting from `alpha = 1`, `beta = max(mean - 1, 0.1)`.
///
/// The E-step imputes `N0 = S1 p0 / (1 - p0)` unseen species; the M-step
/// maximises the complete negative binomial likelihood with `beta = mu / alpha`.
pub fn fit_ztnb(hist: &FrequencyHistogram) -> Result<ZtnbFit, BaselineError> {
    if hist.species() == 0 {
        return Err(BaselineError::Empty);
    }
    if hist.len() < 2 {
        return Err(BaselineError::SingleMultiplicity);
    }
    let pairs: Vec<(f64, f64)> = hist.iter().map(|(j, n)| (j as f64, n as f64)).collect();
    let d = Data {
        s1: hist.species() as f64,
        total: hist.individuals() as f64,
        pairs,
    };
    let mean = d.total / d.s1;
    let mut alpha = 1.0;
    let mut beta = (mean - 1.0).max(0.1);
    let mut ll = zt_loglik(&d, alpha, beta);
    let mut trace = vec![ll];
    let mut converged = false;
    for _ in 0..ZTNB_MAX_ITERATIONS {
        let ln_p0 = -alpha * beta.ln_1p();
        let odds0 = ln_p0.exp() / -ln_p0.exp_m1();
        let n = d.s1 * (1.0 + odds0);
        let mu = d.total / n;
        let next_alpha = m_step_alpha(&d, n, mu, alpha);
        let next_beta = mu / next_alpha;
        let next_ll = zt_loglik(&d, next_alpha, next_beta);
        if !next_ll.is_finite() {
            break;
        }
        alpha = next_alpha;
        beta = next_beta;
        trace.push(next_ll);
        let gain = next_ll - ll;
        ll = next_ll;
        if gain < ZTNB_TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(ZtnbFit {
        alpha,
        beta,
        s1: d.s1,
        log_likelihood: trace,
        converged,
    })
}

/// `S1 / (1 - p0) * P(NB(alpha, beta t) >= r)`
pub fn rsac_ztnb(fit: &ZtnbFit, r: usize, t: f64) -> f64 {
    fit.s1 / (1.0 - fit.p0()) * nb_survival(r, fit.alpha, fit.beta * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::RandomSource;
    use rand_distr::{Distribution, Gamma, Poisson};

    fn nb_sample(l: usize, alpha: f64, beta: f64, seed: u64) -> FrequencyHistogram {
        let mut src = RandomSource::new(seed);
        let gamma = Gamma::new(alpha, beta).unwrap();
        let mut hist = FrequencyHistogram::new();
        for _ in 0..l {
            let lambda: f64 = gamma.sample(src.rng());
            if lambda <= 0.0 {
                continue;
            }
            let k = Poisson::new(lambda).unwrap().sample(src.rng()) as u64;
            if k > 0 {
                hist.add(k, 1);
            }
        }
        hist
    }

    #[test]
    fn recovers_geometric_shape() {
        let hist = nb_sample(100_000, 1.0, 1.0, 11);
        let fit = fit_ztnb(&hist).unwrap();
        assert!(fit.converged);
        assert!((0.9..=1.1).contains(&fit.alpha), "alpha {}", fit.alpha);
        assert!((fit.alpha * fit.beta - 1.0).abs() < 0.1);
    }

    #[test]
    fn log_likelihood_never_decreases() {
        for (seed, (a, b)) in [(1u64, (0.01, 1.0)), (2, (1.0, 1.0)), (3, (5.0, 0.3))] {
            let hist = nb_sample(20_000, a, b, seed);
            let fit = fit_ztnb(&hist).unwrap();
            for w in fit.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn self_consistent_at_unit_effort() {
        let hist = nb_sample(5_000, 0.5, 2.0, 5);
        let fit = fit_ztnb(&hist).unwrap();
        let s1 = hist.species() as f64;
        assert!((rsac_ztnb(&fit, 1, 1.0) - s1).abs() < 1e-9 * s1);
    }

    #[test]
    fn geometric_closed_form_cross_check() {
        // alpha = 1: P(X >= r) = (bt / (1 + bt))^r
        let fit = ZtnbFit {
            alpha: 1.0,
            beta: 0.8,
            s1: 400.0,
            log_likelihood: vec![],
            converged: true,
        };
        let scale = 400.0 / (1.0 - 1.0 / 1.8);
        for r in 1..8 {
            for &t in &[1.0, 2.5, 30.0] {
                let q: f64 = 0.8 * t / (1.0 + 0.8 * t);
                let want = scale * q.powi(r as i32);
                assert!((rsac_ztnb(&fit, r, t) - want).abs() < 1e-10 * want);
            }
        }
    }

    #[test]
    fn degenerate_input_is_rejected() {
        let hist = FrequencyHistogram::from_pairs([(3, 10)]);
        assert_eq!(fit_ztnb(&hist), Err(BaselineError::SingleMultiplicity));
    }

    #[test]
    fn psi_diff_branches_agree() {
        for &a in &[1e-6, 0.3, 2.0, 500.0] {
            let (d1, d2) = psi_diffs(64.0, a);
            let want1 = digamma(64.0 + a) - digamma(a);
            let want2 = trigamma(64.0 + a) - trigamma(a);
            assert!((d1 - want1).abs() < 1e-8 * want1.abs());
            assert!((d2 - want2).abs() < 1e-8 * want2.abs());
            let (e1, e2) = psi_diffs(65.0, a);
            assert!((e1 - d1 - 1.0 / (64.0 + a)).abs() < 1e-9 * e1.abs());
            assert!((e2 - d2 + 1.0 / (64.0 + a).powi(2)).abs() < 1e-9 * e2.abs());
        }
    }
}

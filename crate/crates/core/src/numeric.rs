//! Small numerical helpers shared by the baselines and the simulation lab.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

/// Bracketed scalar root finding (Brent's method).
///
/// `f(lo)` and `f(hi)` must have opposite signs. Stops when the bracket is
/// narrower than `x_tol * |x|` or `f` vanishes exactly.
pub fn brent<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> Option<f64> {
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo * f_hi > 0.0 {
        return None;
    }
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.abs() < f_hi.abs() {
        std::mem::swap(&mut lo, &mut hi);
        std::mem::swap(&mut f_lo, &mut f_hi);
    }
    let (mut c, mut f_c) = (lo, f_lo);
    let mut bisected = true;
    let mut d = 0.0;
    for _ in 0..500 {
        let mut s = if f_lo != f_c && f_hi != f_c {
            lo * f_hi * f_c / ((f_lo - f_hi) * (f_lo - f_c))
                + hi * f_lo * f_c / ((f_hi - f_lo) * (f_hi - f_c))
                + c * f_lo * f_hi / ((f_c - f_lo) * (f_c - f_hi))
        } else {
            hi - f_hi * (hi - lo) / (f_hi - f_lo)
        };
        let tol = x_tol * hi.abs().max(f64::MIN_POSITIVE);
        let between = {
            let a = (3.0 * lo + hi) / 4.0;
            (s > a.min(hi)) && (s < a.max(hi))
        };
        if !between
            || (bisected && (s - hi).abs() >= (hi - c).abs() / 2.0)
            || (!bisected && (s - hi).abs() >= (c - d).abs() / 2.0)
            || (bisected && (hi - c).abs() < tol)
            || (!bisected && (c - d).abs() < tol)
        {
            s = (lo + hi) / 2.0;
            bisected = true;
        } else {
            bisected = false;
        }
        let f_s = f(s);
        d = c;
        c = hi;
        f_c = f_hi;
        if f_lo * f_s < 0.0 {
            hi = s;
            f_hi = f_s;
        } else {
            lo = s;
            f_lo = f_s;
        }
        if f_lo.abs() < f_hi.abs() {
            std::mem::swap(&mut lo, &mut hi);
            std::mem::swap(&mut f_lo, &mut f_hi);
        }
        if f_hi == 0.0 || (hi - lo).abs() <= tol {
            return Some(hi);
        }
    }
    Some(hi)
}

/// Widens `[lo, hi]` geometrically until `f` changes sign, giving up after
/// `steps` expansions on each side.
pub fn grow_bracket<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, steps: usize) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..=steps {
        let (a, b) = (f(lo), f(hi));
        if a.is_finite() && b.is_finite() && a * b <= 0.0 {
            return Some((lo, hi));
        }
        lo /= 10.0;
        hi *= 10.0;
    }
    None
}

/// Trigamma function, psi'(x) for x > 0.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    // Asymptotic expansion 1/x + 1/(2x^2) + sum B_2k / x^(2k+1)
    acc + 1.0 / x
        + x2 / 2.0
        + (1.0 / x)
            * x2
            * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 * (1.0 / 30.0 - x2 * 5.0 / 66.0))))
}

/// Poisson survival values `P(X >= r)` for `r = 1..=r_max`, `X ~ Poisson(mu)`.
///
/// The pmf is built by upward recurrence from `e^-mu`; above `mu = 700`,
/// where that start underflows, it is built in log space. When `mu` is below
/// `r_max` the upper tail is summed directly so small survival values keep
/// full relative precision.
pub fn poisson_survival(mu: f64, r_max: usize, out: &mut Vec<f64>) {
    out.clear();
    if r_max == 0 {
        return;
    }
    if mu <= 0.0 {
        out.resize(r_max, 0.0);
        return;
    }
    if mu > 700.0 {
        // log pmf, lower tail only; the cdf below r_max is tiny so 1 - cdf is exact enough.
        let ln_mu = mu.ln();
        let mut lp = -mu;
        let mut cdf = 0.0f64;
        for k in 0..r_max {
            cdf += lp.exp();
            lp += ln_mu - ((k + 1) as f64).ln();
            out.push((1.0 - cdf).max(0.0));
        }
        return;
    }
    if mu >= r_max as f64 {
        let mut p = (-mu).exp();
        let mut cdf = 0.0f64;
        for k in 0..r_max {
            cdf += p;
            p *= mu / (k + 1) as f64;
            out.push((1.0 - cdf).max(0.0));
        }
        return;
    }
    // Upper-tail summation over the pmf, built in place in `out`:
    // out[i] holds P(X = i + 1), then P(X >= i + 1) after the reverse sweep.
    // Past r_max the pmf is decreasing, so terms below 1e-17 P(X = r_max)
    // cannot change any returned value.
    let inv = reciprocals();
    let cutoff = (r_max as f64).max(mu + 40.0 * mu.sqrt() + 40.0) as usize;
    let p0 = (-mu).exp();
    let mut p = p0;
    let mut floor = 0.0;
    for k in 1..=cutoff {
        p *= mu * inv.get(k).copied().unwrap_or_else(|| 1.0 / k as f64);
        if k > r_max && p < floor {
            break;
        }
        if k == r_max {
            floor = 1e-17 * p;
        }
        if p == 0.0 && k as f64 > mu {
            break;
        }
        out.push(p);
    }
    let mut tail = 0.0;
    for v in out.iter_mut().rev() {
        tail += *v;
        *v = tail;
    }
    // normalise by the total mass to absorb truncation
    let norm = out.first().copied().unwrap_or(0.0) + p0;
    out.resize(r_max.max(out.len()), 0.0);
    out.truncate(r_max);
    out.iter_mut().for_each(|v| *v = (*v / norm).min(1.0));
}

fn reciprocals() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| (0..4096).map(|k| if k == 0 { 0.0 } else { 1.0 / k as f64 }).collect())
}

/// `P(X >= r)` for a single `r`.
pub fn poisson_sf(r: usize, mu: f64) -> f64 {
    if r == 0 {
        return 1.0;
    }
    let mut buf = Vec::new();
    poisson_survival(mu, r, &mut buf);
    buf[r - 1]
}

/// Negative binomial survival `P(X >= r)` for gamma-mixed Poisson counts
/// with shape `alpha` and scale `scale_t` (the scale already multiplied by
/// `t`), so the mean is `alpha * scale_t`.
///
/// Below the mean the lower cdf is subtracted from one; above it the upper
/// tail is summed term by term so tiny survival values keep their precision.
pub fn nb_survival(r: usize, alpha: f64, scale_t: f64) -> f64 {
    if r == 0 {
        return 1.0;
    }
    if scale_t <= 0.0 {
        return 0.0;
    }
    let ln_odds = (scale_t / (1.0 + scale_t)).ln();
    let ln_p0 = -alpha * scale_t.ln_1p();
    if (r as f64) <= alpha * scale_t {
        let mut lp = ln_p0;
        let mut cdf = 0.0f64;
        for i in 0..r {
            cdf += lp.exp();
            lp += ((i as f64 + alpha) / (i as f64 + 1.0)).ln() + ln_odds;
        }
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let rf = r as f64;
    let mut lp = ln_p0 + ln_nb_coef(rf, alpha) + rf * ln_odds;
    let mut tail = 0.0f64;
    for i in r..r + 10_000_000 {
        let term = lp.exp();
        tail += term;
        if term <= 1e-17 * tail || term == 0.0 && i > r + 1000 {
            break;
        }
        lp += ((i as f64 + alpha) / (i as f64 + 1.0)).ln() + ln_odds;
    }
    tail.min(1.0)
}

/// [`nb_survival`] for every `r = 1..=r_max` at once.
pub fn nb_survival_all(alpha: f64, scale_t: f64, r_max: usize, out: &mut Vec<f64>) {
    out.clear();
    if r_max == 0 {
        return;
    }
    if scale_t <= 0.0 {
        out.resize(r_max, 0.0);
        return;
    }
    let ln_odds = (scale_t / (1.0 + scale_t)).ln();
    let mut lp = -alpha * scale_t.ln_1p();
    let mut pmf = Vec::with_capacity(r_max);
    for i in 0..r_max {
        pmf.push(lp.exp());
        lp += ((i as f64 + alpha) / (i as f64 + 1.0)).ln() + ln_odds;
    }
    // P(X >= r) = P(X >= r_max) + sum_{k = r}^{r_max - 1} p_k
    out.resize(r_max, 0.0);
    let mut tail = nb_survival(r_max, alpha, scale_t);
    out[r_max - 1] = tail;
    for r in (1..r_max).rev() {
        tail += pmf[r];
        out[r - 1] = tail.min(1.0);
    }
}

/// `ln C(n + k, k)` style helper: `ln Gamma(i + a) - ln Gamma(a) - ln Gamma(i + 1)`.
pub fn ln_nb_coef(i: f64, a: f64) -> f64 {
    ln_gamma(i + a) - ln_gamma(a) - ln_gamma(i + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_sqrt2() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(brent(|x| x * x + 1.0, 0.0, 2.0, 1e-12).is_none());
    }

    #[test]
    fn trigamma_known_values() {
        // psi'(1) = pi^2/6, psi'(1/2) = pi^2/2
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((trigamma(1.0) - pi2 / 6.0).abs() < 1e-12);
        assert!((trigamma(0.5) - pi2 / 2.0).abs() < 1e-12);
        assert!((trigamma(30.0) - (trigamma(31.0) + 1.0 / 900.0)).abs() < 1e-14);
    }

    #[test]
    fn survival_matches_direct_sum() {
        for &mu in &[0.01, 0.5, 5.0, 37.0, 150.0, 650.0] {
            let mut out = Vec::new();
            poisson_survival(mu, 60, &mut out);
            for r in 1..=60usize {
                // direct lower sum in log space
                let cdf: f64 = (0..r)
                    .map(|k| (-mu + k as f64 * f64::ln(mu) - ln_gamma(k as f64 + 1.0)).exp())
                    .sum();
                let want = statrs::function::gamma::gamma_lr(r as f64, mu);
                assert!(
                    (out[r - 1] - want).abs() <= 1e-12 + 1e-9 * want,
                    "mu={mu} r={r} got {} want {want} (1-cdf {})",
                    out[r - 1],
                    1.0 - cdf
                );
            }
        }
    }

    #[test]
    fn survival_first_entry_is_one_minus_exp() {
        for &mu in &[0.01, 0.3, 2.1, 40.0, 699.0, 701.0] {
            let mut out = Vec::new();
            poisson_survival(mu, 1, &mut out);
            assert!((out[0] + (-mu).exp_m1()).abs() <= 1e-15, "mu={mu}");
            poisson_survival(mu, 3, &mut out);
            let want = 1.0 - (-mu).exp() * (1.0 + mu + mu * mu / 2.0);
            assert!((out[2] - want).abs() <= 1e-13, "mu={mu}");
        }
    }

    #[test]
    fn survival_large_mean_is_one() {
        let mut out = Vec::new();
        poisson_survival(5000.0, 100, &mut out);
        assert!(out.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        poisson_survival(0.0, 3, &mut out);
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn flat_sixteen_sac_value() {
        // P(Pois(5) >= 16) by summing the upper tail term by term.
        let mut p = (-5.0f64).exp();
        let mut tail = 0.0;
        for k in 0..200 {
            if k >= 16 {
                tail += p;
            }
            p *= 5.0 / (k + 1) as f64;
        }
        assert!((poisson_sf(16, 5.0) - tail).abs() < 1e-15);
        assert!((100.0 * tail - 0.0069).abs() < 0.0005 * 100.0);
    }

    #[test]
    fn nb_survival_branches_agree() {
        for &(alpha, bt) in &[(0.01, 100.0), (1.0, 3.0), (2.5, 0.4), (40.0, 0.1)] {
            for r in 1..60usize {
                let direct: f64 = {
                    let mut lp = -alpha * f64::ln_1p(bt);
                    let mut cdf = 0.0;
                    for i in 0..r {
                        cdf += lp.exp();
                        lp += ((i as f64 + alpha) / (i as f64 + 1.0)).ln() + (bt / (1.0 + bt)).ln();
                    }
                    1.0 - cdf
                };
                let got = nb_survival(r, alpha, bt);
                assert!((got - direct).abs() < 1e-12, "alpha={alpha} bt={bt} r={r}");
            }
        }
        // deep tail keeps relative precision: alpha = 1 is geometric
        let want = (0.5f64 / 1.5).powi(200);
        assert!((nb_survival(200, 1.0, 0.5) / want - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nb_survival_all_matches_pointwise() {
        let mut out = Vec::new();
        for &(alpha, bt) in &[(0.01, 100.0), (1.0, 3.0), (2.5, 0.4), (40.0, 0.1)] {
            nb_survival_all(alpha, bt, 50, &mut out);
            for r in 1..=50usize {
                let want = nb_survival(r, alpha, bt);
                assert!((out[r - 1] - want).abs() <= 1e-13 + 1e-10 * want, "alpha={alpha} r={r}");
            }
        }
    }

    #[test]
    fn nb_survival_geometric_case() {
        // alpha = 1: P(X >= r) = (bt/(1+bt))^r
        for &bt in &[0.3, 1.0, 7.5] {
            for r in 1..6 {
                let want = (bt / (1.0 + bt) as f64).powi(r as i32);
                assert!((nb_survival(r, 1.0, bt) - want).abs() < 1e-13);
            }
        }
    }
}

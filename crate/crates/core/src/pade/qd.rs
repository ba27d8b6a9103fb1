//! The alternating discovery-rate series and its continued fraction.
//!
//! The continued fraction has the form
//!
//! ```text
//! c0 / (1 + c1 s / (1 + c2 s / (1 + c3 s / ...)))
//! ```
//!
//! in the shifted variable `s = t - 1`. Truncating after `2m` coefficients
//! gives the rational function with numerator degree `m - 1` and
//! denominator degree `m` whose Taylor expansion agrees with the series
//! through `s^(2m-1)`.

use super::{PadeError, RationalApproximant};
use crate::counts::TailSums;

/// Coefficients are `coeffs[i] = (-1)^i S_{i+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    pub coeffs: Vec<f64>,
}

impl PowerSeries {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// First `n` coefficients of the discovery-rate series around `t = 1`.
pub fn phi_coefficients(tail: &TailSums, n: usize) -> Result<PowerSeries, PadeError> {
    if tail.len() < n {
        return Err(PadeError::InsufficientTerms {
            needed: n,
            available: tail.len(),
        });
    }
    let coeffs = tail.values()[..n]
        .iter()
        .enumerate()
        .map(|(i, &s)| if i % 2 == 0 { s } else { -s })
        .collect();
    Ok(PowerSeries { coeffs })
}

/// Relative size below which a continued-fraction coefficient counts as zero.
pub const QD_ZERO_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuedFraction {
    coeffs: Vec<f64>,
    /// Set when a vanishing coefficient cut the fraction short.
    pub truncated_at: Option<usize>,
}

impl ContinuedFraction {
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest `m` whose `2m`-th convergent is available.
    pub fn max_order(&self) -> usize {
        self.coeffs.len() / 2
    }
}

/// Rutishauser's quotient-difference algorithm.
///
/// With `q_1^(k) = f_{k+1} / f_k` and `e_0^(k) = 0`, the rhombus rules
///
/// ```text
/// e_j^(k)     = q_j^(k+1) - q_j^(k) + e_{j-1}^(k+1)
/// q_{j+1}^(k) = q_j^(k+1) e_j^(k+1) / e_j^(k)
/// ```
///
/// give `c_{2j-1} = -q_j^(0)` and `c_{2j} = -e_j^(0)`. The output stops at the
/// first coefficient that is zero (`|c| < 1e-12 |c0|`) or not finite.
pub fn qd_continued_fraction(series: &PowerSeries) -> Result<ContinuedFraction, PadeError> {
    let f = &series.coeffs;
    let Some(&f0) = f.first() else {
        return Err(PadeError::ZeroLeadingTerm);
    };
    if f0 == 0.0 || !f0.is_finite() {
        return Err(PadeError::ZeroLeadingTerm);
    }
    let n = f.len();
    let mut coeffs = Vec::with_capacity(n);
    coeffs.push(f0);

    // Columns indexed by k; each pass of the loop advances j by one.
    let mut q: Vec<f64> = (0..n.saturating_sub(1)).map(|k| f[k + 1] / f[k]).collect();
    let mut e_prev: Vec<f64> = vec![0.0; n];
    let zero = QD_ZERO_TOLERANCE * f0.abs();
    let mut truncated_at = None;

    let accept = |c: f64, coeffs: &mut Vec<f64>| -> bool {
        if !c.is_finite() || c.abs() < zero {
            false
        } else {
            coeffs.push(c);
            true
        }
    };

    'outer: while coeffs.len() < n {
        // odd coefficient from q_j^(0)
        let Some(&q0) = q.first() else { break };
        if !accept(-q0, &mut coeffs) {
            truncated_at = Some(coeffs.len());
            break 'outer;
        }
        if coeffs.len() >= n {
            break;
        }
        // e_j^(k) for k = 0..q.len()-1
        let e: Vec<f64> = (0..q.len().saturating_sub(1))
            .map(|k| q[k + 1] - q[k] + e_prev[k + 1])
            .collect();
        let Some(&e0) = e.first() else { break };
        if !accept(-e0, &mut coeffs) {
            truncated_at = Some(coeffs.len());
            break 'outer;
        }
        // q_{j+1}^(k)
        q = (0..e.len().saturating_sub(1))
            .map(|k| q[k + 1] * e[k + 1] / e[k])
            .collect();
        e_prev = e;
    }

    Ok(ContinuedFraction {
        coeffs,
        truncated_at,
    })
}

/// The `order`-th convergent (`order = 2m`) as a rational function in `s`.
pub fn convergent(cf: &ContinuedFraction, order: usize) -> Result<RationalApproximant, PadeError> {
    if order == 0 || order % 2 == 1 {
        return Err(PadeError::OddOrder(order));
    }
    if order > cf.len() {
        return Err(PadeError::InsufficientTerms {
            needed: order,
            available: cf.len(),
        });
    }
    // A_k = A_{k-1} + c_{k-1} s A_{k-2}, likewise for B, with
    // A_{-1} = 1, A_0 = 0, B_{-1} = 0, B_0 = 1 and a first partial numerator c_0.
    let c = cf.coeffs();
    let mut a_prev2 = vec![1.0];
    let mut a_prev = vec![0.0];
    let mut b_prev2 = vec![0.0];
    let mut b_prev = vec![1.0];
    for (k, &ck) in c.iter().enumerate().take(order) {
        let (a_next, b_next) = if k == 0 {
            (vec![ck], vec![1.0])
        } else {
            (
                shift_add(&a_prev, &a_prev2, ck),
                shift_add(&b_prev, &b_prev2, ck),
            )
        };
        a_prev2 = std::mem::replace(&mut a_prev, a_next);
        b_prev2 = std::mem::replace(&mut b_prev, b_next);
    }
    let m = order / 2;
    a_prev.resize(m, 0.0);
    b_prev.resize(m + 1, 0.0);
    RationalApproximant::new(a_prev, b_prev)
}

/// `p + c * s * q`
fn shift_add(p: &[f64], q: &[f64], c: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len().max(q.len() + 1)];
    for (i, &v) in p.iter().enumerate() {
        out[i] += v;
    }
    for (i, &v) in q.iter().enumerate() {
        out[i + 1] += c * v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pade::pade_linear_solve;

    fn series(v: &[f64]) -> PowerSeries {
        PowerSeries { coeffs: v.to_vec() }
    }

    #[test]
    fn phi_signs() {
        let t = TailSums::new(vec![6.0, 3.0, 1.0]).unwrap();
        assert_eq!(phi_coefficients(&t, 3).unwrap().coeffs, vec![6.0, -3.0, 1.0]);
        let shakespeare = TailSums::new(vec![31534.0, 17158.0, 12815.0, 10523.0]).unwrap();
        assert_eq!(
            phi_coefficients(&shakespeare, 4).unwrap().coeffs,
            vec![31534.0, -17158.0, 12815.0, -10523.0]
        );
        let short = TailSums::new(vec![5.0]).unwrap();
        assert_eq!(
            phi_coefficients(&short, 2),
            Err(PadeError::InsufficientTerms {
                needed: 2,
                available: 1
            })
        );
    }

    #[test]
    fn geometric_series_truncates_to_first_order() {
        let q = 0.7;
        let cf = qd_continued_fraction(&series(&[1.0, -q, q * q, -q * q * q])).unwrap();
        assert_eq!(cf.coeffs(), &[1.0, q]);
        assert_eq!(cf.truncated_at, Some(2));
        let rf = convergent(&cf, 2).unwrap();
        assert_eq!(rf.numer(), &[1.0]);
        assert_eq!(rf.denom(), &[1.0, q]);
    }

    #[test]
    fn zero_second_coefficient_truncates() {
        let cf = qd_continued_fraction(&series(&[2.0, 0.0, 1.0, 3.0])).unwrap();
        assert_eq!(cf.len(), 1);
        assert_eq!(cf.max_order(), 0);
    }

    #[test]
    fn zero_first_coefficient_is_error() {
        assert_eq!(
            qd_continued_fraction(&series(&[0.0, 1.0])),
            Err(PadeError::ZeroLeadingTerm)
        );
    }

    #[test]
    fn first_order_convergent_by_hand() {
        // [0/1]: a0 = S1, b1 = S2/S1.
        let cf = qd_continued_fraction(&series(&[6.0, -3.0, 1.0, -0.2])).unwrap();
        let rf = convergent(&cf, 2).unwrap();
        assert_eq!(rf.numer(), &[6.0]);
        assert_eq!(rf.denom(), &[1.0, 0.5]);
        assert_eq!(convergent(&cf, 3), Err(PadeError::OddOrder(3)));
        assert!(matches!(
            convergent(&cf, 6),
            Err(PadeError::InsufficientTerms { .. })
        ));
    }

    #[test]
    fn second_order_matches_linear_solve() {
        let cf = qd_continued_fraction(&series(&[6.0, -3.0, 1.0, -0.2])).unwrap();
        let qd = convergent(&cf, 4).unwrap();
        let tail = TailSums::new(vec![6.0, 3.0, 1.0, 0.2]).unwrap();
        let lin = pade_linear_solve(&tail, 2).unwrap();
        for (a, b) in qd.numer().iter().zip(lin.numer()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        for (a, b) in qd.denom().iter().zip(lin.denom()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn convergent_matches_taylor_coefficients() {
        let tail = TailSums::new(vec![100.0, 61.0, 45.0, 36.0, 30.0, 25.5, 22.0, 19.0]).unwrap();
        let phi = phi_coefficients(&tail, 8).unwrap();
        let cf = qd_continued_fraction(&phi).unwrap();
        for m in 1..=cf.max_order() {
            let rf = convergent(&cf, 2 * m).unwrap();
            let taylor = rf.taylor(2 * m);
            for (i, (a, b)) in taylor.iter().zip(&phi.coeffs).enumerate() {
                assert!((a - b).abs() <= 1e-9 * b.abs(), "m={m} i={i}: {a} vs {b}");
            }
        }
    }
}

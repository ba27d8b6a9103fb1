//! Real polynomials in ascending coefficient order and their complex roots.

use num_complex::Complex64;

use super::PadeError;

/// Default relative tolerance for snapping nearly-real roots onto the real
/// axis and pairing conjugates.
pub const ROOT_TOLERANCE: f64 = 1e-8;

pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn eval_complex(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// `lead * prod (s - r_i)`, returned as real coefficients. The roots must be
/// closed under conjugation for the result to be real.
pub fn from_roots(lead: f64, roots: &[Complex64]) -> Vec<f64> {
    let mut acc = vec![Complex64::new(lead, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (k, &a) in acc.iter().enumerate() {
            next[k + 1] += a;
            next[k] -= a * r;
        }
        acc = next;
    }
    acc.into_iter().map(|c| c.re).collect()
}

/// Degree after dropping exactly-zero leading coefficients.
pub fn degree(coeffs: &[f64]) -> Option<usize> {
    coeffs.iter().rposition(|&c| c != 0.0)
}

fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All complex roots of a real polynomial (ascending coefficients).
///
/// Aberth–Ehrlich simultaneous iteration followed by a Newton polish on the
/// original coefficients. Roots with `|im| <= tolerance * max(1, |z|)` are
/// made exactly real and the remaining roots are paired into exact
/// conjugates, so the returned multiset is closed under conjugation.
pub fn poly_roots(coeffs: &[f64], tolerance: f64) -> Result<Vec<Complex64>, PadeError> {
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Err(PadeError::ConstantPolynomial);
    }
    let lead = coeffs[n];
    if lead == 0.0 || !lead.is_finite() {
        return Err(PadeError::ZeroLeadingCoefficient);
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(PadeError::NonFinite);
    }

    // Zero roots are exact; factor them out first.
    let zeros = coeffs.iter().take_while(|&&c| c == 0.0).count();
    let reduced: Vec<Complex64> = coeffs[zeros..]
        .iter()
        .map(|&c| Complex64::new(c / lead, 0.0))
        .collect();
    let deg = reduced.len() - 1;
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    if deg > 0 {
        roots.extend(aberth(&reduced));
    }

    let original: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    for r in roots.iter_mut().skip(zeros) {
        for _ in 0..3 {
            let (p, dp) = eval_with_derivative(&original, *r);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            let candidate = *r - step;
            if eval_with_derivative(&original, candidate).0.norm() <= p.norm() {
                *r = candidate;
            } else {
                break;
            }
        }
    }

    Ok(symmetrize(roots, tolerance))
}

fn aberth(monic: &[Complex64]) -> Vec<Complex64> {
    let n = monic.len() - 1;
    // Start on a circle whose radius is the geometric mean of the root moduli.
    let radius = monic[0].norm().powf(1.0 / n as f64).max(1e-3);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect();
    let mut done = vec![false; n];
    for _ in 0..1000 {
        let mut converged = true;
        for k in 0..n {
            if done[k] {
                continue;
            }
            let (p, dp) = eval_with_derivative(monic, z[k]);
            if p.norm() == 0.0 {
                done[k] = true;
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !w.re.is_finite() || !w.im.is_finite() {
                // Perturb off a degenerate point and keep iterating.
                z[k] += Complex64::new(1e-8 * radius, 1e-8 * radius);
                converged = false;
                continue;
            }
            z[k] -= w;
            if w.norm() <= 4.0 * f64::EPSILON * z[k].norm().max(f64::MIN_POSITIVE) {
                done[k] = true;
            } else {
                converged = false;
            }
        }
        if converged {
            break;
        }
    }
    z
}

fn symmetrize(mut roots: Vec<Complex64>, tolerance: f64) -> Vec<Complex64> {
    for r in roots.iter_mut() {
        if r.im.abs() <= tolerance * r.norm().max(1.0) {
            r.im = 0.0;
        }
    }
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] || roots[i].im <= 0.0 {
            continue;
        }
        let target = roots[i].conj();
        let partner = (0..roots.len())
            .filter(|&j| !used[j] && j != i && roots[j].im < 0.0)
            .min_by(|&a, &b| {
                (roots[a] - target)
                    .norm()
                    .total_cmp(&(roots[b] - target).norm())
            });
        if let Some(j) = partner {
            let re = 0.5 * (roots[i].re + roots[j].re);
            let im = 0.5 * (roots[i].im - roots[j].im);
            roots[i] = Complex64::new(re, im);
            roots[j] = Complex64::new(re, -im);
            used[i] = true;
            used[j] = true;
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im)));
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn unit_circle_pair() {
        let roots = poly_roots(&[1.0, 0.0, 1.0], ROOT_TOLERANCE).unwrap();
        assert_eq!(roots.len(), 2);
        assert!(close(roots[0], Complex64::new(0.0, 1.0), 1e-14));
        assert!(close(roots[1], Complex64::new(0.0, -1.0), 1e-14));
    }

    #[test]
    fn linear_denominator_root() {
        // 1 + 0.5 s = 0 at s = -2, i.e. t = -1
        let roots = poly_roots(&[1.0, 0.5], ROOT_TOLERANCE).unwrap();
        assert_eq!(roots, vec![Complex64::new(-2.0, 0.0)]);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert_eq!(
            poly_roots(&[1.0, 2.0, 0.0], ROOT_TOLERANCE),
            Err(PadeError::ZeroLeadingCoefficient)
        );
        assert_eq!(
            poly_roots(&[3.0], ROOT_TOLERANCE),
            Err(PadeError::ConstantPolynomial)
        );
    }

    #[test]
    fn zero_roots_are_exact() {
        let roots = poly_roots(&[0.0, 0.0, -1.0, 1.0], ROOT_TOLERANCE).unwrap();
        assert_eq!(roots.iter().filter(|r| r.norm() == 0.0).count(), 2);
        assert!(roots.iter().any(|r| close(*r, Complex64::new(1.0, 0.0), 1e-14)));
    }

    fn reconstruction_error(coeffs: &[f64], roots: &[Complex64]) -> f64 {
        let lead = *coeffs.last().unwrap();
        let rebuilt = from_roots(lead, roots);
        let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        coeffs
            .iter()
            .zip(&rebuilt)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
            / norm
    }

    #[test]
    fn random_degree_five_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let coeffs: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let roots = poly_roots(&coeffs, ROOT_TOLERANCE).unwrap();
            assert_eq!(roots.len(), 5);
            assert!(reconstruction_error(&coeffs, &roots) < 1e-8);
        }
    }

    #[test]
    fn backward_error_up_to_degree_twenty() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for deg in 1..=20usize {
            for _ in 0..20 {
                let coeffs: Vec<f64> = (0..=deg).map(|_| rng.random_range(-1.0..1.0)).collect();
                let roots = poly_roots(&coeffs, ROOT_TOLERANCE).unwrap();
                let err = reconstruction_error(&coeffs, &roots);
                assert!(err < 1e-10, "deg {deg} err {err:e}");
            }
        }
    }

    #[test]
    fn roots_are_conjugate_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let deg = rng.random_range(1..12);
            let coeffs: Vec<f64> = (0..=deg).map(|_| rng.random_range(-5.0..5.0)).collect();
            let roots = poly_roots(&coeffs, ROOT_TOLERANCE).unwrap();
            for r in &roots {
                assert!(roots.iter().any(|q| *q == r.conj()), "{r} has no conjugate");
            }
        }
    }

    #[test]
    fn from_roots_expands_products() {
        let c = from_roots(2.0, &[Complex64::new(1.0, 0.0), Complex64::new(-3.0, 0.0)]);
        assert_eq!(c, vec![-6.0, 4.0, 2.0]);
        assert_eq!(eval(&c, 1.0), 0.0);
        assert_eq!(derivative(&c), vec![4.0, 4.0]);
    }
}

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::{self, ROOT_TOLERANCE};
use super::PadeError;

/// `P(s) / Q(s)` with `deg P <= m - 1`, `deg Q = m` and `Q(0) = 1`,
/// in the shifted variable `s = t - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalApproximant {
    numer: Vec<f64>,
    denom: Vec<f64>,
}

impl RationalApproximant {
    /// Normalises so that `Q(0) = 1`. The numerator is padded with zeros to
    /// `m` coefficients.
    pub fn new(mut numer: Vec<f64>, mut denom: Vec<f64>) -> Result<Self, PadeError> {
        if denom.len() < 2 {
            return Err(PadeError::ConstantPolynomial);
        }
        let m = denom.len() - 1;
        if numer.len() > m {
            if numer[m..].iter().any(|&c| c != 0.0) {
                return Err(PadeError::DegreeMismatch {
                    numer: numer.len() - 1,
                    denom: m,
                });
            }
            numer.truncate(m);
        }
        numer.resize(m, 0.0);
        if numer.iter().chain(&denom).any(|c| !c.is_finite()) {
            return Err(PadeError::NonFinite);
        }
        let q0 = denom[0];
        let scale = denom.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        if q0 == 0.0 {
            return Err(PadeError::PoleAtOrigin);
        }
        if denom[m].abs() <= 1e-14 * scale {
            return Err(PadeError::DegenerateDenominator);
        }
        if q0 != 1.0 {
            numer.iter_mut().for_each(|c| *c /= q0);
            denom.iter_mut().for_each(|c| *c /= q0);
        }
        Ok(Self { numer, denom })
    }

    pub fn numer(&self) -> &[f64] {
        &self.numer
    }

    pub fn denom(&self) -> &[f64] {
        &self.denom
    }

    /// Denominator degree.
    pub fn m(&self) -> usize {
        self.denom.len() - 1
    }

    /// Value at `s`.
    pub fn eval(&self, s: f64) -> f64 {
        poly::eval(&self.numer, s) / poly::eval(&self.denom, s)
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        poly::eval_complex(&self.numer, s) / poly::eval_complex(&self.denom, s)
    }

    /// First `n` Taylor coefficients at `s = 0`.
    pub fn taylor(&self, n: usize) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::with_capacity(n);
        for k in 0..n {
            let a = self.numer.get(k).copied().unwrap_or(0.0);
            let conv: f64 = (1..=k.min(self.m()))
                .map(|j| self.denom[j] * out[k - j])
                .sum();
            out.push(a - conv);
        }
        out
    }
}

/// A cancelled pole/zero pair, reported in the `t` domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub pole: Complex64,
    pub zero: Complex64,
    /// Residue the pole carried before cancellation.
    pub residue: Complex64,
}

/// Default pole/zero distance below which a pair is cancelled.
pub const DEFECT_THRESHOLD: f64 = 1e-3;

fn trimmed(coeffs: &[f64]) -> &[f64] {
    match poly::degree(coeffs) {
        Some(d) => &coeffs[..=d],
        None => &coeffs[..0],
    }
}

fn conj_index(roots: &[Complex64], i: usize, taken: &[bool]) -> Option<usize> {
    if roots[i].im == 0.0 {
        return None;
    }
    let target = roots[i].conj();
    (0..roots.len()).find(|&j| j != i && !taken[j] && roots[j] == target)
}

/// Cancels pole/zero pairs closer than `threshold`. Returns the reduced
/// approximant (identical to the input when nothing is cancelled) and the
/// removed pairs.
pub fn remove_defects(
    rf: &RationalApproximant,
    threshold: f64,
) -> Result<(RationalApproximant, Vec<Defect>), PadeError> {
    let numer = trimmed(&rf.numer);
    if numer.is_empty() {
        return Err(PadeError::ZeroNumerator);
    }
    if numer.len() < 2 {
        return Ok((rf.clone(), Vec::new()));
    }
    let zeros = poly::poly_roots(numer, ROOT_TOLERANCE)?;
    let poles = poly::poly_roots(&rf.denom, ROOT_TOLERANCE)?;

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in poles.iter().enumerate() {
        for (j, z) in zeros.iter().enumerate() {
            let d = (p - z).norm();
            if d < threshold {
                pairs.push((d, i, j));
            }
        }
    }
    if pairs.is_empty() {
        return Ok((rf.clone(), Vec::new()));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut pole_gone = vec![false; poles.len()];
    let mut zero_gone = vec![false; zeros.len()];
    let mut cancelled = Vec::new();
    for &(_, i, j) in &pairs {
        if pole_gone[i] || zero_gone[j] {
            continue;
        }
        // Complex pairs leave together with their conjugates so the reduced
        // polynomials stay real.
        let partners = match (poles[i].im == 0.0, zeros[j].im == 0.0) {
            (true, true) => Some(None),
            (false, false) => {
                pole_gone[i] = true;
                zero_gone[j] = true;
                let pc = conj_index(&poles, i, &pole_gone);
                let zc = conj_index(&zeros, j, &zero_gone);
                pole_gone[i] = false;
                zero_gone[j] = false;
                match (pc, zc) {
                    (Some(a), Some(b)) => Some(Some((a, b))),
                    _ => None,
                }
            }
            _ => None,
        };
        let Some(partner) = partners else { continue };
        pole_gone[i] = true;
        zero_gone[j] = true;
        cancelled.push((i, j));
        if let Some((a, b)) = partner {
            pole_gone[a] = true;
            zero_gone[b] = true;
            cancelled.push((a, b));
        }
    }
    if cancelled.is_empty() {
        return Ok((rf.clone(), Vec::new()));
    }
    if pole_gone.iter().all(|&g| g) {
        return Err(PadeError::DefectDegenerate);
    }

    let dq = poly::derivative(&rf.denom);
    let defects = cancelled
        .iter()
        .map(|&(i, j)| Defect {
            pole: poles[i] + 1.0,
            zero: zeros[j] + 1.0,
            residue: poly::eval_complex(&rf.numer, poles[i]) / poly::eval_complex(&dq, poles[i]),
        })
        .collect();

    let keep_poles: Vec<Complex64> = poles
        .iter()
        .zip(&pole_gone)
        .filter(|(_, &g)| !g)
        .map(|(p, _)| *p)
        .collect();
    let keep_zeros: Vec<Complex64> = zeros
        .iter()
        .zip(&zero_gone)
        .filter(|(_, &g)| !g)
        .map(|(z, _)| *z)
        .collect();
    let numer = poly::from_roots(*numer.last().unwrap(), &keep_zeros);
    let denom = poly::from_roots(*rf.denom.last().unwrap(), &keep_poles);
    Ok((RationalApproximant::new(numer, denom)?, defects))
}

/// Minimum pole separation accepted by [`partial_fractions`].
pub const REPEATED_ROOT_TOLERANCE: f64 = 1e-8;

/// `P/Q = sum c_i / (t - x_i)` with poles in the `t` domain and residues
/// `c_i = P(z_i) / Q'(z_i)`. Conjugate poles get exactly conjugate residues
/// and real poles get real residues.
pub fn partial_fractions(rf: &RationalApproximant) -> Result<Vec<(Complex64, Complex64)>, PadeError> {
    let poles = poly::poly_roots(&rf.denom, ROOT_TOLERANCE)?;
    for i in 0..poles.len() {
        for j in i + 1..poles.len() {
            let d = (poles[i] - poles[j]).norm();
            if d < REPEATED_ROOT_TOLERANCE {
                return Err(PadeError::NearRepeatedRoots { distance: d });
            }
        }
    }
    let dq = poly::derivative(&rf.denom);
    let mut residues: Vec<Complex64> = poles
        .iter()
        .map(|&z| poly::eval_complex(&rf.numer, z) / poly::eval_complex(&dq, z))
        .collect();
    for i in 0..poles.len() {
        if poles[i].im == 0.0 {
            residues[i].im = 0.0;
        } else if poles[i].im < 0.0 {
            if let Some(j) = poles.iter().position(|&p| p == poles[i].conj()) {
                residues[i] = residues[j].conj();
            }
        }
    }
    if residues.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(PadeError::NonFinite);
    }
    Ok(residues
        .into_iter()
        .zip(poles)
        .map(|(c, z)| (c, z + 1.0))
        .collect())
}

/// `sum c_i / (t - x_i)`
pub fn eval_partial_fractions(terms: &[(Complex64, Complex64)], t: Complex64) -> Complex64 {
    terms.iter().map(|&(c, x)| c / (t - x)).sum()
}
